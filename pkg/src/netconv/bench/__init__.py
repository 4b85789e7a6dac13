from netconv.bench.attention import AttentionParams, attention_oracle, init_attention, reference_attention_forward
from netconv.bench.scaling import (
    DEFAULT_LENGTHS,
    VARIANTS,
    PowerFit,
    ScalingReport,
    ScalingRow,
    fit_power_law,
    layer_fn,
    mean_forward_time,
    scaling_curve,
)
from netconv.bench.throughput import ThroughputReport, ThroughputRow, batch_ids, measure_throughput

__all__ = [
    "AttentionParams",
    "DEFAULT_LENGTHS",
    "PowerFit",
    "ScalingReport",
    "ScalingRow",
    "ThroughputReport",
    "ThroughputRow",
    "VARIANTS",
    "attention_oracle",
    "batch_ids",
    "fit_power_law",
    "init_attention",
    "layer_fn",
    "mean_forward_time",
    "measure_throughput",
    "reference_attention_forward",
    "scaling_curve",
]
