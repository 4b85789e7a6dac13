"""Forward time versus sequence length for one NetConv layer and one attention layer."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from netconv.bench.attention import init_attention, reference_attention_forward
from netconv.bench.timing import MIN_MEASURE_NS, calibrate_calls, time_calls
from netconv.model import ModelConfig, init_model, traffic_conv_layer
from netconv.tensor import Tensor, no_grad

VARIANTS = ("netconv_layer", "attention_layer")
DEFAULT_LENGTHS = (256, 512, 1024, 2048, 4096)


@dataclass
class PowerFit:
    a: float
    b: float
    r2: float
    rms_residual: float  # in natural-log units


def fit_power_law(lengths, times) -> PowerFit:
    """Least squares of ``log t = log a + b log N``."""
    x = np.log(np.asarray(lengths, dtype=np.float64))
    y = np.log(np.asarray(times, dtype=np.float64))
    if x.size < 4:
        raise ValueError("a power-law fit needs at least 4 points")
    b, log_a = np.polyfit(x, y, 1)
    resid = y - (log_a + b * x)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return PowerFit(float(np.exp(log_a)), float(b), r2, float(np.sqrt((resid ** 2).mean())))


@dataclass
class ScalingRow:
    variant: str
    length: int
    mean_s: float
    calls: int


@dataclass
class ScalingReport:
    d_model: int
    threads: int
    rows: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)

    def times(self, variant: str):
        rows = [r for r in self.rows if r.variant == variant]
        return [r.length for r in rows], [r.mean_s for r in rows]

    def to_dict(self) -> dict:
        return {"d_model": self.d_model, "threads": self.threads, "rows": [asdict(r) for r in self.rows],
                "fits": {k: asdict(v) for k, v in self.fits.items()}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = ["variant,length,mean_s,calls"]
        lines += [f"{r.variant},{r.length},{r.mean_s:.9f},{r.calls}" for r in self.rows]
        return "\n".join(lines) + "\n"


def netconv_layer_fn(d_model: int, length: int, seed: int = 0, kernel_size: int = 4):
    """A zero-argument callable running one traffic convolution layer on (length, d) input."""
    store = init_model(ModelConfig(vocab_size=2, d_model=d_model, num_layers=1, kernel_size=kernel_size), seed)
    rng = np.random.default_rng([seed, length])
    x = Tensor(rng.standard_normal((length, d_model)).astype(np.float32))
    valid = Tensor(np.ones((length, 1), dtype=np.float32))

    def run():
        with no_grad():
            traffic_conv_layer(store, 0, x, valid)

    return run


def attention_layer_fn(d_model: int, length: int, seed: int = 0):
    params = init_attention(d_model, seed)
    x = np.random.default_rng([seed, length]).standard_normal((length, d_model)).astype(np.float32)
    return lambda: reference_attention_forward(x, params)


def layer_fn(variant: str, d_model: int, length: int, seed: int = 0):
    if variant == "netconv_layer":
        return netconv_layer_fn(d_model, length, seed)
    if variant == "attention_layer":
        return attention_layer_fn(d_model, length, seed)
    raise ValueError(f"unknown variant {variant!r}; choose from {VARIANTS}")


def mean_forward_time(fn, repeats: int, min_ns: int = MIN_MEASURE_NS) -> tuple[float, int]:
    """Mean seconds per call; calls per repeat grow until a repeat outlasts ``min_ns``."""
    fn()
    calls = calibrate_calls(fn, min_ns)
    total = sum(time_calls(fn, calls) for _ in range(repeats))
    return total / (repeats * calls) / 1e9, calls


def scaling_curve(variants=VARIANTS, lengths=DEFAULT_LENGTHS, d_model: int = 64, repeats: int = 3,
                  seed: int = 0, threads: int = 1, min_ns: int = MIN_MEASURE_NS) -> ScalingReport:
    lengths = [int(n) for n in lengths]
    if len(lengths) < 4:
        raise ValueError("need at least 4 lengths")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError("lengths must be strictly increasing")
    report = ScalingReport(d_model=d_model, threads=threads)
    with threadpool_limits(limits=threads):
        for v in variants:
            for n in lengths:
                t, calls = mean_forward_time(layer_fn(v, d_model, n, seed), repeats, min_ns)
                report.rows.append(ScalingRow(v, n, t, calls))
            report.fits[v] = fit_power_law(*report.times(v))
    return report
