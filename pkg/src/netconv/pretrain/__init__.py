from netconv.pretrain.loop import (
    LOG_HEADER,
    MaskedBatch,
    PretrainConfig,
    PretrainResult,
    StepResult,
    TrainingError,
    batch_records,
    make_batch,
    masked_accuracy,
    pretrain_step,
    run_pretraining,
)
from netconv.pretrain.masking import (
    MaskPlan,
    apply_mask,
    expected_span_length,
    maximal_runs,
    sample_mask_plan,
    sample_random_plan,
    unmask,
)
from netconv.pretrain.optim import Adam, warmup_lr

__all__ = [
    "Adam",
    "LOG_HEADER",
    "MaskPlan",
    "MaskedBatch",
    "PretrainConfig",
    "PretrainResult",
    "StepResult",
    "TrainingError",
    "apply_mask",
    "batch_records",
    "expected_span_length",
    "make_batch",
    "masked_accuracy",
    "maximal_runs",
    "pretrain_step",
    "run_pretraining",
    "sample_mask_plan",
    "sample_random_plan",
    "unmask",
    "warmup_lr",
]
