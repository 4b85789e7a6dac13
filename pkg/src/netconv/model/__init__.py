from netconv.model.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from netconv.model.config import ModelConfig
from netconv.model.netconv import (
    classify,
    encode,
    mlm_logits,
    pool,
    traffic_conv_layer,
    valid_mask,
    window_scores,
)
from netconv.model.params import ParameterStore, attach_classifier, expected_param_count, init_model, set_feature_norm

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "ModelConfig",
    "ParameterStore",
    "attach_classifier",
    "classify",
    "encode",
    "expected_param_count",
    "init_model",
    "load_checkpoint",
    "mlm_logits",
    "pool",
    "save_checkpoint",
    "set_feature_norm",
    "traffic_conv_layer",
    "valid_mask",
    "window_scores",
]
