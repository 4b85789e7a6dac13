from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from netconv.vocab import VOCAB_SIZE

GATE_MODES = ("sbg", "relu", "gelu", "none")
POOL_MODES = ("max", "mean")


@dataclass
class ModelConfig:
    """Architecture hyperparameters.

    ``vocab_size`` is the full two-byte vocabulary plus PAD and MASK; a smaller
    value is accepted only so that gradient checks can run on a toy table.
    """

    vocab_size: int = VOCAB_SIZE
    d_model: int = 256
    num_layers: int = 5
    kernel_size: int = 4
    use_wbs: bool = True
    gate_mode: str = "sbg"
    use_residual: bool = True
    use_layer_norm: bool = True
    use_pointwise: bool = True
    pool_mode: str = "max"
    head_hidden: int | None = None
    tie_output_embedding: bool = True

    def __post_init__(self):
        if self.kernel_size < 1:
            raise ValueError("kernel_size must be >= 1")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.d_model < 1:
            raise ValueError("d_model must be >= 1")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.gate_mode not in GATE_MODES:
            raise ValueError(f"gate_mode must be one of {GATE_MODES}")
        if self.pool_mode not in POOL_MODES:
            raise ValueError(f"pool_mode must be one of {POOL_MODES}")
        if self.head_hidden is None:
            self.head_hidden = self.d_model

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)
