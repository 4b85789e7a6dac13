from __future__ import annotations

import numpy as np

from netconv.model.config import ModelConfig
from netconv.tensor import DEFAULT_DTYPE, Tensor

INIT_RANGE = 0.02


class ParameterStore:
    """Named model tensors in a fixed, deterministic order."""

    def __init__(self, config: ModelConfig, tensors: dict[str, Tensor] | None = None):
        self.config = config
        self.tensors: dict[str, Tensor] = dict(tensors or {})

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __setitem__(self, name: str, value: Tensor):
        self.tensors[name] = value

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self):
        return iter(self.tensors)

    def items(self):
        return self.tensors.items()

    def names(self, prefix: str = "") -> list[str]:
        return [n for n in self.tensors if n.startswith(prefix)]

    def param_count(self, prefix: str = "") -> int:
        return sum(t.data.size for n, t in self.tensors.items() if n.startswith(prefix))

    @property
    def num_classes(self) -> int | None:
        if "cls.out.bias" not in self.tensors:
            return None
        return self.tensors["cls.out.bias"].shape[0]

    def copy(self, dtype=None) -> "ParameterStore":
        out = {}
        for name, t in self.tensors.items():
            data = t.data.astype(dtype) if dtype is not None else t.data.copy()
            out[name] = Tensor(data, requires_grad=t.requires_grad, dtype=data.dtype)
        return ParameterStore(ModelConfig.from_dict(self.config.to_dict()), out)

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def bit_equal(self, other: "ParameterStore") -> bool:
        if list(self.tensors) != list(other.tensors):
            return False
        return all(
            a.data.dtype == b.data.dtype and a.data.shape == b.data.shape and a.data.tobytes() == b.data.tobytes()
            for a, b in zip(self.tensors.values(), other.tensors.values())
        )


def _uniform(rng, shape, dtype):
    return rng.uniform(-INIT_RANGE, INIT_RANGE, size=shape).astype(dtype)


def init_model(config: ModelConfig, seed: int, dtype=DEFAULT_DTYPE) -> ParameterStore:
    """Fresh encoder + MLM head. Kernel scores start at zero, i.e. uniform window weights."""
    rng = np.random.default_rng(seed)
    d, k, v = config.d_model, config.kernel_size, config.vocab_size
    t: dict[str, np.ndarray] = {"embed": _uniform(rng, (v, d), dtype)}
    for i in range(config.num_layers):
        p = f"layer{i}."
        t[p + "h_kernel"] = np.zeros((d, k), dtype)
        if config.gate_mode == "sbg":
            t[p + "g_kernel"] = np.zeros((d, k), dtype)
        if config.use_pointwise:
            t[p + "pointwise.weight"] = _uniform(rng, (d, d), dtype)
            t[p + "pointwise.bias"] = np.zeros(d, dtype)
        if config.use_layer_norm:
            t[p + "norm.gain"] = np.ones(d, dtype)
            t[p + "norm.bias"] = np.zeros(d, dtype)
    if not config.tie_output_embedding:
        t["head.mlm.weight"] = _uniform(rng, (d, v), dtype)
    t["head.mlm_bias"] = np.zeros(v, dtype)
    return ParameterStore(config, {n: Tensor(a, requires_grad=True, dtype=dtype) for n, a in t.items()})


def attach_classifier(store: ParameterStore, num_classes: int, seed: int) -> ParameterStore:
    """Replace any existing classification head with a freshly initialized one."""
    if num_classes < 2:
        raise ValueError("need at least two classes")
    for name in store.names("cls."):
        del store.tensors[name]
    rng = np.random.default_rng([seed, 0xC15])
    cfg = store.config
    dtype = store["embed"].dtype
    h = cfg.head_hidden
    # fan-in bounds: with +-0.02 weights the logits barely move at fine-tuning learning rates
    w1 = rng.uniform(-1, 1, (cfg.d_model, h)) / np.sqrt(cfg.d_model)
    w2 = rng.uniform(-1, 1, (h, num_classes)) / np.sqrt(h)
    store["cls.hidden.weight"] = Tensor(w1.astype(dtype), requires_grad=True, dtype=dtype)
    store["cls.hidden.bias"] = Tensor(np.zeros(h, dtype), requires_grad=True, dtype=dtype)
    store["cls.out.weight"] = Tensor(w2.astype(dtype), requires_grad=True, dtype=dtype)
    store["cls.out.bias"] = Tensor(np.zeros(num_classes, dtype), requires_grad=True, dtype=dtype)
    return store


def set_feature_norm(store: ParameterStore, shift: np.ndarray, scale: np.ndarray) -> None:
    """Fixed affine map ``(pooled - shift) * scale`` applied before the head's first layer.

    Stored with the head (and saved in checkpoints) but never trained.
    """
    dtype = store["embed"].dtype
    d = store.config.d_model
    scale = np.asarray(scale, dtype=np.float64)
    for name, v in (("cls.norm.scale", scale), ("cls.norm.offset", -np.asarray(shift) * scale)):
        v = np.asarray(v, dtype=dtype)
        if v.shape != (d,):
            raise ValueError(f"{name}: expected shape ({d},), got {v.shape}")
        store[name] = Tensor(v, requires_grad=False, dtype=dtype)


def expected_param_count(config: ModelConfig) -> int:
    """Closed-form size of :func:`init_model` output (encoder + MLM head)."""
    v, d, k, L = config.vocab_size, config.d_model, config.kernel_size, config.num_layers
    per_layer = d * k * (2 if config.gate_mode == "sbg" else 1)
    if config.use_pointwise:
        per_layer += d * d + d
    if config.use_layer_norm:
        per_layer += 2 * d
    head = v + (0 if config.tie_output_embedding else d * v)
    return v * d + L * per_layer + head
