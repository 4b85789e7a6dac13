from __future__ import annotations

import numpy as np

from netconv.model.params import ParameterStore


class Adam:
    """Adam with bias correction; state is keyed by parameter name."""

    def __init__(self, store: ParameterStore, betas=(0.9, 0.999), eps=1e-8, names=None):
        self.store = store
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.names = list(names) if names is not None else list(store.tensors)
        self.t = 0
        self.m = {n: np.zeros_like(store[n].data) for n in self.names}
        self.v = {n: np.zeros_like(store[n].data) for n in self.names}

    def step(self, lr: float):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        step_size = lr / c1
        for n in self.names:
            p = self.store[n]
            g = p.grad
            if g is None:
                continue
            m, v = self.m[n], self.v[n]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            denom = np.sqrt(v / c2)
            denom += self.eps
            p.data -= (step_size * m / denom).astype(p.data.dtype)

    def zero_grad(self):
        for n in self.names:
            self.store[n].grad = None

    def state_arrays(self) -> dict:
        out = {}
        for n in self.names:
            out[f"opt.m.{n}"] = self.m[n]
            out[f"opt.v.{n}"] = self.v[n]
        return out

    def load_state(self, arrays: dict, t: int):
        self.t = t
        for n in self.names:
            self.m[n][...] = arrays[f"opt.m.{n}"]
            self.v[n][...] = arrays[f"opt.v.{n}"]


def warmup_lr(base_lr: float, step: int, total_steps: int, warmup_fraction: float) -> float:
    """Linear warmup over the first ``warmup_fraction`` of training, then constant. ``step`` is 0-based."""
    warm = max(1, int(round(warmup_fraction * total_steps)))
    return base_lr * min(1.0, (step + 1) / warm)
