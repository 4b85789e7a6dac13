"""Single-head scaled dot-product self-attention, used only as a cost comparator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass
class AttentionParams:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray

    @property
    def d_model(self) -> int:
        return self.wq.shape[0]


def init_attention(d_model: int, seed: int = 0, dtype=np.float32) -> AttentionParams:
    rng = np.random.default_rng([seed, 0xA77])
    bound = 1.0 / np.sqrt(d_model)
    return AttentionParams(*(rng.uniform(-bound, bound, (d_model, d_model)).astype(dtype) for _ in range(4)))


def reference_attention_forward(x: np.ndarray, params: AttentionParams) -> np.ndarray:
    """``softmax(Q K^T / sqrt(d)) V`` followed by the output projection; x is (N, d)."""
    q = x @ params.wq
    k = x @ params.wk
    v = x @ params.wv
    scores = (q @ k.T) / np.sqrt(x.shape[-1])
    return (special.softmax(scores, axis=-1) @ v) @ params.wo


def attention_oracle(x: np.ndarray, params: AttentionParams) -> np.ndarray:
    """Brute-force two-loop evaluation of the same layer (slow; tests only)."""
    n, d = x.shape
    q = x @ params.wq
    k = x @ params.wk
    v = x @ params.wv
    out = np.zeros((n, d), dtype=np.float64)
    for i in range(n):
        s = np.array([float(q[i] @ k[j]) / np.sqrt(d) for j in range(n)])
        w = np.exp(s - s.max())
        w /= w.sum()
        acc = np.zeros(d)
        for j in range(n):
            acc += w[j] * v[j]
        out[i] = acc
    return out @ params.wo
