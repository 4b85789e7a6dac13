"""Continuous byte masking: geometric-length spans of MASK tokens."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from netconv.vocab import MASK_ID, PAD_ID


@dataclass
class MaskPlan:
    length: int
    spans: list = field(default_factory=list)  # inclusive (start, end) pairs, sorted

    @property
    def masked_positions(self) -> np.ndarray:
        if not self.spans:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([np.arange(s, e + 1) for s, e in self.spans]).astype(np.int64)

    @classmethod
    def from_positions(cls, length: int, positions) -> "MaskPlan":
        pos = np.unique(np.asarray(positions, dtype=np.int64))
        return cls(length, maximal_runs(pos))


def maximal_runs(positions: np.ndarray) -> list:
    if positions.size == 0:
        return []
    breaks = np.nonzero(np.diff(positions) != 1)[0]
    starts = np.concatenate([[positions[0]], positions[breaks + 1]])
    ends = np.concatenate([positions[breaks], [positions[-1]]])
    return [(int(s), int(e)) for s, e in zip(starts, ends)]


def expected_span_length(p: float, max_span: int) -> float:
    """Mean of min(Geometric(p), max_span) on support {1, 2, ...}."""
    return (1.0 - (1.0 - p) ** max_span) / p


def _free_starts(blocked: np.ndarray, length: int) -> np.ndarray:
    """Start indices s with blocked[s:s+length] all False."""
    n = blocked.size
    if length > n:
        return np.zeros(0, dtype=np.int64)
    c = np.concatenate([[0], np.cumsum(blocked)])
    return np.nonzero(c[length:] - c[: n - length + 1] == 0)[0]


def sample_mask_plan(tokens, cfg, rng: np.random.Generator) -> MaskPlan:
    """Place non-overlapping, non-adjacent geometric spans over non-PAD tokens.

    Span lengths are ``min(Geometric(p), max_span)``. A drawn length is kept and
    only its start is re-drawn until it fits, so accepted lengths follow the
    clipped geometric law exactly. Sampling stops once the masked count is
    within half an expected span of ``mask_rate * non_pad``, which centres the
    mean masked count on the budget.
    """
    tokens = np.asarray(tokens)
    n = tokens.size
    valid = tokens != PAD_ID
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise ValueError("cannot mask a sequence with no non-PAD tokens")
    if getattr(cfg, "masking", "span") == "random":
        return sample_random_plan(tokens, cfg, rng)
    budget = cfg.mask_rate * n_valid
    stop_at = budget - expected_span_length(cfg.geometric_p, cfg.max_span) / 2
    taken = np.zeros(n, dtype=bool)
    masked = 0
    spans = []
    while masked == 0 or masked < stop_at:
        length = min(int(rng.geometric(cfg.geometric_p)), cfg.max_span)
        near = taken.copy()
        near[1:] |= taken[:-1]
        near[:-1] |= taken[1:]
        starts = _free_starts(near | ~valid, length)
        if starts.size == 0:
            if masked:
                break
            # degenerate short sequence: fall back to the longest fitting span
            while starts.size == 0:
                length -= 1
                starts = _free_starts(~valid, length)
        s = int(starts[rng.integers(starts.size)])
        taken[s:s + length] = True
        spans.append((s, s + length - 1))
        masked += length
    spans.sort()
    return MaskPlan(n, spans)


def sample_random_plan(tokens, cfg, rng: np.random.Generator) -> MaskPlan:
    """Independent uniform positions (the non-continuous masking ablation)."""
    tokens = np.asarray(tokens)
    cand = np.nonzero(tokens != PAD_ID)[0]
    if cand.size == 0:
        raise ValueError("cannot mask a sequence with no non-PAD tokens")
    k = max(1, int(round(cfg.mask_rate * cand.size)))
    return MaskPlan.from_positions(tokens.size, rng.choice(cand, size=k, replace=False))


def apply_mask(tokens, plan: MaskPlan) -> tuple[np.ndarray, np.ndarray]:
    """Replace planned positions by MASK; returns (masked tokens, original ids at those positions)."""
    tokens = np.asarray(tokens)
    if tokens.size != plan.length:
        raise ValueError(f"plan covers {plan.length} tokens but sequence has {tokens.size}")
    pos = plan.masked_positions
    out = tokens.copy()
    targets = tokens[pos].copy()
    out[pos] = MASK_ID
    return out, targets


def unmask(masked_tokens, plan: MaskPlan, targets) -> np.ndarray:
    out = np.asarray(masked_tokens).copy()
    out[plan.masked_positions] = targets
    return out
