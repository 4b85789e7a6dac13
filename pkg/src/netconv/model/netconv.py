"""The traffic convolution encoder and its two heads."""

from __future__ import annotations

import numpy as np

from netconv.model.params import ParameterStore
from netconv.tensor import (
    Tensor,
    add,
    depthwise_conv,
    embedding_lookup,
    gather_positions,
    gelu,
    layer_norm,
    linear,
    max_pool_over_sequence,
    mean_pool_over_sequence,
    mul,
    relu,
    sigmoid,
    softmax,
)
from netconv.tensor.core import make_node
from netconv.vocab import PAD_ID


def window_scores(store: ParameterStore, layer: int, path: str = "h") -> Tensor:
    """Per-channel kernel actually applied by ``layer`` (softmax-normalized unless WBS is off)."""
    raw = store[f"layer{layer}.{path}_kernel"]
    return softmax(raw) if store.config.use_wbs else raw


def traffic_conv_layer(store: ParameterStore, layer: int, x: Tensor, valid: Tensor) -> Tensor:
    """One traffic convolution layer over (..., N, d) activations.

    ``valid`` is a (..., N, 1) float tensor with 0 at PAD positions.
    """
    cfg = store.config
    p = f"layer{layer}."
    z = x
    if cfg.use_layer_norm:
        z = layer_norm(z, store[p + "norm.gain"], store[p + "norm.bias"])
    # windows read zeros at PAD positions
    z = mul(z, valid)
    h = depthwise_conv(z, window_scores(store, layer, "h"))
    if cfg.gate_mode == "sbg":
        g = depthwise_conv(z, window_scores(store, layer, "g"))
        o = mul(h, sigmoid(g))
    elif cfg.gate_mode == "relu":
        o = relu(h)
    elif cfg.gate_mode == "gelu":
        o = gelu(h)
    else:
        o = h
    if cfg.use_pointwise:
        o = linear(o, store[p + "pointwise.weight"], store[p + "pointwise.bias"])
    y = add(x, o) if cfg.use_residual else o
    return mul(y, valid)


def valid_mask(tokens: np.ndarray) -> np.ndarray:
    return np.asarray(tokens) != PAD_ID


def encode(store: ParameterStore, tokens) -> tuple[Tensor, np.ndarray]:
    """Embed and run every layer. Accepts (N,) or (B, N) token ids of any length N >= 1.

    Returns the hidden states and the boolean valid (non-PAD) mask.
    """
    tokens = np.asarray(tokens)
    if tokens.ndim not in (1, 2) or tokens.shape[-1] < 1:
        raise ValueError(f"expected (N,) or (B, N) tokens with N >= 1, got shape {tokens.shape}")
    mask = valid_mask(tokens)
    embed = store["embed"]
    ids = tokens.astype(np.int64)
    if store.config.vocab_size <= PAD_ID:
        # toy vocabularies have no PAD row
        ids = np.where(mask, ids, 0)
    valid = Tensor(mask[..., None].astype(embed.dtype), dtype=embed.dtype)
    x = mul(embedding_lookup(embed, ids), valid)
    for i in range(store.config.num_layers):
        x = traffic_conv_layer(store, i, x, valid)
    return x, mask


def mlm_logits(store: ParameterStore, hidden: Tensor, positions, batch_index=None) -> Tensor:
    """Vocabulary logits at the given positions: (M, vocab)."""
    positions = np.asarray(positions, dtype=np.int64)
    if positions.size == 0:
        raise ValueError("mlm_logits needs at least one position")
    if hidden.data.ndim == 2:
        if positions.min() < 0 or positions.max() >= hidden.shape[0]:
            raise IndexError("position out of range")
        picked = gather_positions(_add_batch(hidden), np.zeros_like(positions), positions)
    else:
        if batch_index is None:
            raise ValueError("batched hidden states need batch_index")
        if positions.min() < 0 or positions.max() >= hidden.shape[1]:
            raise IndexError("position out of range")
        picked = gather_positions(hidden, np.asarray(batch_index, dtype=np.int64), positions)
    if store.config.tie_output_embedding:
        return linear(picked, store["embed"], store["head.mlm_bias"], transpose_weight=True)
    return linear(picked, store["head.mlm.weight"], store["head.mlm_bias"])


def _add_batch(x: Tensor) -> Tensor:
    return make_node(x.data[None], (x,), lambda g: (g[0],))


def pool(store: ParameterStore, hidden: Tensor, mask: np.ndarray, mode: str | None = None) -> Tensor:
    mode = mode or store.config.pool_mode
    if mode == "max":
        return max_pool_over_sequence(hidden, mask)
    return mean_pool_over_sequence(hidden, mask)


def classify(store: ParameterStore, hidden: Tensor, mask: np.ndarray) -> Tensor:
    """Pool over valid positions, then a two-layer ReLU MLP to class logits."""
    if "cls.out.bias" not in store:
        raise KeyError("store has no classification head; call attach_classifier first")
    if not np.asarray(mask).any(axis=-1).all():
        raise ValueError("cannot classify an all-PAD sequence")
    pooled = pool(store, hidden, mask)
    if "cls.norm.scale" in store:
        pooled = add(mul(pooled, store["cls.norm.scale"]), store["cls.norm.offset"])
    z = relu(linear(pooled, store["cls.hidden.weight"], store["cls.hidden.bias"]))
    return linear(z, store["cls.out.weight"], store["cls.out.bias"])
