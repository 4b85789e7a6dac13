"""Synthetic protocol-like corpora for desk-scale experiments.

Each record mimics an anonymized flow: every packet starts with a shared,
mostly constant header, carries class-discriminative contiguous fields at fixed
offsets, and is otherwise filled with uniformly random byte pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from netconv.ingest.corpus import Corpus
from netconv.ingest.tokenize import TOKEN_DTYPE
from netconv.vocab import NUM_BYTE_PAIRS, PAD_ID


@dataclass(frozen=True)
class Field:
    """Fixed tokens at a token offset inside a packet (``packet=None``: every packet)."""

    offset: int
    tokens: tuple
    packet: Optional[int] = 0


@dataclass
class ClassTemplate:
    fields: list = field(default_factory=list)
    # one of these field groups is picked per record
    variants: list = field(default_factory=list)


# zeroed MACs, ethertype, version/TOS, length, id, flags, TTL/proto, checksum, zeroed IPs and ports
DEFAULT_HEADER = (
    Field(0, (0, 0, 0, 0, 0, 0, 0x0800, 0x4500), None),
    Field(10, (0x4000, 0x4006), None),
    Field(13, (0, 0, 0, 0, 0, 0), None),
)


@dataclass
class SynthSpec:
    num_classes: int = 2
    per_class: int = 100
    packets_per_flow: int = 5
    tokens_per_packet: int = 64
    classes: Optional[list] = None
    shared_fields: tuple = DEFAULT_HEADER
    field_offset: int = 19
    field_len: int = 4
    variants_per_class: int = 3
    short_flow_fraction: float = 0.0
    # content is drawn at this width and cropped, so layouts of different widths agree on their common prefix
    generate_width: Optional[int] = None
    # templates come from this seed when set, so corpora drawn with different seeds share class fields
    template_seed: Optional[int] = None

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("a synthetic corpus needs at least two classes")
        if self.classes is not None and len(self.classes) != self.num_classes:
            raise ValueError("one template per class required")

    @property
    def width(self) -> int:
        return max(self.tokens_per_packet, self.generate_width or 0)


def auto_templates(spec: SynthSpec, seed: int) -> list[ClassTemplate]:
    """Random per-class field variants, each packet of a flow with its own field values."""
    rng = np.random.default_rng([seed, 0x7E3])
    out = []
    for _ in range(spec.num_classes):
        variants = []
        for _ in range(spec.variants_per_class):
            group = [
                Field(spec.field_offset, tuple(int(v) for v in rng.integers(0, NUM_BYTE_PAIRS, spec.field_len)), p)
                for p in range(spec.packets_per_flow)
            ]
            variants.append(group)
        out.append(ClassTemplate(fields=[], variants=variants))
    return out


def _place(block: np.ndarray, fields, packets: int, width: int, mask: np.ndarray | None = None):
    for f in fields:
        if f.offset >= width:
            continue
        targets = range(packets) if f.packet is None else [f.packet]
        for p in targets:
            if p >= packets:
                continue
            lo = p * width + f.offset
            hi = min(lo + len(f.tokens), (p + 1) * width)
            block[lo:hi] = f.tokens[: hi - lo]
            if mask is not None:
                mask[lo:hi] = True


def _templates(spec: SynthSpec, seed: int) -> list[ClassTemplate]:
    if spec.classes is not None:
        return spec.classes
    return auto_templates(spec, seed if spec.template_seed is None else spec.template_seed)


def synthesize_corpus(spec: SynthSpec, seed: int) -> Corpus:
    templates = _templates(spec, seed)
    w, P = spec.width, spec.packets_per_flow
    n = spec.num_classes * spec.per_class
    full = np.empty((n, P * w), dtype=TOKEN_DTYPE)
    labels = np.empty(n, dtype=np.int64)
    i = 0
    for c, tmpl in enumerate(templates):
        for j in range(spec.per_class):
            rng = np.random.default_rng([seed, c, j])
            rec = rng.integers(0, NUM_BYTE_PAIRS, size=P * w).astype(TOKEN_DTYPE)
            _place(rec, spec.shared_fields, P, w)
            _place(rec, tmpl.fields, P, w)
            if tmpl.variants:
                _place(rec, tmpl.variants[int(rng.integers(len(tmpl.variants)))], P, w)
            if spec.short_flow_fraction and rng.random() < spec.short_flow_fraction:
                keep = int(rng.integers(1, P))
                rec[keep * w:] = PAD_ID
            full[i] = rec
            labels[i] = c
            i += 1
    order = np.random.default_rng([seed, 0x0D]).permutation(n)
    tokens = full.reshape(n, P, w)[:, :, : spec.tokens_per_packet].reshape(n, -1)
    return Corpus(tokens[order], labels[order])


def field_mask(spec: SynthSpec, seed: int, class_id: int) -> np.ndarray:
    """True at every token position a class's template may write (the rest is noise)."""
    templates = _templates(spec, seed)
    w, P = spec.width, spec.packets_per_flow
    mask = np.zeros(P * w, dtype=bool)
    scratch = np.zeros(P * w, dtype=TOKEN_DTYPE)
    tmpl = templates[class_id]
    _place(scratch, spec.shared_fields, P, w, mask)
    _place(scratch, tmpl.fields, P, w, mask)
    for group in tmpl.variants:
        _place(scratch, group, P, w, mask)
    return mask.reshape(P, w)[:, : spec.tokens_per_packet].reshape(-1)
