"""Token corpus container and its on-disk format.

File layout (little-endian): ``b"NCV1"``, version u32, tokens_per_record u32,
label_present u8, then per record a u32 label (``0xFFFFFFFF`` when absent)
followed by tokens_per_record u32 token ids.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from netconv.ingest.tokenize import TOKEN_DTYPE, TokenSequence
from netconv.vocab import MASK_ID, VOCAB_SIZE

MAGIC = b"NCV1"
VERSION = 1
NO_LABEL = 0xFFFFFFFF
_HEADER = struct.Struct("<4sIIB")


class CorpusError(ValueError):
    pass


class Corpus:
    """Fixed-width records: ``tokens`` is (R, T) uint32, ``labels`` is (R,) int64 with -1 for none."""

    def __init__(self, tokens: np.ndarray, labels: np.ndarray | None = None):
        tokens = np.asarray(tokens, dtype=TOKEN_DTYPE)
        if tokens.ndim != 2:
            raise ValueError("tokens must be a 2-D (records x tokens) array")
        if labels is None:
            labels = np.full(len(tokens), -1, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (len(tokens),):
            raise ValueError("one label per record required")
        self.tokens = tokens
        self.labels = labels

    @classmethod
    def from_records(cls, records: Iterable[TokenSequence], tokens_per_record: int | None = None) -> "Corpus":
        records = list(records)
        widths = {len(r) for r in records}
        if tokens_per_record is not None:
            widths.add(tokens_per_record)
        if len(widths) > 1:
            raise CorpusError(f"records have differing lengths {sorted(widths)}")
        width = widths.pop() if widths else 0
        tokens = np.zeros((len(records), width), dtype=TOKEN_DTYPE)
        labels = np.full(len(records), -1, dtype=np.int64)
        for i, r in enumerate(records):
            tokens[i] = r.tokens
            labels[i] = -1 if r.label is None else r.label
        return cls(tokens, labels)

    @property
    def tokens_per_record(self) -> int:
        return self.tokens.shape[1]

    @property
    def labeled(self) -> bool:
        return len(self) > 0 and bool((self.labels >= 0).all())

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self) and self.labels.max() >= 0 else 0

    def __len__(self):
        return len(self.tokens)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            lab = int(self.labels[idx])
            return TokenSequence(self.tokens[idx], None if lab < 0 else lab)
        return Corpus(self.tokens[idx], self.labels[idx])

    def __iter__(self) -> Iterator[TokenSequence]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return (self.tokens.shape == other.tokens.shape and np.array_equal(self.tokens, other.tokens)
                and np.array_equal(self.labels, other.labels))

    def concat(self, other: "Corpus") -> "Corpus":
        return Corpus(np.concatenate([self.tokens, other.tokens]), np.concatenate([self.labels, other.labels]))


def write_corpus(records: Corpus | Sequence[TokenSequence], path, tokens_per_record: int | None = None) -> None:
    corpus = records if isinstance(records, Corpus) else Corpus.from_records(records, tokens_per_record)
    if tokens_per_record is not None and corpus.tokens_per_record != tokens_per_record and len(corpus):
        raise CorpusError("record length does not match tokens_per_record")
    if corpus.tokens.size and (corpus.tokens.max() >= VOCAB_SIZE or (corpus.tokens == MASK_ID).any()):
        raise CorpusError("stored corpora may only hold byte-pair and PAD ids")
    width = corpus.tokens_per_record if len(corpus) else (tokens_per_record or corpus.tokens_per_record)
    labels = np.where(corpus.labels < 0, NO_LABEL, corpus.labels).astype("<u4")
    rows = np.empty((len(corpus), width + 1), dtype="<u4")
    rows[:, 0] = labels
    rows[:, 1:] = corpus.tokens
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, width, int(bool((corpus.labels >= 0).any()))))
        fh.write(rows.tobytes())
    tmp.replace(path)


def read_corpus(path) -> Corpus:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CorpusError(f"{path}: truncated corpus header")
    magic, version, width, _ = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CorpusError(f"{path}: not a token corpus (bad magic)")
    if version != VERSION:
        raise CorpusError(f"{path}: unsupported corpus version {version}")
    body = raw[_HEADER.size:]
    row_bytes = 4 * (width + 1)
    if len(body) % row_bytes:
        raise CorpusError(f"{path}: truncated record data")
    rows = np.frombuffer(body, dtype="<u4").reshape(-1, width + 1)
    labels = rows[:, 0].astype(np.int64)
    labels[labels == NO_LABEL] = -1
    return Corpus(rows[:, 1:].astype(TOKEN_DTYPE), labels)
