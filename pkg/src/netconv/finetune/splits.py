"""Stratified train/validation/test splits and few-shot subsets."""

from __future__ import annotations

import logging
import warnings
from typing import NamedTuple

import numpy as np

from netconv.ingest.corpus import Corpus

log = logging.getLogger(__name__)

SPLIT_STREAM = 0x5B17
SHOT_STREAM = 0x5407


class Split(NamedTuple):
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def _require_labels(corpus: Corpus):
    if not corpus.labeled:
        raise ValueError("corpus is unlabeled")


def stratified_split(labels, fractions=(0.64, 0.16, 0.20), seed: int = 0) -> Split:
    """Per-class shuffle, then cut each class by the given fractions.

    Counts are floor-rounded for train and validation; the remainder of each
    class goes to test so no record is dropped. Indices are returned sorted.
    """
    labels = np.asarray(labels)
    if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be three non-negative numbers summing to 1, got {fractions}")
    parts = ([], [], [])
    for c in np.unique(labels):
        idx = np.nonzero(labels == c)[0]
        rng = np.random.default_rng([seed, SPLIT_STREAM, int(c)])
        idx = idx[rng.permutation(idx.size)]
        n_train = int(np.floor(fractions[0] * idx.size))
        n_val = int(np.floor(fractions[1] * idx.size))
        parts[0].append(idx[:n_train])
        parts[1].append(idx[n_train:n_train + n_val])
        parts[2].append(idx[n_train + n_val:])
    return Split(*(np.sort(np.concatenate(p)) if p else np.zeros(0, dtype=np.int64) for p in parts))


def few_shot_subset(corpus: Corpus, shots: int, seed: int = 0) -> Corpus:
    """``shots`` records per class, drawn uniformly without replacement.

    A class with fewer records than ``shots`` is taken whole and a warning is
    emitted. Records keep their original relative order.
    """
    _require_labels(corpus)
    if shots < 1:
        raise ValueError("shots must be >= 1")
    keep = []
    for c in np.unique(corpus.labels):
        idx = np.nonzero(corpus.labels == c)[0]
        if idx.size < shots:
            msg = f"class {int(c)} has only {idx.size} records (< {shots} shots); using all of them"
            warnings.warn(msg, stacklevel=2)
            log.warning(msg)
            keep.append(idx)
        else:
            rng = np.random.default_rng([seed, SHOT_STREAM, int(c)])
            keep.append(rng.choice(idx, size=shots, replace=False))
    return corpus[np.sort(np.concatenate(keep))]
