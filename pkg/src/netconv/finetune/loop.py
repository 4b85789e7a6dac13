"""Supervised fine-tuning of a (pre-trained) encoder with a fresh classification head."""

from __future__ import annotations

import logging
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from netconv.finetune.metrics import EvalReport
from netconv.finetune.splits import Split, stratified_split
from netconv.ingest.corpus import Corpus, read_corpus
from netconv.model import (
    ParameterStore,
    attach_classifier,
    classify,
    encode,
    load_checkpoint,
    pool,
    save_checkpoint,
    set_feature_norm,
)
from netconv.pretrain.optim import Adam
from netconv.tensor import backward, cross_entropy, no_grad

log = logging.getLogger(__name__)

SHUFFLE_STREAM = 0x5F1E


@dataclass
class FinetuneConfig:
    epochs: int = 10
    lr: float = 2e-5
    batch_size: int = 8
    num_classes: Optional[int] = None  # None: taken from the corpus labels
    pool_mode: Optional[str] = None  # None: keep the encoder's setting
    freeze_encoder: bool = False
    seed: int = 0
    train_fraction: float = 0.64
    val_fraction: float = 0.16
    test_fraction: float = 0.20
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    eval_batch_size: int = 64
    # z-score pooled features with fixed train-split statistics before the head
    standardize_head: bool = True

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if abs(self.train_fraction + self.val_fraction + self.test_fraction - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        if self.pool_mode not in (None, "max", "mean"):
            raise ValueError(f"unknown pool_mode {self.pool_mode!r}")

    @property
    def fractions(self) -> tuple:
        return (self.train_fraction, self.val_fraction, self.test_fraction)

    @classmethod
    def from_dict(cls, d: dict) -> "FinetuneConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown finetune config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float  # nan for the untrained epoch 0
    val_macro_f1: float


@dataclass
class FinetuneResult:
    store: ParameterStore
    report: EvalReport  # on the test split
    split: Split
    history: list = field(default_factory=list)

    def epochs_to_reach(self, target_f1: float) -> Optional[int]:
        """First epoch whose validation macro F1 reaches ``target_f1`` (None if never)."""
        for rec in self.history:
            if rec.val_macro_f1 >= target_f1:
                return rec.epoch
        return None


def _load_store(model) -> ParameterStore:
    if isinstance(model, ParameterStore):
        return model.copy()
    return load_checkpoint(model).store


def _load_corpus(corpus) -> Corpus:
    return corpus if isinstance(corpus, Corpus) else read_corpus(corpus)


def _check_labels(corpus: Corpus, num_classes: int):
    if not corpus.labeled:
        raise ValueError("corpus is unlabeled")
    top = int(corpus.labels.max())
    if top >= num_classes:
        raise ValueError(f"label {top} out of range for {num_classes} classes")


def predict(store: ParameterStore, tokens: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Argmax class per record, evaluated without building a graph."""
    out = []
    with no_grad():
        for lo in range(0, len(tokens), batch_size):
            hidden, mask = encode(store, tokens[lo:lo + batch_size])
            out.append(classify(store, hidden, mask).data.argmax(axis=-1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate(model, corpus, batch_size: int = 64) -> EvalReport:
    """Metrics of a fine-tuned model (store or checkpoint path) on a labeled corpus."""
    store = model if isinstance(model, ParameterStore) else load_checkpoint(model).store
    corpus = _load_corpus(corpus)
    k = store.num_classes
    if k is None:
        raise ValueError("model has no classification head")
    _check_labels(corpus, k)
    return EvalReport.from_predictions(corpus.labels, predict(store, corpus.tokens, batch_size), k)


def pooled_features(store: ParameterStore, tokens: np.ndarray, batch_size: int = 64) -> np.ndarray:
    out = []
    with no_grad():
        for lo in range(0, len(tokens), batch_size):
            hidden, mask = encode(store, tokens[lo:lo + batch_size])
            out.append(pool(store, hidden, mask).data)
    return np.concatenate(out)


def standardize_head(store: ParameterStore, tokens: np.ndarray, batch_size: int = 64) -> None:
    """Give the head a fixed z-scoring of pooled features, with statistics from ``tokens``.

    Pooled encoder outputs share a large record-independent offset; fed raw,
    every hidden unit sees nearly the same input for every record.
    """
    feats = pooled_features(store, tokens, batch_size).astype(np.float64)
    set_feature_norm(store, feats.mean(axis=0), 1.0 / (feats.std(axis=0) + 1e-6))


def _val_f1(store, corpus: Corpus, idx: np.ndarray, k: int, batch_size: int) -> float:
    if idx.size == 0:
        return float("nan")
    sub = corpus[idx]
    return EvalReport.from_predictions(sub.labels, predict(store, sub.tokens, batch_size), k).macro_f1


def finetune(model, corpus, cfg: FinetuneConfig, out_path=None, split: Optional[Split] = None) -> FinetuneResult:
    """Attach a fresh head to ``model`` and train on the train split of ``corpus``.

    ``model`` is a checkpoint path or a :class:`ParameterStore` (left
    unmodified). Validation macro F1 is recorded after every epoch, including
    epoch 0 before any update; the returned report is on the test split.
    """
    store = _load_store(model)
    corpus = _load_corpus(corpus)
    if not corpus.labeled:
        raise ValueError("corpus is unlabeled")
    k = cfg.num_classes or corpus.num_classes
    _check_labels(corpus, k)
    if cfg.pool_mode is not None:
        store.config = replace(store.config, pool_mode=cfg.pool_mode)
    if split is None:
        split = stratified_split(corpus.labels, cfg.fractions, cfg.seed)

    train_labels = corpus.labels[split.train]
    for c in range(k):
        if not (train_labels == c).any():
            msg = f"class {c} has no records in the training split"
            warnings.warn(msg, stacklevel=2)
            log.warning(msg)

    attach_classifier(store, k, cfg.seed)
    if cfg.standardize_head and split.train.size > 1:
        standardize_head(store, corpus.tokens[split.train], cfg.eval_batch_size)
    names = store.names("cls.") if cfg.freeze_encoder else [n for n in store if not n.startswith("head.")]
    names = [n for n in names if not n.startswith("cls.norm.")]
    for n in store:
        store[n].requires_grad = n in names
    opt = Adam(store, betas=(cfg.beta1, cfg.beta2), eps=cfg.eps, names=names)

    history = [EpochRecord(0, float("nan"), _val_f1(store, corpus, split.val, k, cfg.eval_batch_size))]
    train = split.train
    for epoch in range(1, cfg.epochs + 1):
        if train.size == 0:
            raise ValueError("training split is empty")
        order = train[np.random.default_rng([cfg.seed, epoch, SHUFFLE_STREAM]).permutation(train.size)]
        total = 0.0
        for lo in range(0, order.size, cfg.batch_size):
            ids = order[lo:lo + cfg.batch_size]
            hidden, mask = encode(store, corpus.tokens[ids])
            loss = cross_entropy(classify(store, hidden, mask), corpus.labels[ids])
            total += float(loss.data) * ids.size
            backward(loss)
            opt.step(cfg.lr)
            opt.zero_grad()
        rec = EpochRecord(epoch, total / order.size, _val_f1(store, corpus, split.val, k, cfg.eval_batch_size))
        history.append(rec)
        log.info("epoch %d loss %.4f val macro F1 %.4f", epoch, rec.train_loss, rec.val_macro_f1)

    for n in store:
        store[n].requires_grad = not n.startswith("cls.norm.")
    test = corpus[split.test]
    report = EvalReport.from_predictions(test.labels, predict(store, test.tokens, cfg.eval_batch_size), k)
    if out_path is not None:
        meta = {"kind": "finetune", "num_classes": k, "finetune": asdict(cfg)}
        save_checkpoint(Path(out_path), store, meta=meta)
    return FinetuneResult(store, report, split, history)
