"""Masked byte prediction training."""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from netconv.ingest.corpus import Corpus, read_corpus
from netconv.model import ModelConfig, encode, init_model, load_checkpoint, mlm_logits, save_checkpoint
from netconv.model.params import ParameterStore
from netconv.pretrain.masking import apply_mask, sample_mask_plan
from netconv.pretrain.optim import Adam, warmup_lr
from netconv.tensor import backward, cross_entropy, no_grad

log = logging.getLogger(__name__)

EVAL_STREAM = 0xE7A1
LOG_HEADER = ["step", "loss_mean", "loss_sum", "masked_acc", "tokens_per_s"]


class TrainingError(RuntimeError):
    pass


@dataclass
class PretrainConfig:
    mask_rate: float = 0.15
    geometric_p: float = 0.2
    max_span: int = 10
    masking: str = "span"  # "span" or "random"
    steps: int = 100_000
    lr: float = 1e-4
    batch_size: int = 32
    warmup_fraction: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    log_interval: int = 100
    checkpoint_interval: int = 0

    def __post_init__(self):
        if not 0 < self.mask_rate < 1:
            raise ValueError("mask_rate must lie in (0, 1)")
        if not 0 < self.geometric_p <= 1:
            raise ValueError("geometric_p must lie in (0, 1]")
        if self.max_span < 1:
            raise ValueError("max_span must be >= 1")
        if self.masking not in ("span", "random"):
            raise ValueError("masking must be 'span' or 'random'")

    @classmethod
    def from_dict(cls, d: dict) -> "PretrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown pretrain config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class MaskedBatch:
    tokens: np.ndarray  # (B, N) with MASK ids substituted
    batch_index: np.ndarray
    positions: np.ndarray
    targets: np.ndarray


@dataclass
class StepResult:
    loss_mean: float
    loss_sum: float
    correct: int
    masked: int


def make_batch(corpus_tokens: np.ndarray, record_ids, cfg: PretrainConfig, step: int) -> MaskedBatch:
    """Mask each record with its own stream seeded by (seed, record index, step)."""
    rows, bidx, pos, tgt = [], [], [], []
    for b, r in enumerate(record_ids):
        rng = np.random.default_rng([cfg.seed, int(r), step])
        plan = sample_mask_plan(corpus_tokens[r], cfg, rng)
        masked, targets = apply_mask(corpus_tokens[r], plan)
        rows.append(masked)
        p = plan.masked_positions
        bidx.append(np.full(p.size, b))
        pos.append(p)
        tgt.append(targets)
    return MaskedBatch(np.stack(rows).astype(np.int64), np.concatenate(bidx), np.concatenate(pos),
                       np.concatenate(tgt).astype(np.int64))


def batch_records(num_records: int, cfg: PretrainConfig, step: int) -> np.ndarray:
    rng = np.random.default_rng([cfg.seed, step, 0xBA7C])
    return rng.choice(num_records, size=min(cfg.batch_size, num_records), replace=False)


def pretrain_step(store: ParameterStore, batch: MaskedBatch, optimizer: Adam, lr: float) -> StepResult:
    """One Adam update on the mean cross-entropy over masked positions only."""
    if batch.positions.size == 0:
        raise ValueError("batch has no masked positions")
    hidden, _ = encode(store, batch.tokens)
    logits = mlm_logits(store, hidden, batch.positions, batch.batch_index)
    loss = cross_entropy(logits, batch.targets)
    value = float(loss.data)
    if not math.isfinite(value):
        raise TrainingError(f"non-finite loss {value}; last lr {lr:g}")
    correct = int((logits.data.argmax(axis=1) == batch.targets).sum())
    backward(loss)
    optimizer.step(lr)
    optimizer.zero_grad()
    m = batch.positions.size
    return StepResult(value, value * m, correct, m)


def masked_accuracy(store: ParameterStore, corpus_tokens: np.ndarray, cfg: PretrainConfig, seed: int,
                    batch_size: int = 64) -> float:
    """Top-1 accuracy at masked positions of fixed plans (for held-out evaluation)."""
    eval_cfg = PretrainConfig(**{**asdict(cfg), "seed": seed})
    correct = total = 0
    with no_grad():
        for lo in range(0, len(corpus_tokens), batch_size):
            ids = np.arange(lo, min(lo + batch_size, len(corpus_tokens)))
            batch = make_batch(corpus_tokens, ids, eval_cfg, step=EVAL_STREAM)
            hidden, _ = encode(store, batch.tokens)
            logits = mlm_logits(store, hidden, batch.positions, batch.batch_index)
            correct += int((logits.data.argmax(axis=1) == batch.targets).sum())
            total += batch.positions.size
    return correct / total


@dataclass
class PretrainResult:
    store: ParameterStore
    log_rows: list = field(default_factory=list)
    step_losses: list = field(default_factory=list)


def _optimizer_for(store: ParameterStore, cfg: PretrainConfig) -> Adam:
    names = [n for n in store.tensors if not n.startswith("cls.")]
    return Adam(store, betas=(cfg.beta1, cfg.beta2), eps=cfg.eps, names=names)


def run_pretraining(cfg: PretrainConfig, corpus: Corpus | str | Path, out_path=None,
                    model_config: Optional[ModelConfig] = None, log_path=None,
                    resume_from=None) -> PretrainResult:
    """Train from scratch (or resume), logging every ``log_interval`` steps.

    Checkpoints hold parameters plus Adam state so a resumed run replays the
    exact same updates as an uninterrupted one.
    """
    if not isinstance(corpus, Corpus):
        corpus = read_corpus(corpus)
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    tokens = corpus.tokens
    start = 0
    if resume_from is not None:
        ck = load_checkpoint(resume_from)
        store = ck.store
        opt = _optimizer_for(store, cfg)
        start = int(ck.meta.get("step", 0))
        opt.load_state(ck.extra, int(ck.meta.get("adam_t", start)))
    else:
        store = init_model(model_config or ModelConfig(), seed=cfg.seed)
        opt = _optimizer_for(store, cfg)

    result = PretrainResult(store)
    writer = None
    fh = None
    if log_path is not None:
        mode = "a" if resume_from is not None and Path(log_path).exists() else "w"
        fh = open(log_path, mode, newline="")
        writer = csv.writer(fh)
        if mode == "w":
            writer.writerow(LOG_HEADER)

    def checkpoint(path, step):
        meta = {"kind": "pretrain", "step": step, "adam_t": opt.t, "pretrain": asdict(cfg)}
        save_checkpoint(path, store, meta=meta, extra=opt.state_arrays())

    acc_loss = acc_sum = 0.0
    acc_correct = acc_masked = acc_tokens = 0
    t0 = time.perf_counter()
    try:
        for step in range(start, cfg.steps):
            ids = batch_records(len(tokens), cfg, step)
            batch = make_batch(tokens, ids, cfg, step)
            res = pretrain_step(store, batch, opt, warmup_lr(cfg.lr, step, cfg.steps, cfg.warmup_fraction))
            result.step_losses.append(res.loss_mean)
            acc_loss += res.loss_mean
            acc_sum += res.loss_sum
            acc_correct += res.correct
            acc_masked += res.masked
            acc_tokens += batch.tokens.size
            done = step + 1
            if done % cfg.log_interval == 0:
                elapsed = max(time.perf_counter() - t0, 1e-9)
                row = [done, acc_loss / cfg.log_interval, acc_sum / cfg.log_interval,
                       acc_correct / max(acc_masked, 1), acc_tokens / elapsed]
                result.log_rows.append(row)
                if writer:
                    writer.writerow([row[0]] + [f"{v:.6f}" for v in row[1:4]] + [f"{row[4]:.1f}"])
                    fh.flush()
                log.info("step %d loss %.4f acc %.4f", done, row[1], row[3])
                acc_loss = acc_sum = 0.0
                acc_correct = acc_masked = acc_tokens = 0
                t0 = time.perf_counter()
            if out_path is not None and cfg.checkpoint_interval and done % cfg.checkpoint_interval == 0 \
                    and done != cfg.steps:
                checkpoint(Path(f"{out_path}.step{done}"), done)
    finally:
        if fh:
            fh.close()
    if out_path is not None:
        checkpoint(out_path, cfg.steps)
    return result
