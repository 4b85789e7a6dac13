"""Inference throughput at several batch sizes."""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from netconv.bench.timing import percentile_ms
from netconv.ingest.corpus import Corpus, read_corpus
from netconv.model import ParameterStore, classify, encode, load_checkpoint, pool
from netconv.tensor import no_grad

BASELINE_LIMIT = 0.05


@dataclass
class ThroughputRow:
    batch_size: int
    samples_per_s: float
    p50_ms: float
    p95_ms: float
    baseline_ms: float
    reliable: bool


@dataclass
class ThroughputReport:
    rows: list = field(default_factory=list)
    threads: int = 1
    precision: str = "float32"
    iters: int = 0
    warmup: int = 0

    def row(self, batch_size: int) -> ThroughputRow:
        return next(r for r in self.rows if r.batch_size == batch_size)

    def to_dict(self) -> dict:
        return {"threads": self.threads, "precision": self.precision, "iters": self.iters,
                "warmup": self.warmup, "rows": [asdict(r) for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        lines = ["batch_size,samples_per_s,p50_ms,p95_ms,baseline_ms,reliable"]
        for r in self.rows:
            lines.append(f"{r.batch_size},{r.samples_per_s:.3f},{r.p50_ms:.4f},{r.p95_ms:.4f},"
                         f"{r.baseline_ms:.4f},{int(r.reliable)}")
        return "\n".join(lines) + "\n"


def batch_ids(num_records: int, batch_size: int, index: int) -> np.ndarray:
    """Deterministic batch: consecutive records starting at ``index * batch_size``, wrapping around."""
    return (index * batch_size + np.arange(batch_size)) % num_records


def _forward(store: ParameterStore, tokens: np.ndarray):
    hidden, mask = encode(store, tokens)
    if store.num_classes is not None:
        return classify(store, hidden, mask)
    return pool(store, hidden, mask)


def _timed(fn, n: int) -> list:
    out = []
    for _ in range(n):
        t0 = time.perf_counter_ns()
        fn()
        out.append(time.perf_counter_ns() - t0)
    return out


def measure_throughput(model, corpus, batch_sizes=(1, 32, 1024), warmup: int = 2, iters: int = 10,
                       threads: int = 1) -> ThroughputReport:
    """Time inference-only forward passes; warmup batches are run but not recorded.

    Each row is compared with an empty baseline that assembles the same batch
    but skips the model; rows whose baseline exceeds 5% of their fastest
    measured call are flagged unreliable.
    """
    store = model if isinstance(model, ParameterStore) else load_checkpoint(model).store
    if not isinstance(corpus, Corpus):
        corpus = read_corpus(corpus)
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    tokens = corpus.tokens
    report = ThroughputReport(threads=threads, precision=str(store["embed"].dtype), iters=iters, warmup=warmup)
    with threadpool_limits(limits=threads), no_grad():
        for b in batch_sizes:
            counter = itertools.count()

            def run():
                _forward(store, tokens[batch_ids(len(tokens), b, next(counter))])

            def empty():
                tokens[batch_ids(len(tokens), b, next(counter))]

            _timed(run, warmup)
            samples = _timed(run, iters)
            baseline = _timed(empty, iters)
            total_s = sum(samples) / 1e9
            base_ms = percentile_ms(baseline, 50)
            report.rows.append(ThroughputRow(
                batch_size=b,
                samples_per_s=b * iters / total_s,
                p50_ms=percentile_ms(samples, 50),
                p95_ms=percentile_ms(samples, 95),
                baseline_ms=base_ms,
                reliable=base_ms < BASELINE_LIMIT * min(samples) / 1e6,
            ))
    return report
