"""Few-shot, length-scalability and ablation sweeps built on :func:`finetune`."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from netconv.finetune.loop import FinetuneConfig, finetune
from netconv.finetune.metrics import EvalReport
from netconv.finetune.splits import Split, few_shot_subset, stratified_split
from netconv.ingest.corpus import Corpus
from netconv.ingest.synth import SynthSpec, synthesize_corpus
from netconv.model import ModelConfig, ParameterStore, init_model, load_checkpoint
from netconv.pretrain import PretrainConfig, run_pretraining

log = logging.getLogger(__name__)

SCALABILITY_LENGTHS = (64, 96, 128, 160, 192, 224, 256)


def write_rows_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row])


@dataclass
class ScalabilityRow:
    tokens_per_packet: int
    tokens_per_record: int
    macro_f1: float
    param_count: int

    def as_row(self):
        return [self.tokens_per_packet, self.tokens_per_record, self.macro_f1, self.param_count]


SCALABILITY_HEADER = ["tokens_per_packet", "tokens_per_record", "macro_f1", "param_count"]


def synthetic_length_corpora(spec: SynthSpec, lengths: Sequence[int], seed: int) -> dict[int, Corpus]:
    """One corpus per packet width, all cropped from the same widest draw."""
    width = max(lengths)
    return {n: synthesize_corpus(replace(spec, tokens_per_packet=n, generate_width=width), seed) for n in lengths}


def scalability_run(model, corpora: Mapping[int, Corpus], cfg: FinetuneConfig) -> list[ScalabilityRow]:
    """Fine-tune the same encoder once per packet width; report test macro F1 per width."""
    base = model if isinstance(model, ParameterStore) else load_checkpoint(model).store
    rows = []
    for n in sorted(corpora):
        corpus = corpora[n]
        res = finetune(base, corpus, cfg)
        rows.append(ScalabilityRow(n, corpus.tokens_per_record, res.report.macro_f1, res.store.param_count()))
        log.info("tokens/packet %d: macro F1 %.4f", n, res.report.macro_f1)
    return rows


@dataclass
class FewShotRow:
    shots: int
    train_records: int
    macro_f1: float

    def as_row(self):
        return [self.shots, self.train_records, self.macro_f1]


FEWSHOT_HEADER = ["shots", "train_records", "macro_f1"]


def few_shot_sweep(model, corpus: Corpus, shots: Sequence[int], cfg: FinetuneConfig) -> list[FewShotRow]:
    """Subsample only the training split per shot count; the test split stays fixed."""
    split = stratified_split(corpus.labels, cfg.fractions, cfg.seed)
    pool = corpus[split.train]
    heldout = corpus[split.test]
    rows = []
    for x in shots:
        train = few_shot_subset(pool, x, cfg.seed)
        merged = train.concat(heldout)
        n = len(train)
        split_x = Split(np.arange(n), np.zeros(0, dtype=np.int64), np.arange(n, len(merged)))
        res = finetune(model, merged, replace(cfg, num_classes=cfg.num_classes or corpus.num_classes), split=split_x)
        rows.append(FewShotRow(x, n, res.report.macro_f1))
    return rows


# name -> (model config overrides, pretrain config overrides, pretrain?)
ABLATIONS = {
    "full": ({}, {}, True),
    "no_wbs": ({"use_wbs": False}, {}, True),
    "relu_gate": ({"gate_mode": "relu"}, {}, True),
    "gelu_gate": ({"gate_mode": "gelu"}, {}, True),
    "no_gate": ({"gate_mode": "none"}, {}, True),
    "random_mask": ({}, {"masking": "random"}, True),
    "mean_pool": ({"pool_mode": "mean"}, {}, True),
    "no_pretrain": ({}, {}, False),
}


@dataclass
class AblationResult:
    name: str
    report: EvalReport
    pretrain_steps: int


def run_ablation(name: str, corpus: Corpus, model_config: ModelConfig, pretrain_cfg: PretrainConfig,
                 finetune_cfg: FinetuneConfig, pretrain_corpus: Optional[Corpus] = None) -> AblationResult:
    """Pre-train (unless disabled) and fine-tune one variant.

    Pre-training defaults to the unlabeled tokens of the fine-tuning train split,
    so test records are never seen by either stage.
    """
    if name not in ABLATIONS:
        raise ValueError(f"unknown ablation {name!r}; choose from {sorted(ABLATIONS)}")
    model_over, pre_over, do_pretrain = ABLATIONS[name]
    mcfg = replace(model_config, **model_over)
    if do_pretrain:
        if pretrain_corpus is None:
            split = stratified_split(corpus.labels, finetune_cfg.fractions, finetune_cfg.seed)
            pretrain_corpus = corpus[split.train]
        pcfg = replace(pretrain_cfg, **pre_over)
        store = run_pretraining(pcfg, pretrain_corpus, model_config=mcfg).store
        steps = pcfg.steps
    else:
        store = init_model(mcfg, seed=pretrain_cfg.seed)
        steps = 0
    res = finetune(store, corpus, finetune_cfg)
    return AblationResult(name, res.report, steps)


ABLATION_HEADER = ["variant", "pretrain_steps", "macro_precision", "macro_recall", "macro_f1"]


def ablation_row(r: AblationResult):
    return [r.name, r.pretrain_steps, r.report.macro_precision, r.report.macro_recall, r.report.macro_f1]
