"""Command-line entry point: ``netconv <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path

from threadpoolctl import threadpool_limits

from netconv import __version__
from netconv.bench import measure_throughput, scaling_curve
from netconv.finetune import (
    ABLATION_HEADER,
    ABLATIONS,
    FEWSHOT_HEADER,
    SCALABILITY_HEADER,
    ablation_row,
    evaluate,
    few_shot_sweep,
    finetune,
    run_ablation,
    scalability_run,
    synthetic_length_corpora,
    write_rows_csv,
)
from netconv.ingest import ingest_captures, read_corpus, synthesize_corpus, write_corpus
from netconv.model import init_model
from netconv.pretrain import run_pretraining
from netconv.runconfig import RunConfig, load_config_file

log = logging.getLogger("netconv")

SUPPRESS = argparse.SUPPRESS


class CliError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"netconv: error: {message}\n")
        raise SystemExit(2)


def _opt(p, flag, dest, help, **kw):
    p.add_argument(flag, dest=dest, default=SUPPRESS, help=help, **kw)


def _common(p):
    p.add_argument("--config", default=None, help="JSON run config; flags override its values")
    _opt(p, "--seed", "seed", "single seed for all randomness (default 0)", type=int)
    _opt(p, "--threads", "threads", "worker/BLAS thread budget", type=int)


def _model_flags(p):
    _opt(p, "--d-model", "model.d_model", "hidden width", type=int)
    _opt(p, "--layers", "model.num_layers", "number of traffic convolution layers", type=int)
    _opt(p, "--kernel-size", "model.kernel_size", "convolution window size", type=int)
    _opt(p, "--gate-mode", "model.gate_mode", "gating variant", choices=["sbg", "relu", "gelu", "none"])
    _opt(p, "--no-wbs", "model.use_wbs", "use raw kernel weights instead of softmax scores", action="store_false")
    _opt(p, "--no-residual", "model.use_residual", "disable residual connections", action="store_false")
    _opt(p, "--no-layer-norm", "model.use_layer_norm", "disable layer normalization", action="store_false")
    _opt(p, "--no-pointwise", "model.use_pointwise", "disable the pointwise output projection",
         action="store_false")
    _opt(p, "--head-hidden", "model.head_hidden", "classifier hidden width", type=int)


def _pretrain_flags(p):
    _opt(p, "--steps", "pretrain.steps", "training steps", type=int)
    _opt(p, "--lr", "pretrain.lr", "peak learning rate", type=float)
    _opt(p, "--batch-size", "pretrain.batch_size", "records per step", type=int)
    _opt(p, "--masking", "pretrain.masking", "masking scheme", choices=["span", "random"])
    _opt(p, "--mask-rate", "pretrain.mask_rate", "fraction of non-PAD tokens masked", type=float)
    _opt(p, "--geometric-p", "pretrain.geometric_p", "span length distribution parameter", type=float)
    _opt(p, "--max-span", "pretrain.max_span", "longest span in tokens", type=int)
    _opt(p, "--warmup-fraction", "pretrain.warmup_fraction", "share of steps spent warming up", type=float)
    _opt(p, "--log-interval", "pretrain.log_interval", "steps per log row", type=int)
    _opt(p, "--checkpoint-interval", "pretrain.checkpoint_interval", "steps between checkpoints (0: final only)",
         type=int)


def _finetune_flags(p, prefix=""):
    _opt(p, "--epochs", "finetune.epochs", "fine-tuning epochs", type=int)
    _opt(p, f"--{prefix}lr", "finetune.lr", "fine-tuning learning rate", type=float)
    _opt(p, f"--{prefix}batch-size", "finetune.batch_size", "fine-tuning batch size", type=int)
    _opt(p, "--num-classes", "finetune.num_classes", "number of classes (default: from labels)", type=int)
    _opt(p, "--pool-mode", "finetune.pool_mode", "sequence pooling", choices=["max", "mean"])
    _opt(p, "--freeze-encoder", "finetune.freeze_encoder", "train only the classification head",
         action="store_true")
    _opt(p, "--raw-head-input", "finetune.standardize_head", "feed pooled features to the head without "
         "train-split standardization", action="store_false")
    _opt(p, "--train-fraction", "finetune.train_fraction", "train split share", type=float)
    _opt(p, "--val-fraction", "finetune.val_fraction", "validation split share", type=float)
    _opt(p, "--test-fraction", "finetune.test_fraction", "test split share", type=float)


def _synth_flags(p):
    _opt(p, "--classes", "synth.num_classes", "number of classes", type=int)
    _opt(p, "--per-class", "synth.per_class", "records per class", type=int)
    _opt(p, "--packets-per-flow", "synth.packets_per_flow", "packets per record", type=int)
    _opt(p, "--tokens-per-packet", "synth.tokens_per_packet", "tokens per packet", type=int)
    _opt(p, "--field-offset", "synth.field_offset", "token offset of the class field", type=int)
    _opt(p, "--field-len", "synth.field_len", "class field length in tokens", type=int)
    _opt(p, "--variants", "synth.variants_per_class", "field variants per class", type=int)
    _opt(p, "--short-flow-fraction", "synth.short_flow_fraction", "share of flows cut short", type=float)
    _opt(p, "--generate-width", "synth.generate_width", "draw content at this width, then crop", type=int)
    _opt(p, "--template-seed", "synth.template_seed", "seed for class templates (default: --seed)", type=int)


def build_parser() -> Parser:
    parser = Parser(prog="netconv", description="Traffic representation learning with convolutional encoders.")
    parser.add_argument("--version", action="version", version=f"netconv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("ingest", help="captures -> token corpus")
    _common(p)
    p.add_argument("inputs", nargs="+", help="pcap/pcapng files")
    p.add_argument("--labels", type=int, nargs="+", help="one class id per input file")
    p.add_argument("--out", required=True, help="corpus file to write")
    _opt(p, "--idle-timeout", "ingest.idle_timeout", "flow idle timeout in seconds", type=float)
    _opt(p, "--ingest-packets", "ingest.packets_per_flow", "packets kept per flow", type=int)
    _opt(p, "--bytes-per-packet", "ingest.bytes_per_packet", "bytes kept per packet", type=int)

    p = sub.add_parser("synth", help="write a synthetic corpus")
    _common(p)
    p.add_argument("--out", required=True, help="corpus file to write")
    _synth_flags(p)
    _opt(p, "--unlabeled", "synth.labeled", "omit labels", action="store_false")

    p = sub.add_parser("pretrain", help="masked byte prediction pre-training")
    _common(p)
    p.add_argument("--corpus", required=True, help="corpus file")
    p.add_argument("--out", required=True, help="final checkpoint path")
    p.add_argument("--log", default=None, help="training log CSV (default: <out>.log.csv)")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    _model_flags(p)
    _pretrain_flags(p)

    p = sub.add_parser("finetune", help="fine-tune a classifier")
    _common(p)
    p.add_argument("--corpus", required=True, help="labeled corpus file")
    p.add_argument("--checkpoint", default=None, help="pre-trained checkpoint (default: random init)")
    p.add_argument("--out", required=True, help="fine-tuned checkpoint path")
    p.add_argument("--report", default=None, help="test-split report JSON (default: <out>.report.json)")
    _model_flags(p)
    _finetune_flags(p)

    p = sub.add_parser("eval", help="evaluate a fine-tuned checkpoint")
    _common(p)
    p.add_argument("--checkpoint", required=True, help="fine-tuned checkpoint")
    p.add_argument("--corpus", required=True, help="labeled corpus file")
    p.add_argument("--report", required=True, help="report JSON to write")

    p = sub.add_parser("fewshot", help="few-shot sweep over shot counts")
    _common(p)
    p.add_argument("--corpus", required=True, help="labeled corpus file")
    p.add_argument("--checkpoint", required=True, help="pre-trained checkpoint")
    p.add_argument("--out", required=True, help="CSV of (shots, train_records, macro_f1)")
    _opt(p, "--shots", "sweep.shots", "records per class to keep", type=int, nargs="+")
    _finetune_flags(p)

    p = sub.add_parser("scalability", help="fine-tune at several packet widths")
    _common(p)
    p.add_argument("--checkpoint", required=True, help="pre-trained checkpoint")
    p.add_argument("--out", required=True, help="CSV of (tokens_per_packet, tokens_per_record, macro_f1, params)")
    p.add_argument("--corpus", action="append", default=None, metavar="TOKENS=PATH",
                   help="corpus for one width (repeatable); default: synthesize every width")
    _opt(p, "--lengths", "sweep.lengths", "tokens per packet to evaluate", type=int, nargs="+")
    _synth_flags(p)
    _finetune_flags(p)

    p = sub.add_parser("ablate", help="pre-train and fine-tune architecture/objective variants")
    _common(p)
    p.add_argument("--corpus", required=True, help="labeled corpus file")
    p.add_argument("--out", required=True, help="CSV with one row per variant")
    _opt(p, "--variants", "sweep.variants", "variants to run (default: all)", nargs="+", choices=sorted(ABLATIONS))
    _model_flags(p)
    _pretrain_flags(p)
    _finetune_flags(p, prefix="ft-")

    p = sub.add_parser("bench", help="throughput or complexity-scaling measurements")
    _common(p)
    p.add_argument("kind", choices=["throughput", "scaling"])
    p.add_argument("--out", required=True, help="output prefix; writes <out>.csv and <out>.json")
    p.add_argument("--checkpoint", default=None, help="model for throughput")
    p.add_argument("--corpus", default=None, help="corpus for throughput")
    _opt(p, "--batch-sizes", "bench.batch_sizes", "throughput batch sizes", type=int, nargs="+")
    _opt(p, "--warmup", "bench.warmup", "untimed warmup batches", type=int)
    _opt(p, "--iters", "bench.iters", "timed batches", type=int)
    _opt(p, "--lengths", "bench.lengths", "scaling sequence lengths", type=int, nargs="+")
    _opt(p, "--bench-d-model", "bench.d_model", "scaling layer width", type=int)
    _opt(p, "--repeats", "bench.repeats", "timing repeats per length", type=int)
    return parser


def _write_text(path, text: str):
    Path(path).write_text(text)


def _labeled(path):
    corpus = read_corpus(path)
    if not corpus.labeled:
        raise CliError("corpus is unlabeled")
    return corpus


def _with_config(run: RunConfig, out) -> None:
    _write_text(f"{out}.config.json", run.to_json())


def cmd_ingest(args, run: RunConfig):
    opts = replace(run.ingest, threads=run.threads or os.cpu_count() or 1)
    corpus, stats = ingest_captures(args.inputs, args.labels, opts)
    write_corpus(corpus, args.out)
    log.info("wrote %d records (%d truncated packet records skipped)", len(corpus), stats.truncated_records)


def cmd_synth(args, run: RunConfig):
    corpus = synthesize_corpus(run.synth.spec(), seed=run.seed)
    if not run.synth.labeled:
        corpus = type(corpus)(corpus.tokens)
    write_corpus(corpus, args.out)


def cmd_pretrain(args, run: RunConfig):
    log_path = args.log or f"{args.out}.log.csv"
    run_pretraining(run.pretrain, args.corpus, args.out, model_config=run.model, log_path=log_path,
                    resume_from=args.resume)


def cmd_finetune(args, run: RunConfig):
    corpus = _labeled(args.corpus)
    model = args.checkpoint if args.checkpoint else init_model(run.model, seed=run.seed)
    res = finetune(model, corpus, run.finetune, out_path=args.out)
    _write_text(args.report or f"{args.out}.report.json", res.report.to_json())
    write_rows_csv(f"{args.out}.history.csv", ["epoch", "train_loss", "val_macro_f1"],
                   [[h.epoch, h.train_loss, h.val_macro_f1] for h in res.history])


def cmd_eval(args, run: RunConfig):
    report = evaluate(args.checkpoint, _labeled(args.corpus), batch_size=run.finetune.eval_batch_size)
    _write_text(args.report, report.to_json())


def cmd_fewshot(args, run: RunConfig):
    rows = few_shot_sweep(args.checkpoint, _labeled(args.corpus), run.sweep.shots, run.finetune)
    write_rows_csv(args.out, FEWSHOT_HEADER, [r.as_row() for r in rows])


def _parse_length_corpora(items) -> dict:
    out = {}
    for item in items:
        width, sep, path = item.partition("=")
        if not sep or not width.isdigit():
            raise CliError(f"--corpus expects TOKENS=PATH, got {item!r}")
        out[int(width)] = _labeled(path)
    return out


def cmd_scalability(args, run: RunConfig):
    if args.corpus:
        corpora = _parse_length_corpora(args.corpus)
    else:
        corpora = synthetic_length_corpora(run.synth.spec(), run.sweep.lengths, seed=run.seed)
    rows = scalability_run(args.checkpoint, corpora, run.finetune)
    write_rows_csv(args.out, SCALABILITY_HEADER, [r.as_row() for r in rows])


def cmd_ablate(args, run: RunConfig):
    corpus = _labeled(args.corpus)
    names = run.sweep.variants or list(ABLATIONS)
    rows = [ablation_row(run_ablation(n, corpus, run.model, run.pretrain, run.finetune)) for n in names]
    write_rows_csv(args.out, ABLATION_HEADER, rows)


def cmd_bench(args, run: RunConfig):
    threads = run.threads or 1
    b = run.bench
    if args.kind == "throughput":
        if not args.checkpoint or not args.corpus:
            raise CliError("bench throughput needs --checkpoint and --corpus")
        report = measure_throughput(args.checkpoint, args.corpus, b.batch_sizes, b.warmup, b.iters, threads)
    else:
        report = scaling_curve(lengths=b.lengths, d_model=b.d_model, repeats=b.repeats, seed=run.seed,
                               threads=threads)
    _write_text(f"{args.out}.csv", report.to_csv())
    _write_text(f"{args.out}.json", report.to_json())


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "eval": cmd_eval,
    "fewshot": cmd_fewshot,
    "scalability": cmd_scalability,
    "ablate": cmd_ablate,
    "bench": cmd_bench,
}


def _primary_output(args) -> str:
    return getattr(args, "out", None) or getattr(args, "report", None)


def _setup_logging():
    level = os.environ.get("NETCONV_LOG", "WARNING").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if "." in k or k in ("seed", "threads")}
    try:
        file_values = load_config_file(args.config) if args.config else {}
        run = RunConfig.resolve(file_values, overrides)
        # benchmarks pin their own thread count; everything else gets the global budget
        limit = threadpool_limits(limits=run.threads) if run.threads and args.command != "bench" else nullcontext()
        with limit:
            COMMANDS[args.command](args, run)
        _with_config(run, _primary_output(args))
    except (CliError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        sys.stderr.write(f"netconv: error: {msg}\n".replace("\n", " ").rstrip() + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
