import json

import pytest

from netconv.cli import build_parser, main
from netconv.ingest import read_corpus, write_pcap
from netconv.model import load_checkpoint
from netconv.runconfig import ConfigError, RunConfig

from frames import two_flow_capture

TINY = ["--d-model", "8", "--layers", "2", "--kernel-size", "3"]


def _err_lines(capsys):
    return [ln for ln in capsys.readouterr().err.splitlines() if ln.strip()]


@pytest.fixture()
def labeled(tmp_path):
    path = tmp_path / "c.bin"
    assert main(["synth", "--classes", "2", "--per-class", "12", "--seed", "7", "--out", str(path)]) == 0
    return path


def _subparsers():
    parser = build_parser()
    action = next(a for a in parser._actions if a.dest == "command")
    return action.choices


def test_every_subcommand_present():
    assert set(_subparsers()) >= {"ingest", "synth", "pretrain", "finetune", "eval", "fewshot", "scalability",
                                  "bench"}


@pytest.mark.parametrize("name", sorted(_subparsers()))
def test_help_lists_every_flag(name, capsys):
    sub = _subparsers()[name]
    with pytest.raises(SystemExit) as exc:
        main([name, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text, flag


def test_unknown_flag_fails_with_one_line(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--out", "x.bin", "--bogus", "1"])
    assert exc.value.code == 2
    lines = _err_lines(capsys)
    assert len(lines) == 1 and lines[0].startswith("netconv: error:") and "--bogus" in lines[0]


def test_synth_then_pretrain(tmp_path, labeled):
    ck = tmp_path / "p.ckpt"
    rc = main(["pretrain", "--corpus", str(labeled), "--out", str(ck), "--steps", "4", "--batch-size", "2",
               "--log-interval", "2", "--seed", "7", *TINY])
    assert rc == 0
    assert load_checkpoint(ck).meta["step"] == 4
    assert (tmp_path / "p.ckpt.log.csv").read_text().count("\n") == 3
    resolved = json.loads((tmp_path / "p.ckpt.config.json").read_text())
    assert resolved["pretrain"]["steps"] == 4 and resolved["pretrain"]["seed"] == 7
    assert resolved["model"]["d_model"] == 8


def test_eval_on_unlabeled_corpus(tmp_path, labeled, capsys):
    ft = tmp_path / "ft.ckpt"
    assert main(["finetune", "--corpus", str(labeled), "--out", str(ft), "--epochs", "1", *TINY]) == 0
    unl = tmp_path / "u.bin"
    assert main(["synth", "--classes", "2", "--per-class", "3", "--unlabeled", "--out", str(unl)]) == 0
    assert not read_corpus(unl).labeled
    capsys.readouterr()
    rc = main(["eval", "--checkpoint", str(ft), "--corpus", str(unl), "--report", str(tmp_path / "r.json")])
    assert rc != 0
    assert _err_lines(capsys) == ["netconv: error: corpus is unlabeled"]


def test_missing_input_is_one_line_error(tmp_path, capsys):
    rc = main(["eval", "--checkpoint", str(tmp_path / "nope.ckpt"), "--corpus", str(tmp_path / "nope.bin"),
               "--report", str(tmp_path / "r.json")])
    assert rc == 1
    lines = _err_lines(capsys)
    assert len(lines) == 1 and lines[0].startswith("netconv: error:")


def test_config_file_then_flag_override(tmp_path, labeled):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"seed": 3, "pretrain": {"steps": 6, "batch_size": 2, "log_interval": 3},
                               "model": {"d_model": 8, "num_layers": 1}}))
    out = tmp_path / "p.ckpt"
    assert main(["pretrain", "--config", str(cfg), "--corpus", str(labeled), "--out", str(out),
                 "--steps", "3"]) == 0
    resolved = json.loads((tmp_path / "p.ckpt.config.json").read_text())
    assert resolved["pretrain"]["steps"] == 3 and resolved["seed"] == 3 and resolved["model"]["num_layers"] == 1


def test_bad_config_rejected(tmp_path, labeled, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"pretrain": {"stepz": 6}}))
    rc = main(["pretrain", "--config", str(cfg), "--corpus", str(labeled), "--out", str(tmp_path / "p.ckpt")])
    assert rc == 1 and "stepz" in _err_lines(capsys)[0]
    with pytest.raises(ConfigError):
        RunConfig.resolve({"nonsense": {}})


def _pipeline(d, seed="7"):
    d.mkdir()
    c = d / "c.bin"
    assert main(["synth", "--classes", "2", "--per-class", "10", "--seed", seed, "--out", str(c)]) == 0
    p = d / "p.ckpt"
    assert main(["pretrain", "--corpus", str(c), "--out", str(p), "--steps", "3", "--batch-size", "2",
                 "--log-interval", "1", "--seed", seed, *TINY]) == 0
    f = d / "f.ckpt"
    assert main(["finetune", "--corpus", str(c), "--checkpoint", str(p), "--out", str(f), "--epochs", "1",
                 "--seed", seed]) == 0
    assert main(["eval", "--checkpoint", str(f), "--corpus", str(c), "--report", str(d / "e.json"),
                 "--seed", seed]) == 0
    return d


def test_seeded_pipeline_is_byte_identical(tmp_path):
    a, b = _pipeline(tmp_path / "a"), _pipeline(tmp_path / "b")
    for name in ("c.bin", "p.ckpt", "f.ckpt", "f.ckpt.report.json", "f.ckpt.history.csv", "e.json",
                 "p.ckpt.config.json", "f.ckpt.config.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_ingest_fixture(tmp_path):
    pcap = tmp_path / "two.pcap"
    write_pcap(pcap, two_flow_capture())
    out = tmp_path / "c.bin"
    assert main(["ingest", str(pcap), "--labels", "1", "--out", str(out), "--threads", "2"]) == 0
    c = read_corpus(out)
    assert len(c) == 2 and c.tokens_per_record == 320 and c.labels.tolist() == [1, 1]


def test_sweeps_and_bench(tmp_path, labeled):
    p = tmp_path / "p.ckpt"
    assert main(["pretrain", "--corpus", str(labeled), "--out", str(p), "--steps", "2", "--batch-size", "2",
                 "--log-interval", "1", *TINY]) == 0
    fs = tmp_path / "fs.csv"
    assert main(["fewshot", "--corpus", str(labeled), "--checkpoint", str(p), "--out", str(fs),
                 "--shots", "2", "4", "--epochs", "1"]) == 0
    assert fs.read_text().splitlines()[0] == "shots,train_records,macro_f1"
    sc = tmp_path / "sc.csv"
    assert main(["scalability", "--checkpoint", str(p), "--out", str(sc), "--lengths", "8", "16",
                 "--classes", "2", "--per-class", "6", "--epochs", "1"]) == 0
    assert len(sc.read_text().splitlines()) == 3
    b = tmp_path / "scal"
    assert main(["bench", "scaling", "--out", str(b), "--lengths", "16", "32", "64", "128",
                 "--bench-d-model", "4", "--repeats", "1"]) == 0
    assert set(json.loads((tmp_path / "scal.json").read_text())["fits"]) == {"netconv_layer", "attention_layer"}
    t = tmp_path / "thr"
    assert main(["bench", "throughput", "--out", str(t), "--checkpoint", str(p), "--corpus", str(labeled),
                 "--batch-sizes", "1", "4", "--iters", "2", "--warmup", "0"]) == 0
    assert (tmp_path / "thr.csv").read_text().count("\n") == 3


def test_ablate_subset(tmp_path, labeled):
    out = tmp_path / "ab.csv"
    assert main(["ablate", "--corpus", str(labeled), "--out", str(out), "--variants", "full", "no_pretrain",
                 "--steps", "2", "--batch-size", "2", "--epochs", "1", *TINY]) == 0
    rows = out.read_text().splitlines()
    assert rows[0].startswith("variant,") and [r.split(",")[0] for r in rows[1:]] == ["full", "no_pretrain"]


def test_bench_throughput_needs_inputs(tmp_path, capsys):
    assert main(["bench", "throughput", "--out", str(tmp_path / "t")]) == 1
    assert "needs --checkpoint" in _err_lines(capsys)[0]
