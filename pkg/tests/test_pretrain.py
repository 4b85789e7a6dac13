import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from netconv.ingest import SynthSpec, synthesize_corpus
from netconv.model import ModelConfig, encode, init_model, load_checkpoint, mlm_logits
from netconv.pretrain import (
    LOG_HEADER,
    Adam,
    MaskPlan,
    PretrainConfig,
    TrainingError,
    apply_mask,
    batch_records,
    expected_span_length,
    make_batch,
    maximal_runs,
    pretrain_step,
    run_pretraining,
    sample_mask_plan,
    unmask,
    warmup_lr,
)
from netconv.tensor import Tensor
from netconv.vocab import MASK_ID, PAD_ID, VOCAB_SIZE

CFG = PretrainConfig()
SMALL = ModelConfig(d_model=8, num_layers=2, kernel_size=3)


def _tokens(n=320, pad_tail=0, seed=0):
    t = np.random.default_rng(seed).integers(0, 65536, n).astype(np.uint32)
    if pad_tail:
        t[-pad_tail:] = PAD_ID
    return t


@pytest.fixture(scope="module")
def corpus():
    return synthesize_corpus(SynthSpec(num_classes=2, per_class=16), seed=3)


# masking


def test_mean_masked_count_near_budget():
    seq = _tokens()
    rng = np.random.default_rng(0)
    counts = [sample_mask_plan(seq, CFG, rng).masked_positions.size for _ in range(10_000)]
    assert abs(np.mean(counts) - 48) <= 2


def test_span_lengths_follow_clipped_geometric():
    seq = _tokens()
    rng = np.random.default_rng(1)
    lengths = []
    while len(lengths) < 20_000:
        lengths += [e - s + 1 for s, e in sample_mask_plan(seq, CFG, rng).spans]
    observed = np.bincount(lengths, minlength=11)[1:11]
    p = CFG.geometric_p
    probs = np.array([p * (1 - p) ** (k - 1) for k in range(1, 10)] + [(1 - p) ** 9])
    assert stats.chisquare(observed, probs * observed.sum()).pvalue > 0.01


def test_expected_span_length_closed_form():
    rng = np.random.default_rng(2)
    draws = np.minimum(rng.geometric(0.2, 200_000), 10)
    assert expected_span_length(0.2, 10) == pytest.approx(draws.mean(), rel=0.01)
    assert expected_span_length(1.0, 10) == 1.0


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 400), pad=st.integers(0, 399), seed=st.integers(0, 2**31))
def test_plan_invariants(n, pad, seed):
    pad = min(pad, n - 1)
    seq = _tokens(n, pad, seed)
    plan = sample_mask_plan(seq, CFG, np.random.default_rng(seed))
    pos = plan.masked_positions
    assert pos.size >= 1
    assert maximal_runs(pos) == plan.spans
    assert (seq[pos] != PAD_ID).all()
    assert all(e - s + 1 <= CFG.max_span for s, e in plan.spans)
    assert all(b[0] > a[1] + 1 for a, b in zip(plan.spans, plan.spans[1:]))


def test_masked_fraction_within_band_for_full_records():
    rng = np.random.default_rng(4)
    for seed in range(200):
        seq = _tokens(320, int(rng.integers(0, 200)), seed)
        n_valid = int((seq != PAD_ID).sum())
        k = sample_mask_plan(seq, CFG, rng).masked_positions.size
        assert 0.5 * CFG.mask_rate * n_valid <= k <= 1.5 * CFG.mask_rate * n_valid


def test_single_valid_token_is_masked():
    seq = np.full(10, PAD_ID, dtype=np.uint32)
    seq[4] = 17
    plan = sample_mask_plan(seq, CFG, np.random.default_rng(0))
    assert plan.spans == [(4, 4)]


def test_all_pad_rejected():
    with pytest.raises(ValueError):
        sample_mask_plan(np.full(8, PAD_ID), CFG, np.random.default_rng(0))


def test_sampling_deterministic_given_rng():
    seq = _tokens()
    a = sample_mask_plan(seq, CFG, np.random.default_rng(9))
    b = sample_mask_plan(seq, CFG, np.random.default_rng(9))
    assert a == b


def test_random_masking_mode():
    cfg = PretrainConfig(masking="random")
    seq = _tokens(320, 20)
    plan = sample_mask_plan(seq, cfg, np.random.default_rng(0))
    assert plan.masked_positions.size == 45
    assert (seq[plan.masked_positions] != PAD_ID).all()


def test_apply_mask_empty_plan_is_identity():
    seq = _tokens(20)
    out, targets = apply_mask(seq, MaskPlan(20))
    assert np.array_equal(out, seq) and targets.size == 0


def test_apply_mask_span():
    seq = _tokens(20)
    out, targets = apply_mask(seq, MaskPlan(20, [(3, 5)]))
    assert np.nonzero(out == MASK_ID)[0].tolist() == [3, 4, 5]
    assert np.array_equal(targets, seq[3:6])
    assert np.array_equal(np.delete(out, [3, 4, 5]), np.delete(seq, [3, 4, 5]))


def test_unmask_round_trip():
    seq = _tokens(64)
    plan = sample_mask_plan(seq, CFG, np.random.default_rng(5))
    out, targets = apply_mask(seq, plan)
    assert MASK_ID not in targets
    assert np.array_equal(unmask(out, plan, targets), seq)


def test_apply_mask_length_mismatch():
    with pytest.raises(ValueError):
        apply_mask(_tokens(10), MaskPlan(11, [(0, 0)]))


def test_config_validation():
    for bad in ({"mask_rate": 0}, {"mask_rate": 1}, {"geometric_p": 0}, {"geometric_p": 1.5}, {"masking": "x"}):
        with pytest.raises(ValueError):
            PretrainConfig(**bad)
    with pytest.raises(ValueError):
        PretrainConfig.from_dict({"nope": 1})


# optimizer


def test_warmup_schedule():
    assert warmup_lr(1e-3, 0, 1000, 0.01) == pytest.approx(1e-4)
    assert warmup_lr(1e-3, 9, 1000, 0.01) == pytest.approx(1e-3)
    assert warmup_lr(1e-3, 500, 1000, 0.01) == pytest.approx(1e-3)
    assert warmup_lr(1e-3, 0, 10, 0.01) == pytest.approx(1e-3)


def test_adam_first_steps_match_hand_formula():
    store = init_model(SMALL, seed=0)
    name = "layer0.norm.bias"
    p0 = store[name].data.astype(np.float64).copy()
    opt = Adam(store, names=[name])
    g1 = np.linspace(-1, 1, p0.size)
    g2 = np.linspace(2, -0.5, p0.size)
    for g in (g1, g2):
        store[name].grad = g.astype(np.float32)
        opt.step(0.01)
    m = 0.9 * 0.1 * g1 + 0.1 * g2
    v = 0.999 * 0.001 * g1 ** 2 + 0.001 * g2 ** 2
    step1 = 0.01 * g1 / (np.abs(g1) + 1e-8)
    step2 = 0.01 * (m / (1 - 0.81)) / (np.sqrt(v / (1 - 0.999 ** 2)) + 1e-8)
    np.testing.assert_allclose(store[name].data, p0 - step1 - step2, atol=1e-6)


# training step


def test_initial_loss_is_log_vocab(corpus):
    store = init_model(SMALL, seed=0)
    batch = make_batch(corpus.tokens, np.arange(8), CFG, 0)
    res = pretrain_step(store, batch, Adam(store), lr=0.0)
    assert abs(res.loss_mean - math.log(VOCAB_SIZE)) < 0.1
    assert res.loss_sum == pytest.approx(res.loss_mean * batch.positions.size)


def test_loss_counts_masked_positions_only(corpus):
    store = init_model(SMALL, seed=1)
    batch = make_batch(corpus.tokens, np.arange(4), CFG, 0)
    hidden, _ = encode(store, batch.tokens)
    logits = mlm_logits(store, hidden, batch.positions, batch.batch_index).data.astype(np.float64)
    manual = -special.log_softmax(logits, axis=1)[np.arange(len(batch.targets)), batch.targets].mean()
    res = pretrain_step(store.copy(), batch, Adam(store), lr=0.0)
    assert res.loss_mean == pytest.approx(manual, rel=1e-5)
    assert MASK_ID not in batch.targets and PAD_ID not in batch.targets


def test_step_is_deterministic_and_clears_grads(corpus):
    a, b = init_model(SMALL, seed=2), init_model(SMALL, seed=2)
    batch = make_batch(corpus.tokens, batch_records(len(corpus), CFG, 0), CFG, 0)
    opt_a, opt_b = Adam(a), Adam(b)
    ra = pretrain_step(a, batch, opt_a, 1e-3)
    rb = pretrain_step(b, batch, opt_b, 1e-3)
    assert ra == rb
    assert a.bit_equal(b)
    assert all(t.grad is None for _, t in a.items())


def test_step_rejects_empty_batch(corpus):
    store = init_model(SMALL, seed=0)
    batch = make_batch(corpus.tokens, np.arange(2), CFG, 0)
    batch.positions = batch.positions[:0]
    with pytest.raises(ValueError):
        pretrain_step(store, batch, Adam(store), 1e-3)


def test_nan_loss_aborts(corpus):
    store = init_model(SMALL, seed=0)
    store["head.mlm_bias"] = Tensor(np.full(VOCAB_SIZE, np.nan, np.float32), requires_grad=True)
    batch = make_batch(corpus.tokens, np.arange(2), CFG, 0)
    with pytest.raises(TrainingError, match="non-finite"):
        pretrain_step(store, batch, Adam(store), 1e-3)


def test_batches_independent_of_batch_membership(corpus):
    # a record's mask depends only on (seed, record, step), not on its batch neighbours
    a = make_batch(corpus.tokens, [3, 5], CFG, 7)
    b = make_batch(corpus.tokens, [5, 9, 3], CFG, 7)
    assert np.array_equal(a.tokens[0], b.tokens[2]) and np.array_equal(a.tokens[1], b.tokens[0])


def test_training_reduces_loss(corpus):
    cfg = PretrainConfig(steps=200, lr=1e-3, batch_size=4, log_interval=50, seed=0)
    res = run_pretraining(cfg, corpus, model_config=SMALL)
    assert np.mean(res.step_losses[-20:]) < res.step_losses[0]


# full runs


def _run(tmp_path, corpus, steps, name, **kw):
    cfg = PretrainConfig(steps=steps, lr=1e-3, batch_size=4, log_interval=2, seed=0, **kw)
    out = tmp_path / f"{name}.ckpt"
    log = tmp_path / f"{name}.csv"
    res = run_pretraining(cfg, corpus, out, model_config=SMALL, log_path=log)
    return cfg, res, out, log


def test_log_lines_and_header(tmp_path, corpus):
    _, res, _, log = _run(tmp_path, corpus, 10, "a")
    rows = list(csv.reader(open(log)))
    assert rows[0] == LOG_HEADER
    assert len(rows) - 1 == 10 // 2 == len(res.log_rows)
    assert [int(r[0]) for r in rows[1:]] == [2, 4, 6, 8, 10]


def test_checkpoint_round_trip_config(tmp_path, corpus):
    cfg, res, out, _ = _run(tmp_path, corpus, 4, "b")
    ck = load_checkpoint(out)
    assert ck.store.config == SMALL
    assert PretrainConfig.from_dict(ck.meta["pretrain"]) == cfg
    assert ck.meta["step"] == 4
    assert ck.store.bit_equal(res.store)


def test_resume_matches_uninterrupted_run(tmp_path, corpus):
    _, full, _, _ = _run(tmp_path, corpus, 8, "full", checkpoint_interval=4)
    assert (tmp_path / "full.ckpt.step4").exists()
    cfg = PretrainConfig(steps=8, lr=1e-3, batch_size=4, log_interval=2, seed=0, checkpoint_interval=4)
    resumed = run_pretraining(cfg, corpus, tmp_path / "r.ckpt", resume_from=tmp_path / "full.ckpt.step4")
    assert resumed.step_losses == full.step_losses[4:]
    assert resumed.store.bit_equal(full.store)


def test_reruns_are_byte_identical(tmp_path, corpus):
    _run(tmp_path, corpus, 4, "x")
    _run(tmp_path, corpus, 4, "y")
    assert (tmp_path / "x.ckpt").read_bytes() == (tmp_path / "y.ckpt").read_bytes()
