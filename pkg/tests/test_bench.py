import json

import numpy as np
import pytest

from netconv.bench import (
    attention_oracle,
    batch_ids,
    fit_power_law,
    init_attention,
    layer_fn,
    mean_forward_time,
    measure_throughput,
    reference_attention_forward,
    scaling_curve,
)
from netconv.bench.timing import calibrate_calls
from netconv.ingest import SynthSpec, synthesize_corpus
from netconv.model import ModelConfig, attach_classifier, init_model

TINY = ModelConfig(d_model=8, num_layers=2, kernel_size=3)


@pytest.fixture(scope="module")
def corpus():
    return synthesize_corpus(SynthSpec(num_classes=2, per_class=32), seed=0)


# reference attention


def test_attention_matches_two_loop_oracle():
    rng = np.random.default_rng(0)
    for i in range(100):
        n, d = int(rng.integers(1, 9)), int(rng.integers(1, 7))
        params = init_attention(d, seed=i, dtype=np.float64)
        x = rng.standard_normal((n, d))
        np.testing.assert_allclose(reference_attention_forward(x, params), attention_oracle(x, params),
                                   atol=1e-6, rtol=0)


def test_attention_single_token_is_value_path():
    params = init_attention(4, seed=1, dtype=np.float64)
    x = np.random.default_rng(1).standard_normal((1, 4))
    np.testing.assert_allclose(reference_attention_forward(x, params), x @ params.wv @ params.wo, atol=1e-12)


def test_attention_zeroed_queries_average_values():
    params = init_attention(4, seed=2, dtype=np.float64)
    params.wq[:] = 0.0
    x = np.random.default_rng(2).standard_normal((6, 4))
    want = np.tile((x @ params.wv).mean(axis=0) @ params.wo, (6, 1))
    np.testing.assert_allclose(reference_attention_forward(x, params), want, atol=1e-12)


# throughput


def test_batch_ids_wrap_deterministically():
    assert batch_ids(5, 3, 0).tolist() == [0, 1, 2]
    assert batch_ids(5, 3, 1).tolist() == [3, 4, 0]


def test_throughput_report_rows(corpus):
    store = init_model(TINY, seed=0)
    rep = measure_throughput(store, corpus, batch_sizes=(1, 32), warmup=1, iters=5)
    assert [r.batch_size for r in rep.rows] == [1, 32]
    assert all(r.samples_per_s > 0 and r.p95_ms >= r.p50_ms for r in rep.rows)
    assert rep.threads == 1 and rep.precision == "float32"
    assert rep.row(32).samples_per_s >= rep.row(1).samples_per_s
    assert json.loads(rep.to_json())["rows"][0]["batch_size"] == 1
    assert rep.to_csv().count("\n") == 3


def test_throughput_with_classifier_head(corpus):
    store = attach_classifier(init_model(TINY, seed=0), 2, seed=0)
    rep = measure_throughput(store, corpus, batch_sizes=(4,), warmup=0, iters=2)
    assert rep.rows[0].batch_size == 4


def test_throughput_runs_agree(corpus):
    store = init_model(TINY, seed=0)
    a = measure_throughput(store, corpus, batch_sizes=(32,), warmup=2, iters=20).row(32).samples_per_s
    b = measure_throughput(store, corpus, batch_sizes=(32,), warmup=2, iters=20).row(32).samples_per_s
    assert abs(a - b) / max(a, b) <= 0.25


def test_throughput_rejects_empty_corpus(corpus):
    with pytest.raises(ValueError):
        measure_throughput(init_model(TINY, seed=0), corpus[:0])


# scaling


def test_power_law_fit_recovers_exponent():
    n = np.array([256, 512, 1024, 2048])
    fit = fit_power_law(n, 3e-6 * n ** 1.7)
    assert fit.b == pytest.approx(1.7) and fit.a == pytest.approx(3e-6) and fit.r2 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_power_law(n[:3], n[:3])


def test_calibration_grows_calls_for_fast_functions():
    assert calibrate_calls(lambda: None, min_ns=1_000_000) > 1


def test_scaling_curve_structure():
    rep = scaling_curve(lengths=[32, 64, 128, 256], d_model=8, repeats=1, min_ns=100_000)
    assert set(rep.fits) == {"netconv_layer", "attention_layer"}
    assert len(rep.rows) == 8 and all(r.mean_s > 0 and r.calls >= 1 for r in rep.rows)
    assert rep.to_csv().startswith("variant,length,mean_s,calls\n")
    assert json.loads(rep.to_json())["d_model"] == 8


def test_scaling_curve_validates_lengths():
    with pytest.raises(ValueError):
        scaling_curve(lengths=[64, 32, 128, 256])
    with pytest.raises(ValueError):
        scaling_curve(lengths=[32, 64, 128])
    with pytest.raises(ValueError):
        layer_fn("lstm", 8, 16)


def test_doubling_width_roughly_doubles_netconv_time():
    t32, _ = mean_forward_time(layer_fn("netconv_layer", 32, 4096), repeats=5)
    t64, _ = mean_forward_time(layer_fn("netconv_layer", 64, 4096), repeats=5)
    assert 1.4 <= t64 / t32 <= 3.0
