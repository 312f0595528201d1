import json

import numpy as np
import pytest

import specbench as sb

CONFIG = """
[experiment]
seeds = 1, 5
modes = ID, OOD
train.max_steps = 5
train.windows_batch = 8

[dataset.sines]
kind = sinusoid
n_series = 3
length = 320
horizon = 16

[dataset.trend]
kind = trend1
n_series = 3
length = 320
horizon = 16

[model.naive]
family = NAIVE_LAST

[model.ses]
family = SES

[model.nlinear]
family = NLINEAR
"""


def test_dft_matches_numpy():
    rng = np.random.default_rng(0)
    y = rng.normal(size=64)
    np.testing.assert_allclose(sb.dft(y), np.fft.fft(y) / 64, atol=1e-12)


def test_partial_sum_recovers_sinusoid_pair():
    ds = sb.gen_sinusoid_dataset(num_series=3, composition_size=2, seed=1)
    assert len(ds["composed"]) == 3
    y = ds["composed"][0]
    assert y.shape == (1200,)
    assert len(sb.ranked_components(y)) == 2
    np.testing.assert_allclose(sb.partial_sum(y, 2, 0, 1200), y, atol=1e-9)
    np.testing.assert_allclose(sum(ds["components"][0]), y, atol=1e-9)


def test_basis_wins_for_perfect_forecast():
    y = sb.gen_sinusoid_dataset(num_series=1, seed=2)["composed"][0]
    rep = sb.basis_win_report(y[1008:], y[1008:], y, 1008)
    assert rep["k_max"] == 2 and rep["threshold_pass"]
    assert sb.mae(y, y) == 0.0


def test_adf_separates_noise_and_walk():
    rng = np.random.default_rng(3)
    noise = rng.normal(size=500)
    assert sb.adf_test(noise)["stationary"]
    assert not sb.adf_test(np.cumsum(noise))["stationary"]
    assert -1.0 <= sb.mean_acf(noise) <= 1.0


def test_statistics():
    stat, p, reject = sb.friedman([[1, 1, 1, 1], [2, 2, 2, 2], [3, 3, 3, 3]])
    assert stat == pytest.approx(8.0)
    assert p == pytest.approx(np.exp(-4.0), abs=1e-6)
    assert reject
    assert sb.wilcoxon(np.arange(1.0, 7.0), np.zeros(6)) == pytest.approx(2 / 64)
    np.testing.assert_allclose(sb.holm([0.01, 0.04, 0.03]), [0.03, 0.06, 0.06])


def test_cka_invariances():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(20, 5))
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    assert sb.linear_cka(x, x) == pytest.approx(1.0)
    assert sb.linear_cka(x, 3.0 * x @ q) == pytest.approx(1.0)


def test_errors_carry_codes():
    with pytest.raises(sb.SpecbenchError) as info:
        sb.mae(np.zeros(3), np.zeros(2))
    assert info.value.code == "ShapeMismatch"


def test_run_experiment_and_summary(tmp_path):
    runs = [json.loads(r) for r in sb.run_experiment(CONFIG, tmp_path)]
    assert len(runs) == 2 * 3 * 2 * 2
    assert all(r["status"] == "ok" for r in runs)
    again = sb.run_experiment(CONFIG, tmp_path)
    assert [json.loads(r) for r in again] == runs
    summary = json.loads(sb.summarize(tmp_path))
    assert len(summary["modes"]) == 2
