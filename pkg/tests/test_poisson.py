import json

import numpy as np
import pytest

from logsdca import RawPoissonData, poisson_prepare, poisson_simulate, primal_objective
from logsdca.poisson import (
    default_reg_level,
    load_poisson_file,
    minmax_scale,
    write_poisson_csv,
)

from helpers import RIDGE


def test_prepare_zero_label_arithmetic():
    rng = np.random.default_rng(0)
    X = rng.random((4, 3))
    raw = RawPoissonData(X, np.array([0.0, 2.0, 0.0, 1.0]), lam0=0.25)
    data = poisson_prepare(raw, scale="none")
    assert data.n == 2
    assert data.lam == pytest.approx(2 * 0.25)
    np.testing.assert_allclose(data.psi, X.sum(axis=0) / 2)
    np.testing.assert_array_equal(data.labels, [2.0, 1.0])


def test_prepare_all_positive_labels():
    rng = np.random.default_rng(1)
    X = rng.random((5, 2))
    raw = RawPoissonData(X, np.array([1.0, 2.0, 1.0, 3.0, 1.0]), lam0=0.4)
    data = poisson_prepare(raw, scale="none")
    assert data.lam == pytest.approx(0.4)
    np.testing.assert_allclose(data.psi, X.mean(axis=0))


def test_prepare_minmax_sets_nonneg_gram():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((20, 4))  # signed entries
    y = rng.poisson(2.0, 20) + 1.0
    data = poisson_prepare(RawPoissonData(X, y, 0.1), scale="minmax")
    assert data.nonneg_gram
    assert data.features.min() >= 0.0
    assert data.features.max() <= 1.0


def test_prepare_rejects_all_zero_labels():
    with pytest.raises(ValueError):
        RawPoissonData(np.ones((2, 2)), np.zeros(2), 0.1)


def test_minmax_constant_column():
    X = np.array([[1.0, 5.0], [2.0, 5.0]])
    out = minmax_scale(X)
    np.testing.assert_allclose(out[:, 1], 0.0)
    np.testing.assert_allclose(out[:, 0], [0.0, 1.0])


def test_prepared_objective_matches_raw_likelihood():
    # P(w) = (n0/n) * P0(w) with P0 the raw penalized negative log-likelihood
    rng = np.random.default_rng(3)
    for k in range(20):
        n0, d = 30, 4
        X = np.abs(rng.standard_normal((n0, d))) + 0.05
        y = rng.poisson(1.5, n0).astype(float)
        if not np.any(y > 0):
            continue
        lam0 = 0.3
        raw = RawPoissonData(X, y, lam0)
        data = poisson_prepare(raw, scale="none")
        w = rng.uniform(0.1, 1.5, size=d)
        margins = X @ w
        assert margins.min() > 0
        loglik_terms = margins - np.where(y > 0, y * np.log(margins), 0.0)
        p0 = float(np.mean(loglik_terms)) + lam0 * 0.5 * float(w @ w)
        p = primal_objective(w, data, RIDGE)
        n = data.n
        assert p == pytest.approx((n0 / n) * p0, abs=1e-10)


def test_zero_label_row_only_moves_psi():
    rng = np.random.default_rng(4)
    X = rng.random((6, 3))
    y = np.array([2.0, 0.0, 1.0, 0.0, 3.0, 1.0])
    raw = RawPoissonData(X, y, 0.2)
    data = poisson_prepare(raw, scale="none")
    # drop one zero-labeled row: psi loses x_r / n, lam rescales by (n0-1)/n0
    reduced = poisson_prepare(
        RawPoissonData(np.delete(X, 1, axis=0), np.delete(y, 1), 0.2), scale="none"
    )
    n = data.n
    np.testing.assert_allclose(reduced.psi, data.psi - X[1] / n, atol=1e-15)
    assert reduced.lam == pytest.approx(data.lam * 5 / 6)
    np.testing.assert_array_equal(reduced.features, data.features)


def test_simulator_deterministic():
    raw1, w1 = poisson_simulate(50, 8, 3, seed=7)
    raw2, w2 = poisson_simulate(50, 8, 3, seed=7)
    np.testing.assert_array_equal(raw1.features, raw2.features)
    np.testing.assert_array_equal(raw1.labels, raw2.labels)
    np.testing.assert_array_equal(w1, w2)


def test_simulator_positive_weights_always_feasible():
    raw, _ = poisson_simulate(100, 6, 3, seed=8)
    w = np.full(6, 0.7)
    assert float(np.min(raw.features @ w)) > 0.0


def test_simulator_intensities_positive_with_margin():
    raw, w = poisson_simulate(200, 10, 5, seed=9)
    assert float(np.min(raw.features @ w)) > 1e-3


def test_simulator_moment_check():
    raw, w = poisson_simulate(100_000, 10, 3, seed=10)
    intensities = raw.features @ w
    mean_intensity = float(np.mean(intensities))
    se = np.sqrt(mean_intensity / raw.labels.size)
    assert abs(float(np.mean(raw.labels)) - mean_intensity) <= 3 * se


def test_simulator_respects_nnz_bound():
    with pytest.raises(ValueError):
        poisson_simulate(10, 3, 5, seed=0)


def test_default_reg_level_rule():
    X = np.array([[1.0, 0.0], [0.0, 2.0]])
    # mean row norm^2 = (1 + 4) / 2; divided by n = 2
    assert default_reg_level(X) == pytest.approx(2.5 / 2)


def test_csv_round_trip(tmp_path):
    raw, _ = poisson_simulate(20, 4, 2, seed=11)
    path = tmp_path / "data.csv"
    write_poisson_csv(path, raw.features, raw.labels)
    X, y = load_poisson_file(path)
    np.testing.assert_allclose(X, raw.features, rtol=1e-15)
    np.testing.assert_allclose(y, raw.labels)


def test_csv_header_skips_first_row(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("y,x1\n1.0,2.0\n3.0,4.0\n")
    X, y = load_poisson_file(path, header=True)
    np.testing.assert_allclose(y, [1.0, 3.0])
    np.testing.assert_allclose(X, [[2.0], [4.0]])


def test_json_dataset_loading(tmp_path):
    path = tmp_path / "data.json"
    path.write_text(json.dumps({"y": [1, 2], "X": [[0.5, 1.0], [1.5, 2.0]]}))
    X, y = load_poisson_file(path)
    np.testing.assert_allclose(y, [1.0, 2.0])
    np.testing.assert_allclose(X, [[0.5, 1.0], [1.5, 2.0]])
