import math

import numpy as np
import pytest

from logsdca import (
    ProblemData,
    SolveOptions,
    adjacency_metrics,
    fit_hawkes,
    hawkes_loglik,
    hawkes_simulate,
    hawkes_subproblems,
    hawkes_weights,
    primal_objective,
)
from logsdca.hawkes import (
    HawkesData,
    HawkesModel,
    load_hawkes_json,
    model_weights_to_vector,
    save_hawkes_json,
    vector_to_model_row,
)

from helpers import RIDGE


def brute_force_g(data, i, j, u):
    """Direct O(events^2) evaluation of the decay sums, strictly before."""
    b = data.decays[u]
    out = np.zeros(data.events[i].size)
    for k, t in enumerate(data.events[i]):
        src = data.events[j]
        lags = t - src[src < t]
        out[k] = float(np.sum(b * np.exp(-b * lags)))
    return out


def two_node_model(agg=None, mu=0.5):
    agg = np.array([[0.3, 0.2], [0.25, 0.2]]) if agg is None else np.asarray(agg)
    adjacency = np.stack([agg / 2.0, agg / 2.0], axis=2)
    return HawkesModel(mu=[mu, mu], adjacency=adjacency, decays=[1.0, 3.0])


def test_weights_integral_two_events():
    data = HawkesData(events=[np.array([1.0, 2.0])], decays=[1.0], horizon=3.0)
    W = hawkes_weights(data)
    want = (1 - math.exp(-2.0)) + (1 - math.exp(-1.0))
    assert W.G[0, 0] == pytest.approx(want, abs=1e-12)
    assert want == pytest.approx(1.49678, abs=1e-5)


def test_weights_query_between_events():
    data = HawkesData(
        events=[np.array([1.0, 2.0]), np.array([2.5])], decays=[1.0], horizon=3.0
    )
    W = hawkes_weights(data)
    want = math.exp(-1.5) + math.exp(-0.5)
    assert W.g[1][0, 0, 0] == pytest.approx(want, abs=1e-12)
    assert want == pytest.approx(0.829666, abs=1e-5)


def test_weights_empty_node():
    data = HawkesData(
        events=[np.array([]), np.array([1.0])], decays=[2.0], horizon=2.0
    )
    W = hawkes_weights(data)
    assert W.G[0, 0] == 0.0
    assert np.all(W.g[1][:, 0, 0] == 0.0)


def test_weights_exclude_simultaneous_events():
    # an event at exactly t contributes nothing at t (strict inequality)
    data = HawkesData(
        events=[np.array([1.0]), np.array([1.0])], decays=[1.0], horizon=2.0
    )
    W = hawkes_weights(data)
    assert W.g[0][0, 1, 0] == 0.0
    assert W.g[1][0, 0, 0] == 0.0
    assert W.g[0][0, 0, 0] == 0.0  # no self-excitation at the same instant


def test_weights_match_brute_force():
    model = two_node_model()
    data = hawkes_simulate(model, 120.0, seed=3)
    total = sum(t.size for t in data.events)
    assert 50 <= total <= 500
    W = hawkes_weights(data)
    for i in range(2):
        for j in range(2):
            for u in range(2):
                np.testing.assert_allclose(
                    W.g[i][:, j, u],
                    brute_force_g(data, i, j, u),
                    atol=1e-10,
                )


def test_subproblem_single_node_layout():
    data = HawkesData(events=[np.array([1.0, 2.0])], decays=[1.0], horizon=3.0)
    subs = hawkes_subproblems(data, lam=0.5)
    sub = subs[0]
    assert sub.n == 2  # one dual variable per event
    G = (1 - math.exp(-2.0)) + (1 - math.exp(-1.0))
    np.testing.assert_allclose(sub.psi, np.array([3.0, G]) / 2.0, atol=1e-12)
    np.testing.assert_allclose(sub.features[1], [1.0, math.exp(-1.0)], atol=1e-12)
    np.testing.assert_array_equal(sub.labels, [1.0, 1.0])
    assert sub.nonneg_gram


def test_subproblem_dimensions():
    model = two_node_model()
    data = hawkes_simulate(model, 60.0, seed=4)
    subs = hawkes_subproblems(data)
    for i, sub in enumerate(subs):
        assert sub.n == data.events[i].size
        assert sub.d == 1 + 2 * 2
        assert sub.features.min() >= 0.0


def test_subproblem_empty_node_warns():
    data = HawkesData(
        events=[np.array([]), np.array([0.5, 1.2])], decays=[1.0], horizon=2.0
    )
    with pytest.warns(RuntimeWarning):
        subs = hawkes_subproblems(data)
    assert subs[0] is None
    assert subs[1] is not None


def test_loglik_poisson_reduction():
    data = HawkesData(
        events=[np.linspace(0.5, 9.5, 19), np.linspace(0.25, 9.75, 39)],
        decays=[1.0],
        horizon=10.0,
    )
    mu = np.array([1.9, 3.9])
    model = HawkesModel(mu=mu, adjacency=np.zeros((2, 2, 1)), decays=[1.0])
    got = hawkes_loglik(model, data)
    want = sum(m * 10.0 - n * math.log(m) for m, n in zip(mu, [19, 39]))
    assert got == pytest.approx(want, abs=1e-10)


def test_loglik_poisson_reduction_maximized_at_count_rate():
    data = HawkesData(events=[np.linspace(0.5, 9.5, 19)], decays=[1.0], horizon=10.0)
    best = 19 / 10.0
    zero = np.zeros((1, 1, 1))
    center = hawkes_loglik(HawkesModel([best], zero, [1.0]), data)
    for eps in (-0.05, 0.05):
        other = hawkes_loglik(HawkesModel([best + eps], zero, [1.0]), data)
        assert other > center  # negative log-likelihood grows off the optimum


def test_loglik_matches_subproblem_objectives():
    model = two_node_model()
    data = hawkes_simulate(model, 150.0, seed=5)
    subs = hawkes_subproblems(data, lam=0.1)
    total = 0.0
    for i, sub in enumerate(subs):
        w = model_weights_to_vector(model, i)
        p = primal_objective(w, sub, RIDGE)
        assert p is not None
        total += sub.n * (p - sub.lam * 0.5 * float(w @ w))
    direct = hawkes_loglik(model, data)
    assert direct == pytest.approx(total, rel=1e-8)


def test_loglik_infeasible_marker():
    data = HawkesData(events=[np.array([1.0])], decays=[1.0], horizon=2.0)
    model = HawkesModel(mu=[0.0], adjacency=np.zeros((1, 1, 1)), decays=[1.0])
    assert hawkes_loglik(model, data) is None


def test_simulate_pure_poisson_counts():
    model = HawkesModel(mu=[2.0], adjacency=np.zeros((1, 1, 1)), decays=[1.0])
    data = hawkes_simulate(model, 1000.0, seed=6)
    count = data.events[0].size
    assert abs(count - 2000) <= 3 * math.sqrt(2000)


def test_simulate_no_events_without_intensity():
    model = HawkesModel(mu=[0.0], adjacency=np.zeros((1, 1, 1)), decays=[1.0])
    data = hawkes_simulate(model, 100.0, seed=7)
    assert data.events[0].size == 0


def test_simulate_branching_ratio_rate():
    # stationary rate mu / (1 - a) for a 1-node excitatory process
    a = 0.5
    model = HawkesModel(
        mu=[1.0], adjacency=np.full((1, 1, 1), a), decays=[2.0]
    )
    data = hawkes_simulate(model, 5000.0, seed=8)
    rate = data.events[0].size / 5000.0
    assert rate == pytest.approx(1.0 / (1.0 - a), rel=0.05)


def test_simulate_deterministic():
    model = two_node_model()
    d1 = hawkes_simulate(model, 80.0, seed=9)
    d2 = hawkes_simulate(model, 80.0, seed=9)
    for a, b in zip(d1.events, d2.events):
        np.testing.assert_array_equal(a, b)


def test_simulate_warns_on_unstable_kernel():
    model = HawkesModel(
        mu=[1.0], adjacency=np.full((1, 1, 1), 1.2), decays=[1.0]
    )
    with pytest.warns(RuntimeWarning):
        with pytest.raises(RuntimeError):
            hawkes_simulate(model, 10_000.0, seed=10, max_events=3000)


def test_simulate_inhibition_keeps_intensity_nonnegative():
    agg = np.array([[0.3, -0.4], [0.3, 0.1]])
    model = two_node_model(agg=agg, mu=0.8)
    data = hawkes_simulate(model, 300.0, seed=11)
    # truth model must be feasible on its own events (accepted at lam > 0)
    assert hawkes_loglik(model, data) is not None


def test_adjacency_metrics_identity_and_zero():
    model = two_node_model()
    rmse, sign = adjacency_metrics(model, model)
    assert rmse == 0.0 and sign == 1.0
    zero = HawkesModel(
        mu=model.mu, adjacency=np.zeros_like(model.adjacency), decays=model.decays
    )
    rmse0, _ = adjacency_metrics(zero, model)
    assert rmse0 == pytest.approx(
        float(np.sqrt(np.mean(model.aggregate() ** 2))), rel=1e-12
    )


def test_adjacency_metrics_perturbation_scale():
    model = two_node_model()
    rng = np.random.default_rng(12)
    eps = 0.01
    noise = rng.standard_normal((2, 2))
    noise *= eps / np.sqrt(np.mean(noise**2))
    bumped = HawkesModel(
        mu=model.mu,
        adjacency=model.adjacency + noise[:, :, None] / 2.0,
        decays=model.decays,
    )
    rmse, _ = adjacency_metrics(bumped, model)
    assert rmse == pytest.approx(eps, rel=1e-9)


def test_adjacency_metrics_shape_mismatch():
    model = two_node_model()
    other = HawkesModel(mu=[1.0], adjacency=np.zeros((1, 1, 1)), decays=[1.0])
    with pytest.raises(ValueError):
        adjacency_metrics(model, other)


def test_fit_recovers_two_node_model_roughly():
    model = two_node_model(mu=0.6)
    data = hawkes_simulate(model, 600.0, seed=13)
    fitted, results = fit_hawkes(
        data,
        solver="sdca",
        solve_options=SolveOptions(tol=1e-8, max_epochs=2000),
    )
    assert all(r is not None and r.converged for r in results)
    rmse, sign = adjacency_metrics(fitted, model)
    assert rmse < 0.2
    assert sign == 1.0


def test_fitted_model_likelihood_consistency():
    # the direct likelihood oracle agrees with the subproblem objectives on
    # every model the solver emits
    model = two_node_model(mu=0.6)
    data = hawkes_simulate(model, 400.0, seed=16)
    lam = 0.05
    fitted, results = fit_hawkes(
        data,
        solver="sdca",
        lam=lam,
        solve_options=SolveOptions(tol=1e-9, max_epochs=3000),
    )
    assert all(r.converged for r in results)
    subs = hawkes_subproblems(data, lam=lam)
    total = 0.0
    for i, sub in enumerate(subs):
        w = model_weights_to_vector(fitted, i)
        p = primal_objective(w, sub, RIDGE)
        assert p is not None  # converged iterates are feasible
        total += sub.n * (p - sub.lam * 0.5 * float(w @ w))
    direct = hawkes_loglik(fitted, data)
    assert direct == pytest.approx(total, rel=1e-8)


def test_fit_order_independent_across_nodes():
    # node subproblems only depend on the event data, not on other fits
    model = two_node_model()
    data = hawkes_simulate(model, 200.0, seed=14)
    subs1 = hawkes_subproblems(data)
    subs2 = hawkes_subproblems(data)
    for a, b in zip(subs1, subs2):
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.psi, b.psi)


def test_weight_vector_round_trip():
    model = two_node_model()
    w = model_weights_to_vector(model, 1)
    mu, row = vector_to_model_row(w, 2, 2)
    assert mu == model.mu[1]
    np.testing.assert_array_equal(row, model.adjacency[1])


def test_events_json_round_trip(tmp_path):
    model = two_node_model()
    data = hawkes_simulate(model, 50.0, seed=15)
    path = tmp_path / "events.json"
    save_hawkes_json(path, data)
    loaded = load_hawkes_json(path)
    assert loaded.horizon == data.horizon
    np.testing.assert_array_equal(loaded.decays, data.decays)
    for a, b in zip(loaded.events, data.events):
        np.testing.assert_array_equal(a, b)


def test_hawkes_data_validation():
    with pytest.raises(ValueError):
        HawkesData(events=[np.array([2.0, 1.0])], decays=[1.0], horizon=3.0)
    with pytest.raises(ValueError):
        HawkesData(events=[np.array([1.0])], decays=[-1.0], horizon=3.0)
    with pytest.raises(ValueError):
        HawkesData(events=[np.array([5.0])], decays=[1.0], horizon=3.0)
