import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dzo.config import build_problem, parse_config
from dzo.errors import DivergenceError, ScheduleError, ShapeError
from dzo.kernel import build_legendre_kernel
from dzo.network import build_topology, metropolis_matrix
from dzo.noise import NoiseModel
from dzo.objectives import Ball, Box, Objective, make_constant, make_quadratic
from dzo.optimizer import (BLOCK_STEPS, Problem, Schedule, consensus_step, record_times, run, schedule_values,
                           simulate)
from dzo.rand import RandomStream, sample_interval, sample_sphere


def test_schedule_examples():
    assert schedule_values(Schedule("strongly_convex_pl", 1.0, 2.0), 1) == (2.0, 1.0)
    eta, h = schedule_values(Schedule("strongly_convex_pl", 2.0, 2.0), 4)
    assert eta == 0.25 and h == pytest.approx(4 ** -0.25, rel=1e-15)
    assert schedule_values(Schedule("improved_beta2", 1.0, 2.0, d=4), 1) == (1.0, 2.0)
    with pytest.raises(ScheduleError):
        schedule_values(Schedule("strongly_convex_pl", 1.0), 0)


@settings(max_examples=30, deadline=None)
@given(kind=st.sampled_from(["strongly_convex_pl", "improved_beta2"]), alpha=st.floats(0.01, 10),
       beta=st.floats(2, 6), d=st.integers(1, 50))
def test_schedules_positive_nonincreasing(kind, alpha, beta, d):
    eta, h = schedule_values(Schedule(kind, alpha, beta, d), np.arange(1, 2000))
    assert np.all(eta > 0) and np.all(h > 0)
    assert np.all(np.diff(eta) <= 0) and np.all(np.diff(h) <= 0)


def test_consensus_step_complete_graph():
    theta = Ball(np.zeros(2), 1.0)
    mix = metropolis_matrix(build_topology("complete", 3))
    x0, g0 = np.array([0.2, 0.1]), np.array([1.0, -2.0])
    out = consensus_step(np.tile(x0, (3, 1)), np.tile(g0, (3, 1)), mix, 0.1, theta)
    assert np.allclose(out, theta.project(x0 - 0.1 * g0), atol=1e-15)
    rng = np.random.default_rng(0)
    out = consensus_step(rng.random((3, 2)), rng.random((3, 2)), mix, 0.5, theta)
    assert np.all(out == out[0])


def test_consensus_step_identity_mixing_is_independent():
    theta = Box(-np.ones(2), np.ones(2))
    X = np.array([[0.1, 0.2], [-0.3, 0.4]])
    G = np.array([[1.0, 0.0], [0.0, 1.0]])
    out = consensus_step(X, G, np.eye(2), 0.2, theta)
    assert np.allclose(out, theta.project(X - 0.2 * G))


def test_consensus_step_shape_mismatch():
    with pytest.raises(ShapeError):
        consensus_step(np.zeros((3, 2)), np.zeros((2, 2)), np.eye(3), 0.1, Ball(np.zeros(2), 1.0))


def _problem(n=4, kind="ring", d=3, sigma=0.3, estimator="kernel", init="shared", obj=None):
    obj = obj or make_quadratic(d, 1.0, 4.0, np.full(d, 0.1), Ball(np.zeros(d), 1.0), RandomStream(0, ("q",)))
    topo = build_topology(kind, n)
    k = build_legendre_kernel(2) if estimator == "kernel" else None
    return Problem(obj, topo, metropolis_matrix(topo), Schedule("strongly_convex_pl", 1.0, 2.0, d),
                   NoiseModel("gaussian", sigma), estimator, k, init)


def test_loop_matches_direct_transcription():
    p = _problem(n=3, kind="path", d=2)
    T, seed = 40, 5
    res = simulate(p, [seed], T, np.arange(1, T + 1))
    # independent transcription of the algorithm with the same labelled draws
    r = sample_interval(RandomStream(seed, ("r", "block", 0)), (BLOCK_STEPS, 3))
    z = sample_sphere(RandomStream(seed, ("zeta", "block", 0)), 2, (BLOCK_STEPS, 3))
    xi = 0.3 * RandomStream(seed, ("noise", "block", 0)).rng.standard_normal((BLOCK_STEPS, 3, 2))
    W = p.mixing.W
    X = np.tile(p.objective.theta.default_point(), (3, 1))
    f = p.objective.f
    for t in range(1, T + 1):
        eta, h = 2.0 / t, t ** -0.25
        G = np.zeros_like(X)
        for i in range(3):
            u = h * r[t - 1, i] * z[t - 1, i]
            y1 = f(X[i] + u) + xi[t - 1, i, 0]
            y2 = f(X[i] - u) + xi[t - 1, i, 1]
            G[i] = 2 / (2 * h) * (y1 - y2) * 3 * r[t - 1, i] * z[t - 1, i]
        X = p.objective.theta.project(W @ (X - eta * G))
    assert np.allclose(res.final_states[0], X, atol=1e-12)


def test_single_agent_is_centralised():
    p = _problem(n=1, kind="complete")
    assert p.mixing.W.shape == (1, 1) and p.mixing.W[0, 0] == 1.0
    res = simulate(p, [0], 100, record_times(100))
    assert np.all(res.traces[0]["consensus_e"] == 0.0)


def test_constant_objective_stays_put():
    obj = make_constant(2, 0.7, Ball(np.zeros(2), 1.0))
    topo = build_topology("ring", 5)
    p = Problem(obj, topo, metropolis_matrix(topo), Schedule("strongly_convex_pl", 1.0), NoiseModel(),
                "kernel", build_legendre_kernel(2))
    res = simulate(p, [0], 300, record_times(300))
    assert np.all(res.final_states == obj.theta.default_point())
    assert np.all(res.traces[0]["f_mean_err"] == 0.0)


def test_complete_graph_collapses_after_first_step():
    p = _problem(n=6, kind="complete", init="uniform")
    tr = simulate(p, [1], 500, np.arange(1, 501)).traces[0]
    assert tr["consensus_e"][0] > 0
    assert np.all(np.abs(tr["consensus_e"][1:]) <= 1e-12)


def test_feasibility_and_monotone_schedule():
    p = _problem(n=5, kind="ring", sigma=2.0)
    res = simulate(p, [0, 1], 2000, record_times(2000))
    assert np.all(p.objective.theta.contains(res.final_states.reshape(-1, 3)))
    for tr in res.traces:
        assert np.all(np.diff(tr["eta"]) <= 0) and np.all(np.diff(tr["h"]) <= 0)
        assert np.all(np.diff(tr.t) > 0)
        assert np.all(tr["consensus_e"] >= 0)
        assert np.all(np.diff(tr["cum_regret"]) >= 0)


def test_seed_results_independent_of_batch():
    p = _problem(n=4, kind="ring")
    alone = simulate(p, [7], 1500, record_times(1500)).traces[0]
    batch = simulate(p, [3, 7, 11], 1500, record_times(1500)).traces[1]
    assert alone.equals(batch)


def test_horizon_does_not_change_prefix():
    p = _problem(n=3, kind="path")
    short = simulate(p, [2], 1200, np.arange(1, 1201)).traces[0]
    long = simulate(p, [2], 3000, np.arange(1, 1201)).traces[0]
    assert short.equals(long)


def test_plain_estimator_runs():
    p = _problem(n=3, kind="ring", estimator="plain_beta2")
    tr = simulate(p, [0], 200, record_times(200)).traces[0]
    assert np.all(np.isfinite(tr["f_mean_err"]))


def test_divergence_reported_with_last_state():
    theta = Ball(np.zeros(1), 1.0)
    bad = Objective("bad", 1, lambda x: np.full(np.shape(x)[:-1], np.nan), lambda x: np.zeros(np.shape(x)),
                    theta, fstar=0.0)
    topo = build_topology("complete", 2)
    p = Problem(bad, topo, metropolis_matrix(topo), Schedule("custom", 1.0), NoiseModel(), "kernel",
                build_legendre_kernel(2))
    with pytest.raises(DivergenceError) as exc:
        simulate(p, [0], 10, record_times(10))
    assert exc.value.last_state is not None and np.all(np.isfinite(exc.value.last_state))


def test_precommitted_sequence_of_exact_length():
    cfg = parse_config({"T": 30, "n": 2, "d": 1, "objective": {"kind": "quadratic", "alpha": 1, "Lbar": 1},
                        "noise": {"kind": "precommitted_sequence", "sigma": 0.1,
                                  "sequence": [0.1 * (-1) ** k for k in range(30)]}})
    assert len(run(cfg)) == len(record_times(30))


def test_record_times():
    assert list(record_times(1)) == [1]
    ts = record_times(10 ** 5)
    assert ts[0] == 1 and ts[-1] == 10 ** 5 and len(ts) <= 200
    assert list(record_times(10, every=4)) == [1, 5, 9, 10]
