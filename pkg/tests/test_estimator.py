import numpy as np
import pytest

from dzo.errors import ConfigError, FitError
from dzo.estimator import (bias_bound, second_moment_bound, probe_bias, probe_mean, probe_second_moment,
                           surrogate_value, zo_gradient_kernel, zo_gradient_plain)
from dzo.kernel import build_legendre_kernel
from dzo.noise import NoiseModel
from dzo.objectives import Ball, Box, make_affine, make_constant, make_holder_probe, make_quadratic
from dzo.rand import RandomStream

K2 = build_legendre_kernel(2)


def test_single_estimate_parallel_to_zeta():
    obj = make_quadratic(4, 1.0, 4.0, None, None, RandomStream(0, ("q",)))
    est = zo_gradient_kernel(obj, np.full(4, 0.1), 0.2, K2, NoiseModel("gaussian", 0.3), t=5, agent=2, seed=9)
    scale = est.g @ est.zeta
    assert np.allclose(est.g, scale * est.zeta, atol=1e-12)
    again = zo_gradient_kernel(obj, np.full(4, 0.1), 0.2, K2, NoiseModel("gaussian", 0.3), t=5, agent=2, seed=9)
    assert np.array_equal(est.g, again.g)
    assert np.allclose(est.query_points[0] - est.query_points[1], 2 * 0.2 * est.r * est.zeta)


def test_constant_objective_zero_estimate():
    obj = make_constant(3, 1.5)
    for t in range(1, 20):
        assert np.all(zo_gradient_kernel(obj, np.zeros(3), 0.1, K2, NoiseModel(), t, 0, 1).g == 0.0)
        assert np.all(zo_gradient_plain(obj, np.zeros(3), 0.1, NoiseModel(), t, 0, 1).g == 0.0)


def test_nonpositive_h_rejected():
    with pytest.raises(ConfigError):
        zo_gradient_kernel(make_constant(1), np.zeros(1), 0.0, K2, NoiseModel(), 1, 0, 0)


@pytest.mark.parametrize("d", [1, 5, 20])
def test_affine_unbiased(d):
    c = np.linspace(-1, 1, d) + 0.3
    obj = make_affine(c, 2.0)
    mean, se = probe_mean(obj, np.full(d, 0.2), 0.3, K2, 100_000, seed=d)
    assert np.all(np.abs(mean - c) <= 3 * se)


def test_holder_probe_bias_closed_form():
    # E[r |r| K(r)] h = 3 E|r|^3 h = (3/4) h
    obj = make_holder_probe(2, 1)
    mean, se = probe_mean(obj, np.zeros(1), 0.2, K2, 400_000, seed=1)
    assert abs(mean[0] - 0.75 * 0.2) <= 3 * se[0]


def test_bias_slopes_and_envelope():
    for beta, tol in ((2, 0.15), (3, 0.2)):
        obj = make_holder_probe(beta, 1, Box(-np.ones(1), np.ones(1)))
        pr = probe_bias(obj, np.zeros(1), [0.4, 0.2, 0.1, 0.05], build_legendre_kernel(beta), 200_000, 0)
        assert abs(pr.slope - (beta - 1)) <= tol
        assert np.all(pr.bias <= 1.1 * pr.envelope)


def test_bias_needs_three_h():
    with pytest.raises(FitError):
        probe_bias(make_holder_probe(2, 1), np.zeros(1), [0.1, 0.2], K2, 1000, 0)


def test_affine_bias_within_se():
    obj = make_affine([1.0, 2.0])
    pr = probe_bias(obj, np.zeros(2), [0.4, 0.2, 0.1], K2, 100_000, 3)
    assert np.all(pr.bias <= 3 * pr.se)


def test_plain_estimator_unbiased_on_quadratic():
    obj = make_quadratic(3, 1.0, 1.0, np.zeros(3), Ball(np.zeros(3), 1.0))
    x = np.array([0.2, -0.1, 0.4])
    mean, se = probe_mean(obj, x, 0.3, None, 200_000, seed=4)
    assert np.all(np.abs(mean - x) <= 3 * se)


def test_surrogate_value_examples():
    obj = make_quadratic(2, 1.0, 1.0, np.zeros(2), Ball(np.zeros(2), 1.0))
    h = 0.4
    val, se = surrogate_value(obj, np.zeros(2), h, 200_000, RandomStream(0, ("sur",)))
    assert abs(val - h * h / 4) <= 3 * se
    assert abs(val - obj.f(np.zeros(2))) <= obj.L * h * h
    lin = make_affine([1.0, -1.0], 0.5)
    x = np.array([0.3, 0.1])
    val, se = surrogate_value(lin, x, h, 100_000, RandomStream(0, ("sur2",)))
    assert abs(val - lin.f(x)) <= 3 * se


def test_second_moment_constant_objective():
    obj = make_constant(2)
    pr = probe_second_moment(obj, np.zeros(2), 0.1, 1.0, K2, 100_000, 0)
    # E|g|^2 = d^2/(4h^2) E(xi - xi')^2 E[K^2] = 100 * 2 * 3 = 600 (|zeta| = 1)
    assert pr.mean == pytest.approx(600.0, rel=0.03)
    assert pr.mean <= 1800.0
    zero = probe_second_moment(obj, np.zeros(2), 0.1, 0.0, K2, 10_000, 0)
    assert zero.mean == 0.0


def test_second_moment_envelope_and_noise_slopes():
    obj = make_quadratic(2, 1.0, 4.0, None, None, RandomStream(0, ("q",)))
    x = np.array([0.2, 0.1])
    hs = [0.2, 0.1, 0.05]
    nts = []
    for h in hs:
        pr = probe_second_moment(obj, x, h, 0.5, K2, 50_000, 1)
        assert pr.mean <= 1.1 * pr.bound
        nts.append(pr.noise_term)
    slope = np.polyfit(np.log(hs), np.log(nts), 1)[0]
    assert abs(slope + 2) <= 0.3
    nd = []
    for d in (2, 4, 8):
        q = make_quadratic(d, 1.0, 4.0, None, None, RandomStream(0, ("q", d)))
        nd.append(probe_second_moment(q, np.full(d, 0.1), 0.1, 0.5, K2, 50_000, 2).noise_term)
    assert abs(np.polyfit(np.log([2, 4, 8]), np.log(nd), 1)[0] - 2) <= 0.3


def test_second_moment_needs_samples():
    with pytest.raises(ConfigError):
        probe_second_moment(make_constant(1), np.zeros(1), 0.1, 1.0, K2, 100, 0)


def test_bound_formulas():
    assert bias_bound(0.75, 1.0, 1, 0.1, 2.0) == pytest.approx(0.075)
    assert second_moment_bound(3.0, 2, 0.0, 0.0, 0.1, 1.0) == pytest.approx(1800.0)
