import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dzo.errors import FitError
from dzo.metrics import (TRACE_COLUMNS, Trace, aggregate_traces, consensus_error, fit_rate, fit_rate_columns,
                         mean_iterate, update_average, update_regret)


def test_mean_iterate_examples():
    assert np.array_equal(mean_iterate([[0.0, 0.0], [2.0, 4.0]]), [1.0, 2.0])
    assert np.array_equal(mean_iterate([[1.5, 2.5]] * 3), [1.5, 2.5])


def test_consensus_error_examples():
    assert consensus_error([[0.0], [2.0]]) == 2.0
    assert consensus_error([[3.0, 1.0]] * 4) == 0.0
    x = np.array([[0.0, 1.0], [2.0, -1.0], [5.0, 0.5]])
    assert consensus_error(x + 7.0) == pytest.approx(consensus_error(x), rel=1e-12)


def test_running_average_and_regret():
    avg = np.zeros(1)
    avg = update_average(avg, np.array([0.0]), 1)
    avg = update_average(avg, np.array([2.0]), 2)
    assert avg[0] == 1.0
    acc = 0.0
    for _ in range(10):
        acc = update_regret(acc, 0.5)
    assert acc == 5.0
    c = np.array([0.3, -0.2])
    a = np.zeros(2)
    for t in range(1, 50):
        a = update_average(a, c, t)
    assert np.allclose(a, c, atol=1e-15)


def _trace(values, t=None):
    t = np.arange(1, len(values) + 1) if t is None else t
    cols = {c: np.asarray(values, dtype=float) for c in TRACE_COLUMNS}
    cols["t"] = t
    return Trace(cols, "h", 0)


@pytest.mark.parametrize("p", [-0.5, -2.0])
def test_exact_power_law_fit(p):
    t = np.unique(np.rint(np.logspace(0, 5, 200)))
    fit = fit_rate_columns(t, 3.0 * t ** p)
    assert fit.slope == pytest.approx(p, abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0)


def test_noisy_power_law_fit():
    rng = np.random.default_rng(0)
    t = np.logspace(0, 4, 40)
    v = t ** -1.0 * (1 + 0.1 * rng.standard_normal(t.size))
    fit = fit_rate_columns(t, v, tail_fraction=0.5)
    assert fit.n_points == 20
    assert abs(fit.slope + 1.0) <= 0.1


def test_fit_filters_nonpositive_and_needs_five():
    t = np.arange(1, 11, dtype=float)
    v = t ** -1.0
    v[-6:] = 0.0
    with pytest.raises(FitError):
        fit_rate_columns(t, v, tail_fraction=1.0, min_points=5)
    fit = fit_rate(_trace(t ** -0.5, t), "f_mean_err", 1.0)
    assert fit.window == (1.0, 10.0)


def test_csv_round_trip():
    rng = np.random.default_rng(1)
    tr = _trace(rng.standard_normal(30) * 1e-7)
    tr.columns["t"] = np.arange(1, 31, dtype=float)
    back = Trace.from_csv(tr.to_csv())
    assert back.equals(tr)
    assert tr.to_csv().splitlines()[0] == "t,eta,h,f_mean_err,f_avg_err,cum_regret,consensus_e"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_csv_round_trip_property(vals):
    tr = _trace(vals)
    assert Trace.from_csv(tr.to_csv()).equals(tr)


def test_aggregate_identical_copies():
    rng = np.random.default_rng(2)
    tr = _trace(rng.random(15))
    agg = aggregate_traces([tr, tr, tr])
    for c in TRACE_COLUMNS[1:]:
        assert np.array_equal(agg[f"{c}_mean"], tr[c])
        assert np.all(agg[f"{c}_stderr"] == 0.0)


def test_aggregate_stderr_shrinks():
    rng = np.random.default_rng(3)
    traces = [_trace(rng.standard_normal(5)) for _ in range(400)]
    se4 = aggregate_traces(traces[:4])["f_mean_err_stderr"]
    se400 = aggregate_traces(traces)["f_mean_err_stderr"]
    ratio = float(np.mean(se4 / se400))
    assert 5 < ratio < 20   # about sqrt(100) = 10
