"""Acceptance criteria 1-11, each at its stated tolerance and sample size.

Every test records a one-line PASS/FAIL verdict; the lines are printed at the
end of the module (also when run as ``python3 tests/test_acceptance.py``).
"""

import json
import math
import time

import numpy as np
import pytest

from dzo import cli
from dzo.config import build_problem, parse_config
from dzo.estimator import probe_mean
from dzo.metrics import aggregate_traces, fit_rate_columns
from dzo.optimizer import record_times, simulate
from dzo.validate import (affine_unbiasedness, bias_scaling, second_moment, validate_hard, validate_kernel,
                          validate_mixing)

SEEDS = list(range(20))
T_RATE = 100_000

QUADRATIC = {
    "T": T_RATE, "n": 10, "d": 5, "seed": 0, "graph": {"kind": "ring"}, "beta": 2,
    "objective": {"kind": "quadratic", "alpha": 1, "Lbar": 4, "xstar": [0.2, -0.1, 0.3, 0.0, 0.1], "seed": 1},
    "theta": {"kind": "ball", "radius": 1}, "noise": {"kind": "gaussian", "sigma": 0.5},
    "schedule": {"kind": "strongly_convex_pl"},
}
LEAST_SQUARES = dict(QUADRATIC, objective={"kind": "least_squares", "singular_values": [2 ** 0.5, 1.0, 2 ** -0.5],
                                           "m": 8, "seed": 1})
PLAIN = dict(QUADRATIC, estimator="plain_beta2", schedule={"kind": "improved_beta2"})

VERDICTS = {}


def record(num, ok, detail):
    VERDICTS[num] = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


@pytest.fixture(scope="module", autouse=True)
def report(request):
    yield
    lines = [VERDICTS[k] for k in sorted(VERDICTS)]
    tr = request.config.pluginmanager.getplugin("terminalreporter")
    for line in ["", "acceptance summary"] + lines:
        if tr is not None:
            tr.write_line(line)
        else:
            print(line)


_RUNS = {}


def seed_runs(name, doc):
    """20-seed run of one configuration, cached so criterion 9 reuses criterion 6."""
    if name not in _RUNS:
        cfg = parse_config(doc)
        start = time.perf_counter()
        res = simulate(build_problem(cfg), SEEDS, cfg.T, record_times(cfg.T))
        _RUNS[name] = (aggregate_traces(res.traces), time.perf_counter() - start)
    return _RUNS[name]


def test_criterion_01_kernels():
    start = time.perf_counter()
    recs = validate_kernel((2, 3, 4, 5, 6), tol=1e-10)
    elapsed = time.perf_counter() - start
    worst = max(r["moment_error"] for r in recs)
    ok = all(r["pass"] for r in recs) and elapsed < 1.0
    assert record(1, ok, f"max moment error {worst:.1e}, kappa_beta within 2*sqrt(2)*beta, {elapsed:.2f}s")


def test_criterion_02_mixing():
    start = time.perf_counter()
    recs = validate_mixing(range(3, 51), er_samples=20)
    elapsed = time.perf_counter() - start
    complete = [r for r in recs if r["check"].startswith("complete")]
    ok = all(r["pass"] for r in recs) and all(r["rho"] == 0.0 for r in complete) and elapsed < 5.0
    assert record(2, ok, f"{len(recs)} graphs, max stochastic error "
                         f"{max(r['stochastic_error'] for r in recs):.1e}, {elapsed:.2f}s")


def test_criterion_03_unbiasedness():
    start = time.perf_counter()
    recs = [affine_unbiasedness(d, n_mc=100_000, n_se=3.0) for d in (1, 5, 20)]
    elapsed = time.perf_counter() - start
    ok = all(r["pass"] for r in recs) and elapsed < 10.0
    assert record(3, ok, "max |z| " + ", ".join(f"d={d}: {r['max_z']:.2f}" for d, r in zip((1, 5, 20), recs))
                  + f", {elapsed:.2f}s")


def test_criterion_04_bias_scaling():
    start = time.perf_counter()
    hs = (0.4, 0.2, 0.1, 0.05)
    b2 = bias_scaling(2, hs, n_mc=1_000_000)
    b3 = bias_scaling(3, hs, n_mc=1_000_000)
    elapsed = time.perf_counter() - start
    ok = (abs(b2["slope"] - 1.0) <= 0.15 and b2["within_envelope"] and abs(b3["slope"] - 2.0) <= 0.2
          and elapsed < 60.0)
    assert record(4, ok, f"slope beta=2 {b2['slope']:.3f}, beta=3 {b3['slope']:.3f}, "
                         f"envelope ok {b2['within_envelope']}, {elapsed:.1f}s")


def test_criterion_05_second_moment():
    start = time.perf_counter()
    recs = {(d, h, s): second_moment(d, h, s, 100_000) for d in (2, 8) for h in (0.1, 0.05) for s in (0.5, 1.0)}
    elapsed = time.perf_counter() - start
    nt = {k: r["noise_term"] for k, r in recs.items()}
    h_slopes = [math.log(nt[(d, 0.05, s)] / nt[(d, 0.1, s)]) / math.log(0.5) for d in (2, 8) for s in (0.5, 1.0)]
    d_slopes = [math.log(nt[(8, h, s)] / nt[(2, h, s)]) / math.log(4.0) for h in (0.1, 0.05) for s in (0.5, 1.0)]
    ok = (all(r["pass"] for r in recs.values()) and all(abs(v + 2) <= 0.3 for v in h_slopes)
          and all(abs(v - 2) <= 0.3 for v in d_slopes) and elapsed < 60.0)
    worst = max(r["mean"] / r["bound"] for r in recs.values())
    assert record(5, ok, f"max E|g|^2/bound {worst:.3f}, h slopes {min(h_slopes):.3f}..{max(h_slopes):.3f}, "
                         f"d slopes {min(d_slopes):.3f}..{max(d_slopes):.3f}, {elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_06_strongly_convex_rate():
    agg, elapsed = seed_runs("quadratic", QUADRATIC)
    fit = fit_rate_columns(agg["t"], agg["f_avg_err_mean"], 0.5)
    ok = -0.65 <= fit.slope <= -0.35 and elapsed < 300
    assert record(6, ok, f"tail slope of f(x_hat)-f* {fit.slope:.3f} (target [-0.65, -0.35]), {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_07_gradient_dominant_rate():
    agg, elapsed = seed_runs("least_squares", LEAST_SQUARES)
    fit = fit_rate_columns(agg["t"], agg["f_mean_err_mean"], 0.5)
    ok = fit.slope <= -0.35 and elapsed < 300
    assert record(7, ok, f"tail slope of f(x_bar)-f* {fit.slope:.3f} (target <= -0.35), {elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_08_plain_beta2():
    agg, elapsed = seed_runs("plain", PLAIN)
    fit = fit_rate_columns(agg["t"], agg["f_avg_err_mean"], 0.5)
    obj = build_problem(parse_config(PLAIN)).objective
    zs = []
    for d_seed, x in enumerate((np.full(5, 0.3 / math.sqrt(5)), np.array([0.5, -0.2, 0.0, 0.1, 0.3]))):
        mean, se = probe_mean(obj, x, 0.1, None, 100_000, seed=d_seed)
        zs.append(float(np.max(np.abs(mean - obj.grad(x)) / se)))
    ok = fit.slope <= -0.35 and max(zs) <= 3.0 and elapsed < 300
    assert record(8, ok, f"tail slope {fit.slope:.3f} (target <= -0.35), surrogate max |z| {max(zs):.2f}, "
                         f"{elapsed:.0f}s")


@pytest.mark.slow
def test_criterion_09_consensus_decay():
    agg, _ = seed_runs("quadratic", QUADRATIC)
    fit = fit_rate_columns(agg["t"], agg["consensus_e_mean"], 0.5)
    complete = dict(QUADRATIC, T=10_000, graph={"kind": "complete"}, init={"kind": "uniform"})
    cfg = parse_config(complete)
    res = simulate(build_problem(cfg), [0, 1], cfg.T, np.arange(1, cfg.T + 1))
    tail = max(float(np.max(np.abs(tr["consensus_e"][1:]))) for tr in res.traces)
    collapse_ok = tail <= 1e-12 and all(tr["consensus_e"][0] > 0 for tr in res.traces)
    ok = fit.slope <= -1.5 and collapse_ok
    assert record(9, ok, f"ring e(t) tail slope {fit.slope:.3f} (target <= -1.5), "
                         f"complete graph max e(t>=2) {tail:.1e}")


def test_criterion_10_hard_instance():
    start = time.perf_counter()
    recs = validate_hard((2, 3), (0.5, 1.0), (16, 256), (1, 4))
    elapsed = time.perf_counter() - start
    flagged = all(r["closed_form_disagrees"] for r in recs)
    ok = all(r["pass"] for r in recs) and flagged and elapsed < 30.0
    assert record(10, ok, f"{len(recs)} instances, seams/gradients/omega=+1 ok, closed form flagged "
                          f"{flagged}, {elapsed:.1f}s")


def test_criterion_11_determinism(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(dict(QUADRATIC, T=5000)))
    outs = []
    for name in ("a", "b"):
        assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
        outs.append((tmp_path / name / "trace.csv").read_bytes())
    codes = {s: cli.main(["validate", s]) for s in ("kernel", "mixing", "estimator", "hard")}
    capsys.readouterr()
    ok = outs[0] == outs[1] and all(c == 0 for c in codes.values())
    assert record(11, ok, f"trace byte-identical {outs[0] == outs[1]}, validate exit codes {codes}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
