"""Validation suites behind ``dzo validate``.

Each suite returns a list of JSON-ready records, one per check, each with a
boolean ``pass`` field.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .estimator import probe_bias, probe_mean, probe_second_moment
from .hard import hard_check
from .kernel import build_legendre_kernel, check_kernel
from .network import build_topology, check_mixing, metropolis_matrix
from .objectives import Box, make_affine, make_holder_probe, make_quadratic
from .rand import RandomStream, sample_sphere

__all__ = [
    "SUITES",
    "MIXING_KINDS",
    "ESTIMATOR_PROBES",
    "validate_kernel",
    "validate_mixing",
    "validate_estimator",
    "validate_hard",
    "run_suite",
]

KERNEL_BETAS = (2, 3, 4, 5, 6)


def validate_kernel(betas=KERNEL_BETAS, tol: float = 1e-10) -> list[dict]:
    out = []
    for beta in betas:
        rep = check_kernel(build_legendre_kernel(beta), tol)
        ok = rep["moments_ok"] and rep["kappa_beta_ok"] and rep["constants_ok"]
        out.append({"suite": "kernel", "check": f"beta={beta}", "pass": bool(ok),
                    "moment_error": rep["moment_error"], "kappa": rep["kappa"],
                    "kappa_beta": rep["kappa_beta"], "kappa_beta_bound": rep["kappa_beta_bound"]})
    return out


def _mixing_record(g, tol) -> dict:
    rep = check_mixing(g, metropolis_matrix(g), tol)
    ok = rep["stochastic_ok"] and rep["nonnegative"] and rep["sparsity_ok"] and rep["rho_ok"]
    if rep["complete_exact"] is not None:
        ok = ok and rep["complete_exact"]
    return {"suite": "mixing", "check": f"{g.kind},n={g.n}", "pass": bool(ok), "rho": rep["rho"],
            "rho_bound": rep["rho_bound"],
            "stochastic_error": max(rep["symmetry_error"], rep["row_sum_error"], rep["col_sum_error"])}


MIXING_KINDS = ("ring", "path", "grid", "complete", "erdos_renyi")


def validate_mixing(n_range=range(3, 51), kinds=MIXING_KINDS, er_samples: int = 20, er_n: int = 20,
                    er_p: float = 0.3, seed: int = 0, tol: float = 1e-12) -> list[dict]:
    """Metropolis invariants on deterministic families over ``n_range`` plus Erdos-Renyi samples.

    Grids only use the square values of ``n_range``.
    """
    out = []
    for kind, n in itertools.product([k for k in kinds if k != "erdos_renyi"], n_range):
        if kind == "grid" and math.isqrt(n) ** 2 != n:
            continue
        out.append(_mixing_record(build_topology(kind, n), tol))
    if "erdos_renyi" not in kinds:
        return out
    for k in range(er_samples):
        g = build_topology("erdos_renyi", er_n, er_p, RandomStream(seed, ("graph", "er", k)))
        rec = _mixing_record(g, tol)
        rec["check"] += f",sample={k}"
        out.append(rec)
    return out


def affine_unbiasedness(d: int, n_mc: int = 100_000, seed: int = 0, n_se: float = 3.0) -> dict:
    """Kernel estimator on a random affine function: every coordinate of the MC mean within ``n_se`` SE."""
    c = sample_sphere(RandomStream(seed, ("affine", d)), d) * 2.0
    obj = make_affine(c, 0.5)
    k = build_legendre_kernel(2)
    x = np.full(d, 0.1)
    mean, se = probe_mean(obj, x, 0.1, k, n_mc, seed)
    z = np.abs(mean - c) / se
    return {"suite": "estimator", "check": f"affine_unbiased,d={d}", "pass": bool(np.all(z <= n_se)),
            "max_z": float(z.max()), "n_mc": n_mc}


def bias_scaling(beta: int, h_list, n_mc: int, seed: int = 0, d: int = 1) -> dict:
    """Bias of the order-``beta`` kernel estimator on the sharp Hoelder probe at the origin."""
    obj = make_holder_probe(beta, d, Box(-np.ones(d), np.ones(d)))
    k = build_legendre_kernel(beta)
    pr = probe_bias(obj, np.zeros(d), h_list, k, n_mc, seed)
    within = bool(np.all(pr.bias <= 1.1 * pr.envelope))
    return {"suite": "estimator", "check": f"bias_slope,beta={beta}", "slope": pr.slope,
            "expected_slope": beta - 1.0, "bias": pr.bias.tolist(), "envelope": pr.envelope.tolist(),
            "within_envelope": within, "h": pr.h.tolist()}


def second_moment(d: int, h: float, sigma: float, n_mc: int, seed: int = 0) -> dict:
    obj = make_quadratic(d, 1.0, 4.0, None, None, RandomStream(seed, ("objective", "moment", d)))
    x = np.full(d, 0.3 / math.sqrt(d))
    pr = probe_second_moment(obj, x, h, sigma, build_legendre_kernel(2), n_mc, seed)
    return {"suite": "estimator", "check": f"second_moment,d={d},h={h},sigma={sigma}",
            "pass": bool(pr.mean <= 1.1 * pr.bound), "mean": pr.mean, "se": pr.se, "bound": pr.bound,
            "noise_term": pr.noise_term, "noise_term_se": pr.noise_term_se}


ESTIMATOR_PROBES = ("unbiased", "bias", "variance")
SLOPE_TOLERANCE = {2: 0.15, 3: 0.2}


def validate_estimator(n_mc: int = 100_000, seed: int = 0, betas=(2, 3),
                       probes=ESTIMATOR_PROBES) -> list[dict]:
    """Affine unbiasedness, bias slopes on the Hoelder probes and second-moment envelopes.

    ``betas`` selects the bias probes; slopes must match ``beta - 1`` within
    0.15 for beta = 2 and 0.2 otherwise.
    """
    out = []
    if "unbiased" in probes:
        out += [affine_unbiasedness(d, n_mc, seed) for d in (1, 5, 20)]
    if "bias" in probes:
        for beta in betas:
            rec = bias_scaling(int(beta), (0.4, 0.2, 0.1, 0.05), n_mc, seed)
            tol = SLOPE_TOLERANCE.get(int(beta), 0.2)
            rec["pass"] = bool(abs(rec["slope"] - rec["expected_slope"]) <= tol and rec["within_envelope"])
            out.append(rec)
    if "variance" in probes:
        for d, h, sigma in itertools.product((2, 8), (0.1, 0.05), (0.5, 1.0)):
            out.append(second_moment(d, h, sigma, max(n_mc // 10, 10_000), seed))
    return out


def validate_hard(betas=(2, 3), alphas=(0.5, 1.0), Ts=(16, 256), ds=(1, 4)) -> list[dict]:
    out = []
    for beta, alpha, T, d in itertools.product(betas, alphas, Ts, ds):
        rep = hard_check(beta, alpha, T, d, n_pl=2_000)
        out.append({"suite": "hard", "check": f"beta={beta},alpha={alpha},T={T},d={d}", "pass": rep["pass"],
                    "seam_ok": rep["seam_ok"], "gradient_ok": rep["gradient_ok"],
                    "omega_plus_ok": rep["omega_plus"]["ok"],
                    "f_box": rep["optimum"]["f_box"], "f_global": rep["optimum"]["f_global"],
                    "f_closed_form": rep["optimum"]["f_closed"],
                    "closed_form_disagrees": rep["optimum"]["closed_form_disagrees"]})
    return out


SUITES = {
    "kernel": validate_kernel,
    "mixing": validate_mixing,
    "estimator": validate_estimator,
    "hard": validate_hard,
}


def run_suite(name: str, **kwargs) -> list[dict]:
    return SUITES[name](**kwargs)
