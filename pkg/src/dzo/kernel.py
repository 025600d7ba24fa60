"""Polynomial smoothing kernels on [-1, 1].

Kernels are normalised with respect to the *uniform* distribution of the
radial variable ``r ~ U[-1, 1]``::

    E[K(r)] = 0,   E[r K(r)] = 1,   E[r^j K(r)] = 0  for j = 2..ell

With this convention the two-point estimator is exactly unbiased on affine
functions.  The kernel is a combination of the first ``ell + 1`` Legendre
polynomials whose coefficients solve the moment system above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg
from numpy.polynomial import polynomial as nppoly

from .errors import ConstructionFailedError, DomainError, UnsupportedSmoothnessError

__all__ = [
    "Kernel",
    "order_for_beta",
    "build_legendre_kernel",
    "eval_kernel",
    "kernel_moments",
    "kernel_constants",
    "uniform_expectation",
    "check_kernel",
]

QUAD_NODES = 64
_GL_X, _GL_W = npleg.leggauss(QUAD_NODES)
_DOMAIN_SLACK = 1e-12


def uniform_expectation(func, a: float = -1.0, b: float = 1.0) -> float:
    """``E[func(r) 1{a<=r<=b}]`` for ``r ~ U[-1, 1]`` by 64-node Gauss-Legendre.

    Exact for polynomial integrands of degree <= 127 on [a, b].
    """
    half = 0.5 * (b - a)
    x = half * _GL_X + 0.5 * (a + b)
    return float(half * np.dot(_GL_W, func(x)) / 2.0)


def order_for_beta(beta: float) -> int:
    """Largest integer strictly below ``beta``."""
    return int(math.ceil(beta)) - 1


@dataclass(frozen=True)
class Kernel:
    """Smoothing kernel ``K(r) = sum_k coeffs[k] r^k`` on [-1, 1].

    ``kappa = E[K(r)^2]`` and ``kappa_beta = E[|r|^beta |K(r)|]`` under the
    uniform law on [-1, 1].
    """

    beta: float
    ell: int
    coeffs: tuple[float, ...]
    kappa: float
    kappa_beta: float

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, r):
        return eval_kernel(self, r)

    def unchecked(self, r):
        """Polynomial evaluation without the domain check (hot loops)."""
        return nppoly.polyval(r, self.coeffs)


def _abs_breakpoints(coeffs) -> np.ndarray:
    roots = nppoly.polyroots(np.asarray(coeffs, dtype=float)) if len(coeffs) > 1 else np.array([])
    real = roots[np.abs(roots.imag) < 1e-12].real
    inner = real[(real > -1.0) & (real < 1.0)]
    return np.unique(np.concatenate([[-1.0, 0.0, 1.0], inner]))


def _expect_piecewise(func, breaks) -> float:
    return sum(uniform_expectation(func, a, b) for a, b in zip(breaks[:-1], breaks[1:]))


def _constants(coeffs, beta: float) -> tuple[float, float]:
    c = np.asarray(coeffs, dtype=float)
    kappa = uniform_expectation(lambda x: nppoly.polyval(x, c) ** 2)
    # |r|^beta |K| is a polynomial between consecutive kinks; integrate piecewise
    kappa_beta = _expect_piecewise(
        lambda x: np.abs(x) ** beta * np.abs(nppoly.polyval(x, c)), _abs_breakpoints(c)
    )
    return kappa, kappa_beta


def build_legendre_kernel(beta: float) -> Kernel:
    """Legendre kernel of order ``ell = ceil(beta) - 1`` for smoothness ``beta >= 2``."""
    beta = float(beta)
    if not math.isfinite(beta) or beta < 2.0:
        raise UnsupportedSmoothnessError(f"kernels are provided for beta >= 2, got {beta}")
    ell = order_for_beta(beta)
    m = ell + 1
    # M[j, k] = E[r^j P_k(r)]
    moments = np.empty((m, m))
    for k in range(m):
        pk = npleg.Legendre.basis(k)
        for j in range(m):
            moments[j, k] = uniform_expectation(lambda x, j=j: x**j * pk(x))
    rhs = np.zeros(m)
    rhs[1] = 1.0
    try:
        leg_coeffs = np.linalg.solve(moments, rhs)
    except np.linalg.LinAlgError as exc:
        raise ConstructionFailedError(f"singular moment system for beta={beta}") from exc
    mono = npleg.leg2poly(leg_coeffs)
    # exact zeros from the odd/even structure come out as ~1e-17; clean them
    mono = np.where(np.abs(mono) < 1e-13 * np.max(np.abs(mono)), 0.0, mono)
    mono = np.trim_zeros(mono, "b")
    kappa, kappa_beta = _constants(mono, beta)
    return Kernel(beta=beta, ell=ell, coeffs=tuple(float(v) for v in mono),
                  kappa=kappa, kappa_beta=kappa_beta)


def eval_kernel(k: Kernel, r):
    """Evaluate ``k`` at ``r``; raises :class:`DomainError` outside [-1, 1]."""
    arr = np.asarray(r, dtype=float)
    if arr.size and np.max(np.abs(arr)) > 1.0 + _DOMAIN_SLACK:
        raise DomainError("kernel argument outside [-1, 1]")
    out = nppoly.polyval(arr, k.coeffs)
    return float(out) if np.ndim(out) == 0 else out


def kernel_moments(k: Kernel, j_max: int) -> np.ndarray:
    """``(E[r^j K(r)])_{j=0..j_max}`` by 64-node Gauss-Legendre quadrature."""
    if j_max < 0:
        raise DomainError("j_max must be >= 0")
    c = np.asarray(k.coeffs)
    return np.array([uniform_expectation(lambda x, j=j: x**j * nppoly.polyval(x, c))
                     for j in range(j_max + 1)])


def kernel_constants(k: Kernel, beta: float | None = None) -> tuple[float, float]:
    """Return ``(kappa, kappa_beta)``, optionally for a different ``beta``."""
    if beta is None:
        return k.kappa, k.kappa_beta
    return _constants(k.coeffs, float(beta))


def check_kernel(k: Kernel, tol: float = 1e-10) -> dict:
    """Evaluate all kernel invariants; returns a dict of named booleans and values."""
    mom = kernel_moments(k, k.ell)
    target = np.zeros(k.ell + 1)
    target[1] = 1.0
    err = float(np.max(np.abs(mom - target)))
    bound = 2.0 * math.sqrt(2.0) * k.beta
    return {
        "beta": k.beta,
        "ell": k.ell,
        "moments": mom.tolist(),
        "moment_error": err,
        "moments_ok": err <= tol,
        "kappa": k.kappa,
        "kappa_beta": k.kappa_beta,
        "kappa_beta_bound": bound,
        "kappa_beta_ok": bool(k.kappa_beta <= bound),
        "constants_ok": bool(0 < k.kappa < math.inf and 0 < k.kappa_beta < math.inf),
    }
