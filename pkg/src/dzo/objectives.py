"""Objective functions with exact gradients, optima and smoothness metadata.

All evaluators are vectorised: ``f(x)`` accepts an array of shape ``(..., d)``
and returns shape ``(...)``; ``grad(x)`` returns shape ``(..., d)``.  They use
``einsum`` rather than BLAS products so that the value for one point does not
depend on how many points are evaluated alongside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import optimize as spopt
from scipy.special import expit

from .errors import ConfigError, ShapeError, SpectrumError, UnavailableOptimumError
from .rand import RandomStream, sample_ball, sample_sphere

__all__ = [
    "ProjectionSet",
    "Ball",
    "Box",
    "Objective",
    "project",
    "make_quadratic",
    "make_least_squares",
    "make_logistic",
    "make_holder_probe",
    "make_affine",
    "make_constant",
    "verify_pl",
    "estimate_pl_constant",
    "estimate_grad_bound",
    "holder_constant_1d",
    "check_gradient",
]

OBJECTIVE_CLASSES = ("strongly_convex", "gradient_dominant", "smooth_only")


# --------------------------------------------------------------------------
# feasible sets


class ProjectionSet:
    """Compact convex feasible set with a closed-form Euclidean projection."""

    kind: str
    d: int

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        raise NotImplementedError

    def sample(self, stream: RandomStream, size) -> np.ndarray:
        """Uniform samples from the set, shape ``(*size, d)``."""
        raise NotImplementedError

    def boundary_points(self, stream: RandomStream, size: int) -> np.ndarray:
        raise NotImplementedError

    def default_point(self) -> np.ndarray:
        """Deterministic boundary point used as the default initialisation."""
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.d,):
            raise ShapeError(f"expected trailing dimension {self.d}, got shape {x.shape}")
        return x


@dataclass(frozen=True)
class Ball(ProjectionSet):
    center: np.ndarray
    radius: float
    kind: str = field(default="ball", init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        if not self.radius > 0:
            raise ConfigError("ball radius must be positive")

    @property
    def d(self) -> int:
        return self.center.size

    @property
    def diameter(self) -> float:
        return 2.0 * float(self.radius)

    def project(self, x):
        x = self._check(x)
        v = x - self.center
        nrm = np.sqrt(np.einsum("...i,...i->...", v, v))
        scale = np.where(nrm > self.radius, self.radius / np.where(nrm > 0, nrm, 1.0), 1.0)
        return self.center + v * scale[..., None]

    def contains(self, x, tol=1e-12):
        v = self._check(x) - self.center
        return np.sqrt(np.einsum("...i,...i->...", v, v)) <= self.radius * (1 + tol) + tol

    def sample(self, stream, size):
        return self.center + self.radius * sample_ball(stream, self.d, size)

    def boundary_points(self, stream, size):
        return self.center + self.radius * sample_sphere(stream, self.d, size)

    def default_point(self):
        e = np.zeros(self.d)
        e[0] = self.radius
        return self.center + e


@dataclass(frozen=True)
class Box(ProjectionSet):
    lo: np.ndarray
    hi: np.ndarray
    kind: str = field(default="box", init=False)

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ShapeError("box bounds must have the same shape")
        if np.any(hi < lo):
            raise ConfigError("box needs lo <= hi in every coordinate")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def d(self) -> int:
        return self.lo.size

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi - self.lo))

    def project(self, x):
        return np.clip(self._check(x), self.lo, self.hi)

    def contains(self, x, tol=1e-12):
        x = self._check(x)
        return np.all((x >= self.lo - tol) & (x <= self.hi + tol), axis=-1)

    def sample(self, stream, size):
        shape = tuple(np.atleast_1d(size)) + (self.d,)
        return self.lo + (self.hi - self.lo) * stream.rng.random(shape)

    def boundary_points(self, stream, size):
        if self.d <= 10:
            corners = np.array(np.meshgrid(*zip(self.lo, self.hi), indexing="ij")).reshape(self.d, -1).T
            return corners
        pick = stream.rng.random((size, self.d)) < 0.5
        return np.where(pick, self.lo, self.hi)

    def default_point(self):
        return self.lo.copy()


def project(theta: ProjectionSet, x) -> np.ndarray:
    """Euclidean projection of ``x`` (shape ``(..., d)``) onto ``theta``."""
    return theta.project(x)


# --------------------------------------------------------------------------
# objectives


@dataclass(frozen=True)
class Objective:
    """Function, exact gradient, optimum and smoothness metadata.

    ``alpha`` is the strong-convexity or Polyak-Lojasiewicz constant, ``L`` the
    Hoelder constant of order ``beta``, ``Lbar`` the gradient Lipschitz
    constant and ``G`` a bound on the gradient norm over ``theta``.
    """

    name: str
    d: int
    f: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    grad: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    theta: ProjectionSet = field(repr=False)
    cls: str = "smooth_only"
    xstar: Optional[np.ndarray] = field(default=None, repr=False)
    fstar: Optional[float] = None
    alpha: Optional[float] = None
    beta: float = 2.0
    L: Optional[float] = None
    Lbar: Optional[float] = None
    G: Optional[float] = None
    info: dict = field(default_factory=dict, repr=False)

    def with_(self, **changes) -> "Objective":
        return replace(self, **changes)

    def require_fstar(self) -> float:
        if self.fstar is None:
            raise UnavailableOptimumError(f"objective {self.name!r} has no known optimum")
        return self.fstar


def _as_theta(theta, d) -> ProjectionSet:
    if theta.d != d:
        raise ShapeError(f"feasible set has dimension {theta.d}, objective has {d}")
    return theta


def _random_orthogonal(d: int, stream: RandomStream) -> np.ndarray:
    q, r = np.linalg.qr(stream.rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def make_quadratic(d: int, alpha: float, Lbar: float, xstar=None, theta: ProjectionSet | None = None,
                   stream: RandomStream | None = None, spectrum=None) -> Objective:
    """``f(x) = 0.5 (x - x*)^T H (x - x*)`` with spectrum of H in [alpha, Lbar].

    The default spectrum is ``linspace(alpha, Lbar, d)`` conjugated by a random
    orthogonal matrix drawn from ``stream`` (identity when no stream is given).
    """
    d = int(d)
    if not (0 < alpha <= Lbar):
        raise SpectrumError(f"need 0 < alpha <= Lbar, got alpha={alpha}, Lbar={Lbar}")
    if spectrum is None:
        spectrum = np.linspace(alpha, Lbar, d) if d > 1 else np.array([alpha])
    spectrum = np.asarray(spectrum, dtype=float)
    if spectrum.shape != (d,):
        raise ShapeError("spectrum must have length d")
    if spectrum.min() < alpha - 1e-12 or spectrum.max() > Lbar + 1e-12:
        raise SpectrumError("spectrum must lie in [alpha, Lbar]")
    Q = _random_orthogonal(d, stream) if stream is not None and d > 1 else np.eye(d)
    H = (Q * spectrum) @ Q.T
    H = 0.5 * (H + H.T)
    xs = np.zeros(d) if xstar is None else np.asarray(xstar, dtype=float).reshape(d)
    theta = _as_theta(theta if theta is not None else Ball(np.zeros(d), 1.0), d)

    def f(x):
        v = np.asarray(x) - xs
        return 0.5 * np.einsum("...i,ij,...j->...", v, H, v)

    def grad(x):
        return np.einsum("...i,ij->...j", np.asarray(x) - xs, H)

    lam_max = float(spectrum.max())
    interior = bool(theta.contains(xs))
    obj = Objective(
        name="quadratic", d=d, f=f, grad=grad, theta=theta,
        cls="strongly_convex",
        xstar=xs if interior else None, fstar=0.0 if interior else None,
        alpha=float(spectrum.min()), beta=2.0, L=0.5 * lam_max, Lbar=lam_max,
        info={"H": H, "spectrum": spectrum},
    )
    if not interior:
        xc = _minimize_over_theta(obj, lam_max)
        obj = obj.with_(xstar=xc, fstar=float(f(xc)))
    return obj.with_(G=_grad_bound_closed_quadratic(H, xs, theta))


def _grad_bound_closed_quadratic(H, xs, theta) -> float:
    # ||H(x - x*)|| <= ||H|| * max_{x in theta} ||x - x*||
    if isinstance(theta, Ball):
        far = np.linalg.norm(theta.center - xs) + theta.radius
    else:
        far = np.linalg.norm(np.maximum(np.abs(theta.lo - xs), np.abs(theta.hi - xs)))
    return 1.1 * float(np.linalg.norm(H, 2) * far)


def make_affine(c, b: float = 0.0, theta: ProjectionSet | None = None) -> Objective:
    c = np.asarray(c, dtype=float).reshape(-1)
    d = c.size
    theta = _as_theta(theta if theta is not None else Ball(np.zeros(d), 1.0), d)

    def f(x):
        return np.einsum("...i,i->...", np.asarray(x), c) + b

    def grad(x):
        return np.broadcast_to(c, np.shape(x)).copy()

    return Objective(name="affine", d=d, f=f, grad=grad, theta=theta, cls="smooth_only",
                     beta=2.0, L=0.0, Lbar=0.0, G=1.1 * float(np.linalg.norm(c)),
                     info={"c": c, "b": b})


def make_constant(d: int, value: float = 0.0, theta: ProjectionSet | None = None) -> Objective:
    theta = _as_theta(theta if theta is not None else Ball(np.zeros(d), 1.0), d)

    def f(x):
        return np.full(np.shape(x)[:-1], float(value))

    def grad(x):
        return np.zeros(np.shape(x))

    return Objective(name="constant", d=d, f=f, grad=grad, theta=theta, cls="smooth_only",
                     xstar=theta.default_point(), fstar=float(value), beta=2.0, L=0.0,
                     Lbar=0.0, G=0.0)


def make_least_squares(A, y, theta: ProjectionSet | None = None,
                       stream: RandomStream | None = None, n_samples: int = 10_000) -> Objective:
    """``f(x) = ||A x - y||^2``; gradient dominant even when ``A^T A`` is singular.

    The minimum-norm minimiser ``A^+ y`` is used as ``x*``.  The PL constant
    is certified numerically over ``theta``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, d = A.shape
    y = np.asarray(y, dtype=float).reshape(m)
    if not np.any(A):
        raise ConfigError("least squares needs a nonzero matrix A")
    pinv = np.linalg.pinv(A)
    xs = pinv @ y
    resid = y - A @ xs
    fstar = float(resid @ resid)
    smax = float(np.linalg.norm(A, 2))
    theta = _as_theta(theta if theta is not None else Ball(np.zeros(d), 2.0 * np.linalg.norm(xs) + 1.0), d)
    if not theta.contains(xs):
        raise ConfigError("feasible set must contain the least-squares minimiser A^+ y")

    def f(x):
        r = np.einsum("...j,ij->...i", np.asarray(x), A) - y
        return np.einsum("...i,...i->...", r, r)

    def grad(x):
        return 2.0 * np.einsum("...i,ij->...j", np.einsum("...j,ij->...i", np.asarray(x), A) - y, A)

    obj = Objective(name="least_squares", d=d, f=f, grad=grad, theta=theta,
                    cls="gradient_dominant", xstar=xs, fstar=fstar, beta=2.0,
                    L=smax**2, Lbar=2.0 * smax**2, info={"A": A, "y": y})
    stream = stream if stream is not None else RandomStream(0, ("least_squares",))
    alpha = estimate_pl_constant(obj, n_samples, stream.child("pl"))
    G = estimate_grad_bound(obj, n_samples, stream.child("G"))
    return obj.with_(alpha=alpha, G=G)


def make_logistic(A, theta: ProjectionSet | None = None, stream: RandomStream | None = None,
                  n_samples: int = 10_000) -> Objective:
    """``f(x) = sum_i log(1 + exp(a_i^T x))`` on a compact set.

    The optimum over ``theta`` comes from an accelerated projected-gradient
    solve with exact gradients (tolerance 1e-10) and is cached.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, d = A.shape
    if not np.any(A):
        raise ConfigError("logistic objective needs a nonzero matrix A")
    theta = _as_theta(theta if theta is not None else Ball(np.zeros(d), 1.0), d)
    smax = float(np.linalg.norm(A, 2))

    def f(x):
        return np.sum(np.logaddexp(0.0, np.einsum("...j,ij->...i", np.asarray(x), A)), axis=-1)

    def grad(x):
        return np.einsum("...i,ij->...j", expit(np.einsum("...j,ij->...i", np.asarray(x), A)), A)

    obj = Objective(name="logistic", d=d, f=f, grad=grad, theta=theta, cls="gradient_dominant",
                    beta=2.0, L=0.125 * smax**2, Lbar=0.25 * smax**2, info={"A": A})
    xs = _minimize_over_theta(obj, max(obj.Lbar, 1e-12))
    obj = obj.with_(xstar=xs, fstar=float(f(xs)))
    stream = stream if stream is not None else RandomStream(0, ("logistic",))
    alpha = estimate_pl_constant(obj, n_samples, stream.child("pl"))
    G = estimate_grad_bound(obj, n_samples, stream.child("G"))
    return obj.with_(alpha=alpha, G=G)


def holder_constant_1d(beta: int, n_grid: int = 20_001) -> float:
    """Hoelder constant of ``u -> u |u|^(beta-1)`` for the order-``beta`` Taylor remainder.

    The remainder ratio is scale invariant, so it suffices to scan the
    expansion point ``x = 1`` against ``z = s`` on a dense grid (plus the
    trivial ratio 1 at ``x = 0``).
    """
    from math import factorial

    ell = beta - 1

    def deriv(k, x):
        # k-th derivative of x |x|^(beta-1) = sign(x) |x|^beta
        c = math.prod(range(beta - k + 1, beta + 1))
        p = beta - k
        return c * (np.sign(x) if k % 2 == 0 else 1.0) * np.abs(x) ** p

    s = np.concatenate([np.linspace(-50.0, 50.0, n_grid), -np.logspace(-3, 3, 2001)])
    s = s[np.abs(s - 1.0) > 1e-6]
    u = s - 1.0
    taylor = sum(deriv(k, 1.0) / factorial(k) * u**k for k in range(ell + 1))
    rem = np.abs(np.sign(s) * np.abs(s) ** beta - taylor)
    return float(max(1.0, np.max(rem / np.abs(u) ** beta)))


def make_holder_probe(beta: int, d: int, theta: ProjectionSet | None = None) -> Objective:
    """Sharp-bias probe ``f(x) = sum_i x_i |x_i|^(beta - 1)`` for integer ``beta >= 2``.

    The function is odd in every coordinate and belongs to the Hoelder class of
    order ``beta`` but not to any higher one, so the two-point estimator at the
    origin has bias of exact order ``h^(beta - 1)``.
    """
    if float(beta) != int(beta) or int(beta) < 2:
        raise ConfigError(f"Hoelder probes are defined for integer beta >= 2, got {beta}")
    beta = int(beta)
    theta = _as_theta(theta if theta is not None else Box(-np.ones(d), np.ones(d)), d)

    def f(x):
        x = np.asarray(x)
        return np.sum(x * np.abs(x) ** (beta - 1), axis=-1)

    def grad(x):
        return beta * np.abs(np.asarray(x)) ** (beta - 1)

    if isinstance(theta, Box):
        reach = float(np.max(np.maximum(np.abs(theta.lo), np.abs(theta.hi))))
    else:
        reach = float(np.max(np.abs(theta.center)) + theta.radius)
    Lbar = 2.0 if beta == 2 else beta * (beta - 1) * reach ** (beta - 2)
    obj = Objective(name="holder_probe", d=d, f=f, grad=grad, theta=theta, cls="smooth_only",
                    beta=float(beta), L=holder_constant_1d(beta), Lbar=Lbar)
    # f increases in every coordinate; the minimum sits on the "lower" boundary
    if isinstance(theta, Box):
        xs = theta.lo.copy()
    else:
        starts = [theta.project(theta.center - theta.radius * e) for e in np.eye(d)]
        starts.append(theta.project(theta.center - theta.radius * np.ones(d) / math.sqrt(d)))
        cands = [_minimize_over_theta(obj, Lbar, x0=s0) for s0 in starts]
        xs = min(cands, key=lambda v: float(f(v)))
    G = float(np.linalg.norm(grad(np.full(d, reach)))) * 1.1
    return obj.with_(xstar=xs, fstar=float(f(xs)), G=G)


# --------------------------------------------------------------------------
# numerical certification


def _minimize_over_theta(obj: Objective, lipschitz: float, x0=None, tol: float = 1e-10,
                         max_iter: int = 200_000) -> np.ndarray:
    """Accelerated projected gradient (FISTA with restart) over ``obj.theta``."""
    theta = obj.theta
    x = theta.project(theta.default_point() if x0 is None else np.asarray(x0, dtype=float))
    step = 1.0 / lipschitz
    yk, tk = x.copy(), 1.0
    fx = float(obj.f(x))
    for _ in range(max_iter):
        x_new = theta.project(yk - step * obj.grad(yk))
        f_new = float(obj.f(x_new))
        if f_new > fx:  # adaptive restart keeps the method monotone
            yk, tk = x.copy(), 1.0
            x_new = theta.project(x - step * obj.grad(x))
            f_new = float(obj.f(x_new))
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        yk = x_new + ((tk - 1.0) / t_new) * (x_new - x)
        moved = float(np.linalg.norm(x_new - x))
        x, fx, tk = x_new, f_new, t_new
        if moved <= tol * step * max(1.0, lipschitz):
            break
    return x


def _pl_ratio(obj: Objective, x, fstar: float) -> np.ndarray:
    g = obj.grad(x)
    gap = obj.f(x) - fstar
    return gap, np.einsum("...i,...i->...", g, g)


def verify_pl(obj: Objective, alpha: float, n_samples: int, stream: RandomStream) -> float:
    """Max over sampled ``x`` in theta of ``2 alpha (f(x) - f*) / ||grad f(x)||^2``.

    A value ``<= 1 + 1e-6`` means the PL inequality holds at level ``alpha`` on
    the samples.
    """
    fstar = obj.require_fstar()
    x = np.concatenate([obj.theta.sample(stream, n_samples),
                        obj.theta.boundary_points(stream, max(1, n_samples // 10))])
    gap, g2 = _pl_ratio(obj, x, fstar)
    return float(np.max(2.0 * alpha * gap / np.maximum(g2, 1e-300)))


def estimate_pl_constant(obj: Objective, n_samples: int, stream: RandomStream) -> float:
    """Numerical PL constant: ``min ||grad f||^2 / (2 (f - f*))`` over theta.

    Sampled minimum refined by a bounded local search from the best samples.
    """
    fstar = obj.require_fstar()
    x = np.concatenate([obj.theta.sample(stream, n_samples),
                        obj.theta.boundary_points(stream, max(1, n_samples // 10))])
    gap, g2 = _pl_ratio(obj, x, fstar)
    scale = max(1.0, abs(fstar))
    ok = gap > 1e-9 * scale
    if not np.any(ok):
        raise UnavailableOptimumError("objective is flat on the sampled set")
    ratio = g2[ok] / (2.0 * gap[ok])
    best = float(ratio.min())
    theta = obj.theta

    def neg(z):
        z = theta.project(z)
        gp, gg = _pl_ratio(obj, z, fstar)
        if gp <= 1e-9 * scale:
            return np.inf
        return float(gg / (2.0 * gp))

    for idx in np.argsort(ratio)[:5]:
        res = spopt.minimize(neg, x[ok][idx], method="Nelder-Mead",
                             options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000})
        if np.isfinite(res.fun):
            best = min(best, float(res.fun))
    return best


def estimate_grad_bound(obj: Objective, n_samples: int, stream: RandomStream) -> float:
    """``1.1 * max ||grad f||`` over uniform and boundary samples of theta."""
    x = np.concatenate([obj.theta.sample(stream, n_samples),
                        obj.theta.boundary_points(stream, max(1, n_samples // 10)),
                        obj.theta.default_point()[None, :]])
    g = obj.grad(x)
    return 1.1 * float(np.sqrt(np.max(np.einsum("...i,...i->...", g, g))))


def check_gradient(obj: Objective, n_points: int, stream: RandomStream, step: float = 1e-5):
    """Max relative error between ``obj.grad`` and central differences at interior points."""
    x = obj.theta.sample(stream, n_points)
    # shrink towards the interior
    anchor = obj.theta.project(x.mean(axis=0))
    x = anchor + 0.9 * (x - anchor)
    g = obj.grad(x)
    fd = np.empty_like(g)
    for i in range(obj.d):
        e = np.zeros(obj.d)
        e[i] = step
        fd[:, i] = (obj.f(x + e) - obj.f(x - e)) / (2 * step)
    scale = np.maximum(1.0, np.linalg.norm(g, axis=-1))
    return float(np.max(np.linalg.norm(g - fd, axis=-1) / scale))
