"""Lower-bound function family f_omega used as stress objectives.

Each coordinate contributes ``phi_tau(x) = A tau sin(c x) + penalty(x)`` where
``A = h^(2(beta-1)) / alpha_tilde`` and ``c = (2 sqrt(6)/3) alpha_bar h^(1-beta)``
so that ``c a = pi/6`` on the box ``[0, a]``.  The penalty is ``x^(2 beta)`` left
of 0, zero on ``[0, a]`` and ``(x - a)^(2 beta)`` right of ``a``.

The closed-form optimum that accompanies the construction does not survive
direct evaluation, so optima are computed numerically and the closed-form
values are carried alongside for comparison.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as spopt

from .errors import ConfigError
from .objectives import Box, Objective, verify_pl
from .rand import RandomStream

__all__ = [
    "HardInstance",
    "HardOptimum",
    "make_hard_instance",
    "hard_instance_optimum",
    "hard_instance_gradient_profile",
    "seam_checks",
    "hard_check",
]

GRID_POINTS = 10_000


@dataclass(frozen=True)
class HardInstance:
    d: int
    beta: float
    alpha: float
    T: int
    omega: np.ndarray = field(repr=False)

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float).reshape(-1)
        if omega.size != self.d or not np.all(np.isin(omega, (-1.0, 1.0))):
            raise ConfigError("omega must be a vector of d entries in {-1, +1}")
        if not self.alpha > 0 or self.beta < 2 or self.T < 1 or self.d < 1:
            raise ConfigError("hard instance needs alpha > 0, beta >= 2, T >= 1, d >= 1")
        object.__setattr__(self, "omega", omega)

    @property
    def alpha_tilde(self) -> float:
        return min(self.alpha, self.alpha**2)

    @property
    def alpha_bar(self) -> float:
        return min(self.alpha, self.alpha**1.5)

    @property
    def h(self) -> float:
        return float(self.T) ** (-1.0 / (2.0 * self.beta))

    @property
    def a(self) -> float:
        return math.pi * math.sqrt(6.0) / 24.0 * self.h ** (self.beta - 1.0) / self.alpha_bar

    @property
    def amplitude(self) -> float:
        return self.h ** (2.0 * (self.beta - 1.0)) / self.alpha_tilde

    @property
    def frequency(self) -> float:
        return 2.0 * math.sqrt(6.0) / 3.0 * self.alpha_bar * self.h ** (1.0 - self.beta)

    @property
    def theta(self) -> Box:
        return Box(np.zeros(self.d), np.full(self.d, self.a))

    # per-coordinate pieces; x broadcasts against tau
    def piece(self, which: int, x, tau):
        x = np.asarray(x, dtype=float)
        wave = tau * self.amplitude * np.sin(self.frequency * x)
        if which == 1:
            return x ** (2 * self.beta) + wave
        if which == 2:
            return wave
        return (x - self.a) ** (2 * self.beta) + wave

    def piece_deriv(self, which: int, x, tau):
        x = np.asarray(x, dtype=float)
        dwave = tau * self.amplitude * self.frequency * np.cos(self.frequency * x)
        if which == 1:
            return 2 * self.beta * x ** (2 * self.beta - 1) + dwave
        if which == 2:
            return dwave
        return 2 * self.beta * (x - self.a) ** (2 * self.beta - 1) + dwave

    def phi(self, x, tau):
        x = np.asarray(x, dtype=float)
        left = np.minimum(x, 0.0)
        right = np.maximum(x - self.a, 0.0)
        # x^(2 beta) vanishes at 0, (x-a)^(2 beta) at a: the clamped form equals the piecewise one
        return left ** (2 * self.beta) + right ** (2 * self.beta) + tau * self.amplitude * np.sin(self.frequency * x)

    def phi_deriv(self, x, tau):
        x = np.asarray(x, dtype=float)
        left = np.minimum(x, 0.0)
        right = np.maximum(x - self.a, 0.0)
        p = 2 * self.beta
        return (p * left ** (p - 1) + p * right ** (p - 1)
                + tau * self.amplitude * self.frequency * np.cos(self.frequency * x))

    def f(self, x):
        return np.sum(self.phi(x, self.omega), axis=-1)

    def grad(self, x):
        return self.phi_deriv(x, self.omega)

    def closed_form_gradient(self, x):
        """Closed-form gradient on the box (cosine form)."""
        x = np.asarray(x, dtype=float)
        coef = (2.0 * math.sqrt(6.0) / 3.0) * (self.alpha_bar / self.alpha_tilde) * self.h ** (self.beta - 1.0)
        return self.omega * coef * np.cos(self.frequency * x)

    def closed_form_optimum(self) -> tuple[np.ndarray, float]:
        """Closed-form minimiser and minimum value as stated with the construction."""
        xs = (1.0 - self.omega) / 2.0 * self.a
        fs = -float(np.sum((1.0 - self.omega) / (4.0 * self.alpha_tilde))) * self.h ** (2.0 * (self.beta - 2.0))
        return xs, fs


def make_hard_instance(d: int, beta: float, alpha: float, T: int, omega) -> tuple[HardInstance, Objective]:
    """Build the instance and its :class:`Objective` on the box ``[0, a]^d``.

    The objective carries the optimum over the box (the feasible set) from
    :func:`hard_instance_optimum`.
    """
    inst = HardInstance(int(d), float(beta), float(alpha), int(T), omega)
    opt = hard_instance_optimum(inst)
    obj = Objective(
        name="hard_instance", d=inst.d, f=inst.f, grad=inst.grad, theta=inst.theta,
        cls="gradient_dominant", xstar=opt.x_box, fstar=opt.f_box, alpha=inst.alpha,
        beta=inst.beta, Lbar=None, G=1.1 * math.sqrt(inst.d) * abs(inst.amplitude * inst.frequency),
        info={"instance": inst, "optimum": opt},
    )
    return inst, obj


@dataclass(frozen=True)
class HardOptimum:
    x_box: np.ndarray
    f_box: float
    x_global: np.ndarray
    f_global: float
    x_closed: np.ndarray
    f_closed: float

    @property
    def box_discrepancy(self) -> float:
        return self.f_closed - self.f_box

    @property
    def exponent_flag(self) -> bool:
        """True when the closed-form minimum disagrees with the numerical box optimum."""
        return abs(self.box_discrepancy) > 1e-8 * max(1.0, abs(self.f_box))

    def as_dict(self) -> dict:
        return {
            "x_box": self.x_box.tolist(), "f_box": self.f_box,
            "x_global": self.x_global.tolist(), "f_global": self.f_global,
            "x_closed": self.x_closed.tolist(), "f_closed": self.f_closed,
            "closed_minus_box": self.box_discrepancy, "closed_form_disagrees": self.exponent_flag,
        }


def _min_1d(func, lo: float, hi: float, n_grid: int = GRID_POINTS) -> tuple[float, float]:
    grid = np.linspace(lo, hi, n_grid)
    vals = func(grid)
    k = int(np.argmin(vals))
    best_x, best_f = float(grid[k]), float(vals[k])
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    if b > a:
        res = spopt.minimize_scalar(lambda z: float(func(np.array(z))), bounds=(a, b),
                                    method="bounded", options={"xatol": 1e-12})
        if res.fun < best_f:
            best_x, best_f = float(res.x), float(res.fun)
    return best_x, best_f


def hard_instance_optimum(inst: HardInstance) -> HardOptimum:
    """Per-coordinate numerical minima over the box ``[0, a]`` and over ``[-1, 4a]``.

    The bracket is widened to ``[-4a, 4a]`` when ``4a > 1`` so that the first
    trough of the sine on either side of the box is always covered.
    """
    xb, fb, xg, fg = [], 0.0, [], 0.0
    cache = {}
    for tau in np.unique(inst.omega):
        box = _min_1d(lambda z: inst.phi(z, tau), 0.0, inst.a)
        glob = _min_1d(lambda z: inst.phi(z, tau), min(-1.0, -4.0 * inst.a), 4.0 * inst.a)
        # never report a bracket minimum worse than the box one
        if box[1] < glob[1]:
            glob = box
        cache[float(tau)] = (box, glob)
    for tau in inst.omega:
        box, glob = cache[float(tau)]
        xb.append(box[0])
        fb += box[1]
        xg.append(glob[0])
        fg += glob[1]
    xp, fp = inst.closed_form_optimum()
    return HardOptimum(np.array(xb), float(fb), np.array(xg), float(fg), xp, fp)


def hard_instance_gradient_profile(inst: HardInstance, n_points: int = 100, step: float = 1e-6) -> dict:
    """Closed-form gradient on the box versus central differences; max norm over the box."""
    t = np.linspace(0.0, inst.a, n_points)
    pts = np.repeat(t[:, None], inst.d, axis=1)
    formula = inst.closed_form_gradient(pts)
    fd = np.empty_like(formula)
    for i in range(inst.d):
        e = np.zeros(inst.d)
        e[i] = step
        fd[:, i] = (inst.f(pts + e) - inst.f(pts - e)) / (2.0 * step)
    norms = np.linalg.norm(formula, axis=1)
    return {
        "max_abs_diff": float(np.max(np.abs(formula - fd))),
        "max_abs_diff_exact": float(np.max(np.abs(formula - inst.grad(pts)))),
        "max_grad_norm": float(norms.max()),
    }


def seam_checks(inst: HardInstance, eps: float = 1e-7) -> dict:
    """Value and derivative continuity of the pieces at 0 and ``a``, for both signs."""
    out = {}
    for tau in (-1.0, 1.0):
        for name, x, left, right in (("0", 0.0, 1, 2), ("a", inst.a, 2, 3)):
            dv = abs(inst.piece(left, x, tau) - inst.piece(right, x, tau))
            dd = abs(inst.piece_deriv(left, x, tau) - inst.piece_deriv(right, x, tau))
            # one-sided numerical slopes straddling the seam through the assembled function
            lo = (inst.phi(x, tau) - inst.phi(x - eps, tau)) / eps
            hi = (inst.phi(x + eps, tau) - inst.phi(x, tau)) / eps
            out[f"tau={int(tau)},x={name}"] = {
                "value_jump": float(dv), "derivative_jump": float(dd),
                "numeric_slope_jump": float(abs(hi - lo)),
            }
    return out


def hard_check(beta: float, alpha: float, T: int, d: int, omega=None, n_pl: int = 10_000,
               seed: int = 0, tol_seam: float = 1e-8, tol_grad: float = 1e-6) -> dict:
    """All integrity checks for one hard instance, as a JSON-ready dict with a ``pass`` flag."""
    omega = -np.ones(d) if omega is None else np.asarray(omega, dtype=float)
    inst, obj = make_hard_instance(d, beta, alpha, T, omega)
    opt = obj.info["optimum"]
    seams = seam_checks(inst)
    seam_ok = all(v["value_jump"] <= tol_seam and v["derivative_jump"] <= tol_seam
                  for v in seams.values())
    prof = hard_instance_gradient_profile(inst)
    grad_ok = prof["max_abs_diff"] <= tol_grad
    pl_ratio = verify_pl(obj, alpha, n_pl, RandomStream(seed, ("hard", "pl")))
    plus_inst, plus_obj = make_hard_instance(d, beta, alpha, T, np.ones(d))
    plus_opt = plus_obj.info["optimum"]
    plus_ok = bool(np.all(plus_opt.x_box == 0.0) and plus_opt.f_box == 0.0)
    sep = _separability_error(inst)
    return {
        "beta": beta, "alpha": alpha, "T": T, "d": d, "omega": omega.tolist(),
        "h": inst.h, "a": inst.a,
        "seams": seams, "seam_ok": seam_ok,
        "gradient_profile": prof, "gradient_ok": grad_ok,
        "optimum": opt.as_dict(),
        "omega_plus": {"x_box": plus_opt.x_box.tolist(), "f_box": plus_opt.f_box,
                       "f_global": plus_opt.f_global, "ok": plus_ok},
        "pl_ratio_diagnostic": pl_ratio,
        "separability_error": sep,
        "pass": bool(seam_ok and grad_ok and plus_ok and sep <= 1e-12),
    }


def _separability_error(inst: HardInstance) -> float:
    rng = np.random.default_rng(0)
    x = rng.uniform(-0.5 * inst.a, 1.5 * inst.a, size=(50, inst.d))
    total = inst.f(x)
    parts = np.zeros(50)
    zero_row = inst.f(np.zeros(inst.d))
    for i in range(inst.d):
        e = np.zeros_like(x)
        e[:, i] = x[:, i]
        parts += inst.f(e)
    return float(np.max(np.abs(total - (parts - (inst.d - 1) * zero_row))))
