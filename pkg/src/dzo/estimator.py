"""Two-point zero-order gradient estimators and Monte-Carlo probes of their moments.

Kernel estimator (one agent, one step)::

    g = d / (2h) * (f(x + h r zeta) + xi - f(x - h r zeta) - xi') * K(r) * zeta

Plain estimator for beta = 2 (no kernel, no radial variable)::

    g = d / (2h) * (f(x + h zeta) + xi - f(x - h zeta) - xi') * zeta

which is an unbiased estimate of the gradient of the ball-smoothed surrogate
``E f(x + h u)``, ``u`` uniform in the unit ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, FitError
from .kernel import Kernel
from .metrics import loglog_fit
from .noise import NoiseModel, noise_block, noise_stream, sample_noise
from .objectives import Objective
from .rand import RandomStream, sample_ball, sample_interval, sample_sphere

__all__ = [
    "GradientEstimate",
    "two_point",
    "zo_gradient_kernel",
    "zo_gradient_plain",
    "surrogate_value",
    "bias_bound",
    "second_moment_bound",
    "BiasProbe",
    "probe_bias",
    "SecondMomentProbe",
    "probe_second_moment",
    "probe_mean",
]

MC_CHUNK = 100_000


@dataclass(frozen=True)
class GradientEstimate:
    g: np.ndarray
    query_points: tuple[np.ndarray, np.ndarray] = field(repr=False)
    r: float
    zeta: np.ndarray = field(repr=False)
    values: tuple[float, float] = (0.0, 0.0)


def two_point(f, x, h, direction, zeta, weight, xi):
    """Vectorised two-point estimate.

    ``x``, ``direction`` and ``zeta`` have shape ``(..., d)``; ``weight`` and the
    two noise columns ``xi[..., 0]``, ``xi[..., 1]`` have shape ``(...)``.
    The queries are ``x +/- h * direction``.
    """
    d = zeta.shape[-1]
    u = h * direction
    diff = (f(x + u) + xi[..., 0]) - (f(x - u) + xi[..., 1])
    return (d / (2.0 * h) * diff * weight)[..., None] * zeta


def _check_h(h):
    if not np.all(np.asarray(h) > 0):
        raise ConfigError(f"perturbation h must be > 0, got {h}")


def _single(obj, x, h, r, zeta, weight, noise, t, agent, seed):
    x = np.asarray(x, dtype=float)
    u = h * r * zeta
    s = noise_stream(seed, agent, t)
    xi1 = sample_noise(noise, t, agent, "first", s)
    xi2 = sample_noise(noise, t, agent, "second", s)
    y1 = float(obj.f(x + u)) + xi1
    y2 = float(obj.f(x - u)) + xi2
    g = obj.d / (2.0 * h) * (y1 - y2) * weight * zeta
    return GradientEstimate(g=g, query_points=(x + u, x - u), r=float(r), zeta=zeta, values=(y1, y2))


def zo_gradient_kernel(obj: Objective, x, h: float, k: Kernel, noise: NoiseModel, t: int, agent: int,
                       seed: int) -> GradientEstimate:
    """Kernel-smoothed estimate for ``agent`` at time ``t``; randomness keyed by ``(seed, purpose, agent, t)``."""
    _check_h(h)
    r = float(sample_interval(RandomStream(seed, ("r", agent, t))))
    zeta = sample_sphere(RandomStream(seed, ("zeta", agent, t)), obj.d)
    return _single(obj, x, h, r, zeta, k.unchecked(r), noise, t, agent, seed)


def zo_gradient_plain(obj: Objective, x, h: float, noise: NoiseModel, t: int, agent: int,
                      seed: int) -> GradientEstimate:
    """Kernel-free estimate (queries at ``x +/- h zeta``)."""
    _check_h(h)
    zeta = sample_sphere(RandomStream(seed, ("zeta", agent, t)), obj.d)
    return _single(obj, x, h, 1.0, zeta, 1.0, noise, t, agent, seed)


def surrogate_value(obj: Objective, x, h: float, n_samples: int, stream: RandomStream) -> tuple[float, float]:
    """Monte-Carlo ``E f(x + h u)``, ``u`` uniform in the unit ball; returns ``(mean, standard error)``."""
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    x = np.asarray(x, dtype=float)
    total = total2 = 0.0
    done = 0
    while done < n_samples:
        m = min(MC_CHUNK, n_samples - done)
        v = obj.f(x + h * sample_ball(stream, obj.d, m))
        total += float(v.sum())
        total2 += float((v * v).sum())
        done += m
    mean = total / n_samples
    var = max(total2 / n_samples - mean * mean, 0.0)
    return mean, math.sqrt(var / max(n_samples - 1, 1))


def bias_bound(kappa_beta: float, L: float, d: int, h, beta: float):
    """Bias envelope ``kappa_beta L d h^(beta - 1)``."""
    return kappa_beta * L * d * np.asarray(h, dtype=float) ** (beta - 1.0)


def second_moment_bound(kappa: float, d: int, grad_norm: float, Lbar: float, h, sigma: float):
    """Second-moment envelope ``9 kappa d |grad|^2 + 9 kappa Lbar d^2 h^2 / 8 + 3 kappa sigma^2 d^2 / (2 h^2)``."""
    h = np.asarray(h, dtype=float)
    return (9.0 * kappa * d * grad_norm**2
            + 9.0 * kappa * Lbar * d**2 * h**2 / 8.0
            + 3.0 * kappa * sigma**2 * d**2 / (2.0 * h**2))


def _mc_chunks(obj: Objective, x, h, kernel: Optional[Kernel], noises, n: int, seed: int, tag):
    """Yield chunks of estimates, one array ``(m, d)`` per entry of ``noises`` (common random numbers)."""
    x = np.asarray(x, dtype=float)
    block = 0
    done = 0
    while done < n:
        m = min(MC_CHUNK, n - done)
        base = (tag, block)
        zeta = sample_sphere(RandomStream(seed, ("zeta",) + base), obj.d, m)
        if kernel is None:
            direction, weight = zeta, 1.0
        else:
            r = sample_interval(RandomStream(seed, ("r",) + base), m)
            direction, weight = r[:, None] * zeta, kernel.unchecked(r)
        t_idx = np.arange(done + 1, done + m + 1)
        out = []
        for nm in noises:
            xi = noise_block(nm, t_idx, 1, noise_stream(seed, *base))[:, 0, :]
            out.append(two_point(obj.f, x, h, direction, zeta, weight, xi))
        yield out
        done += m
        block += 1


def probe_mean(obj: Objective, x, h: float, kernel: Optional[Kernel], n_mc: int, seed: int,
               noise: NoiseModel | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo mean of the estimator at ``x`` with per-coordinate standard errors."""
    _check_h(h)
    noise = noise or NoiseModel()
    s1 = np.zeros(obj.d)
    s2 = np.zeros(obj.d)
    for (g,) in _mc_chunks(obj, x, h, kernel, [noise], n_mc, seed, ("mean", float(h))):
        s1 += g.sum(axis=0)
        s2 += (g * g).sum(axis=0)
    mean = s1 / n_mc
    var = np.maximum(s2 / n_mc - mean**2, 0.0)
    return mean, np.sqrt(var / max(n_mc - 1, 1))


@dataclass(frozen=True)
class BiasProbe:
    h: np.ndarray
    bias: np.ndarray
    se: np.ndarray
    slope: float
    intercept: float
    envelope: Optional[np.ndarray] = None

    def rows(self):
        env = self.envelope if self.envelope is not None else [None] * len(self.h)
        return [{"h": float(a), "bias": float(b), "se": float(c), "envelope": None if e is None else float(e)}
                for a, b, c, e in zip(self.h, self.bias, self.se, env)]


def probe_bias(obj: Objective, x, h_list, k: Optional[Kernel], n_mc: int, seed: int) -> BiasProbe:
    """Noise-free bias ``|E g - grad f(x)|`` for each ``h`` and its log-log slope in ``h``."""
    h_arr = np.asarray(h_list, dtype=float)
    if h_arr.size < 3:
        raise FitError("bias slope needs at least 3 values of h")
    x = np.asarray(x, dtype=float)
    true = obj.grad(x)
    bias, se = [], []
    for h in h_arr:
        mean, se_c = probe_mean(obj, x, h, k, n_mc, seed)
        bias.append(float(np.linalg.norm(mean - true)))
        se.append(float(np.linalg.norm(se_c)))
    bias = np.array(bias)
    slope, intercept, _ = loglog_fit(h_arr, bias)
    env = None
    if k is not None and obj.L is not None:
        env = bias_bound(k.kappa_beta, obj.L, obj.d, h_arr, k.beta)
    return BiasProbe(h_arr, bias, np.array(se), slope, intercept, env)


@dataclass(frozen=True)
class SecondMomentProbe:
    h: float
    sigma: float
    d: int
    mean: float
    se: float
    bound: float
    noise_term: float
    noise_term_se: float

    @property
    def within_envelope(self) -> bool:
        return self.mean <= self.bound


def probe_second_moment(obj: Objective, x, h: float, sigma: float, k: Kernel, n_mc: int, seed: int,
                        kind: str = "gaussian") -> SecondMomentProbe:
    """Monte-Carlo ``E|g|^2`` with noise of level ``sigma`` and its noise-only part.

    The noise part is ``E|g_sigma|^2 - E|g_0|^2`` using common random numbers.
    """
    if n_mc < 10_000:
        raise ConfigError("second-moment probes need n_mc >= 1e4")
    _check_h(h)
    noisy = NoiseModel(kind, sigma)
    clean = NoiseModel()
    x = np.asarray(x, dtype=float)
    a1 = a2 = b1 = b2 = 0.0
    for g_s, g_0 in _mc_chunks(obj, x, h, k, [noisy, clean], n_mc, seed, ("second", float(h), float(sigma))):
        q = np.einsum("ij,ij->i", g_s, g_s)
        diff = q - np.einsum("ij,ij->i", g_0, g_0)
        a1 += float(q.sum())
        a2 += float((q * q).sum())
        b1 += float(diff.sum())
        b2 += float((diff * diff).sum())
    mean = a1 / n_mc
    nt = b1 / n_mc
    se = math.sqrt(max(a2 / n_mc - mean**2, 0.0) / (n_mc - 1))
    nt_se = math.sqrt(max(b2 / n_mc - nt**2, 0.0) / (n_mc - 1))
    gnorm = float(np.linalg.norm(obj.grad(x)))
    Lbar = obj.Lbar if obj.Lbar is not None else 0.0
    bound = float(second_moment_bound(k.kappa, obj.d, gnorm, Lbar, h, sigma))
    return SecondMomentProbe(float(h), float(sigma), obj.d, mean, se, bound, nt, nt_se)
