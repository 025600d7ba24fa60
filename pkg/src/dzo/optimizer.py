"""Synchronous distributed zero-order projected gradient loop.

At step ``t`` (starting at 1) every agent ``i`` draws ``r`` and ``zeta``,
queries two noisy values around its iterate ``x^i(t)``, forms an estimate
``g^i(t)`` and then all agents update in lockstep from the same snapshot::

    x^i(t+1) = Proj_Theta( sum_j W_ij (x^j(t) - eta_t g^j(t)) )

Randomness is keyed by ``(seed, purpose, block)`` where a block is
``BLOCK_STEPS`` consecutive steps.  Each block is drawn in full, so the value
used by agent ``i`` at time ``t`` depends only on ``(seed, purpose, t, i)``
and not on the horizon, on the other seeds simulated alongside, or on the
evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DivergenceError, ScheduleError, ShapeError
from .estimator import two_point
from .kernel import Kernel
from .metrics import TRACE_COLUMNS, Trace, consensus_error
from .network import GraphTopology, MixingMatrix
from .noise import NoiseModel, noise_block, noise_stream
from .objectives import Objective, ProjectionSet
from .rand import RandomStream, sample_interval, sample_sphere

__all__ = [
    "SCHEDULE_KINDS",
    "ESTIMATORS",
    "Schedule",
    "schedule_values",
    "consensus_step",
    "Problem",
    "record_times",
    "initial_states",
    "simulate",
    "RunResult",
    "run",
]

SCHEDULE_KINDS = ("strongly_convex_pl", "improved_beta2", "custom")
ESTIMATORS = ("kernel", "plain_beta2")
BLOCK_STEPS = 1024
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class Schedule:
    """Step size and perturbation schedule.

    ``custom`` uses ``eta_t = eta0 * t^(-eta_power)`` and ``h_t = h0 * t^(-h_power)``.
    """

    kind: str
    alpha: float
    beta: float = 2.0
    d: int = 1
    eta0: float = 1.0
    eta_power: float = 1.0
    h0: float = 1.0
    h_power: float = 0.25

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if self.kind != "custom" and not self.alpha > 0:
            raise ConfigError("schedule needs alpha > 0")
        if self.kind == "custom" and (self.eta0 <= 0 or self.h0 <= 0 or self.eta_power < 0 or self.h_power < 0):
            raise ConfigError("custom schedule needs eta0, h0 > 0 and nonnegative powers")


def schedule_values(s: Schedule, t):
    """``(eta_t, h_t)`` for ``t >= 1`` (scalars or arrays)."""
    ta = np.asarray(t, dtype=float)
    if np.any(ta < 1):
        raise ScheduleError("schedules are defined for t >= 1")
    if s.kind == "strongly_convex_pl":
        eta = 2.0 / (s.alpha * ta)
        h = ta ** (-1.0 / (2.0 * s.beta))
    elif s.kind == "improved_beta2":
        eta = 1.0 / (s.alpha * ta)
        h = math.sqrt(s.d) * ta ** (-0.25)
    else:
        eta = s.eta0 * ta ** (-s.eta_power)
        h = s.h0 * ta ** (-s.h_power)
    if np.ndim(eta) == 0:
        return float(eta), float(h)
    return eta, h


def _mix(W: np.ndarray, Z: np.ndarray, complete: bool) -> np.ndarray:
    if complete:
        return np.broadcast_to(Z.mean(axis=-2, keepdims=True), Z.shape)
    # einsum's plain loops keep each output element's summation order fixed
    return np.einsum("ij,...jd->...id", W, Z)


def consensus_step(states, grads, W, eta: float, theta: ProjectionSet) -> np.ndarray:
    """``Proj(sum_j W_ij (x^j - eta g^j))`` for all agents from one snapshot.

    ``states`` and ``grads`` have shape ``(..., n, d)``; ``W`` is a
    :class:`MixingMatrix` or an ``n x n`` array.
    """
    X = np.asarray(states, dtype=float)
    G = np.asarray(grads, dtype=float)
    if isinstance(W, MixingMatrix):
        Wm, complete = W.W, W.complete
    else:
        Wm, complete = np.asarray(W, dtype=float), False
    if X.shape != G.shape or X.shape[-2] != Wm.shape[0] or Wm.shape[0] != Wm.shape[1]:
        raise ShapeError(f"states {X.shape}, grads {G.shape} and W {Wm.shape} do not match")
    return theta.project(_mix(Wm, X - eta * G, complete))


@dataclass(frozen=True)
class Problem:
    """Everything a run needs apart from the seed."""

    objective: Objective
    topology: GraphTopology
    mixing: MixingMatrix
    schedule: Schedule
    noise: NoiseModel = field(default_factory=NoiseModel)
    estimator: str = "kernel"
    kernel: Optional[Kernel] = None
    init: str = "shared"
    init_point: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.estimator == "kernel" and self.kernel is None:
            raise ConfigError("the kernel estimator needs a kernel")
        if self.init not in ("shared", "uniform"):
            raise ConfigError("init must be 'shared' or 'uniform'")

    @property
    def n(self) -> int:
        return self.topology.n

    @property
    def d(self) -> int:
        return self.objective.d


def record_times(T: int, every: Optional[int] = None, points: int = 200) -> np.ndarray:
    """Recording grid: every ``every`` steps, or ``points`` log-spaced times; always contains 1 and T."""
    if T < 1:
        raise ConfigError("T must be >= 1")
    if every is not None:
        if every < 1:
            raise ConfigError("record.every must be >= 1")
        ts = np.arange(1, T + 1, every)
    else:
        ts = np.unique(np.rint(np.logspace(0.0, math.log10(T), max(points, 2))).astype(np.int64))
    return np.unique(np.concatenate([ts, [1, T]])).astype(np.int64)


def initial_states(problem: Problem, seed: int) -> np.ndarray:
    theta = problem.objective.theta
    if problem.init == "uniform":
        return theta.sample(RandomStream(seed, ("init",)), problem.n)
    p = theta.default_point() if problem.init_point is None else np.asarray(problem.init_point, dtype=float)
    if p.shape != (problem.d,):
        raise ShapeError(f"init point must have {problem.d} coordinates")
    return np.repeat(theta.project(p)[None, :], problem.n, axis=0)


@dataclass
class RunResult:
    traces: list
    final_states: np.ndarray


def _draw_block(problem: Problem, seeds: Sequence[int], block: int, T: int):
    n, d = problem.n, problem.d
    t_idx = np.arange(block * BLOCK_STEPS + 1, (block + 1) * BLOCK_STEPS + 1)
    lookup = problem.noise.kind == "precommitted_sequence"
    zs, ws, xis = [], [], []
    for s in seeds:
        zeta = sample_sphere(RandomStream(s, ("zeta", "block", block)), d, (BLOCK_STEPS, n))
        if problem.estimator == "kernel":
            r = sample_interval(RandomStream(s, ("r", "block", block)), (BLOCK_STEPS, n))
            ws.append(problem.kernel.unchecked(r))
            zs.append((zeta, r[..., None] * zeta))
        else:
            ws.append(np.ones((BLOCK_STEPS, n)))
            zs.append((zeta, zeta))
        if lookup:
            # a deterministic sequence only has to cover the steps actually run
            xi = np.zeros((BLOCK_STEPS, n, 2))
            live = t_idx <= T
            xi[live] = noise_block(problem.noise, t_idx[live], n, None)
            xis.append(xi)
        else:
            xis.append(noise_block(problem.noise, t_idx, n, noise_stream(s, "block", block)))
    zeta = np.stack([z[0] for z in zs], axis=1)   # (B, S, n, d)
    direc = np.stack([z[1] for z in zs], axis=1)
    weight = np.stack(ws, axis=1)                 # (B, S, n)
    xi = np.stack(xis, axis=1)                    # (B, S, n, 2)
    return zeta, direc, weight, xi


def simulate(problem: Problem, seeds: Sequence[int], T: int, record: np.ndarray,
             config_hashes: Optional[Sequence[str]] = None) -> RunResult:
    """Run the distributed loop for every seed in lockstep; one :class:`Trace` per seed."""
    seeds = [int(s) for s in seeds]
    S = len(seeds)
    obj = problem.objective
    theta = obj.theta
    f, fstar = obj.f, obj.require_fstar()
    W, complete = problem.mixing.W, problem.mixing.complete
    record = np.asarray(record, dtype=np.int64)
    if record.size == 0 or record[0] < 1 or record[-1] > T:
        raise ConfigError("record times must lie in [1, T]")
    ts = np.arange(1, T + 1)
    eta_all, h_all = schedule_values(problem.schedule, ts)
    limit = DIVERGENCE_FACTOR * max(theta.diameter, 1e-300)

    X = np.stack([initial_states(problem, s) for s in seeds])   # (S, n, d)
    xhat = np.zeros((S, problem.d))
    regret = np.zeros(S)
    rows = {c: np.empty((S, record.size)) for c in TRACE_COLUMNS}
    k_rec = 0
    last_good = X.copy()
    block = -1
    for t in range(1, T + 1):
        j = (t - 1) % BLOCK_STEPS
        if j == 0:
            block += 1
            zeta, direc, weight, xi = _draw_block(problem, seeds, block, T)
            if not np.all(np.isfinite(X)) or np.max(np.abs(X.mean(axis=1))) > limit:
                raise DivergenceError(f"iterates diverged before t={t}", last_state=last_good, t=t)
            last_good = X.copy()
        eta, h = eta_all[t - 1], h_all[t - 1]
        xbar = X.mean(axis=1)
        ferr = f(xbar) - fstar
        regret = regret + ferr
        xhat = xhat + (xbar - xhat) / t
        if k_rec < record.size and record[k_rec] == t:
            rows["t"][:, k_rec] = t
            rows["eta"][:, k_rec] = eta
            rows["h"][:, k_rec] = h
            rows["f_mean_err"][:, k_rec] = ferr
            rows["f_avg_err"][:, k_rec] = f(xhat) - fstar
            rows["cum_regret"][:, k_rec] = regret
            rows["consensus_e"][:, k_rec] = consensus_error(X)
            k_rec += 1
        g = two_point(f, X, h, direc[j], zeta[j], weight[j], xi[j])
        X = theta.project(_mix(W, X - eta * g, complete))
    if not np.all(np.isfinite(X)):
        raise DivergenceError("iterates diverged", last_state=last_good, t=T)
    hashes = list(config_hashes) if config_hashes is not None else [""] * S
    traces = [Trace({c: rows[c][i] for c in TRACE_COLUMNS}, hashes[i], seeds[i]) for i in range(S)]
    return RunResult(traces, X)


def run(config) -> Trace:
    """Execute one configured run (``ExperimentConfig`` or its dict form) and return its trace."""
    from .config import ExperimentConfig, build_problem, config_hash, parse_config, record_grid

    cfg = config if isinstance(config, ExperimentConfig) else parse_config(config)
    return simulate(build_problem(cfg), [cfg.seed], cfg.T, record_grid(cfg), [config_hash(cfg)]).traces[0]
