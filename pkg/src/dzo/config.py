"""Experiment configuration: schema, parsing, hashing and problem assembly.

A configuration is a JSON object.  Unknown keys are rejected at every level
and all schema errors are reported together.  Minimal example::

    {"T": 1000, "n": 4, "d": 2,
     "graph": {"kind": "ring"},
     "objective": {"kind": "quadratic", "alpha": 1, "Lbar": 4},
     "schedule": {"kind": "strongly_convex_pl"}}
"""

from __future__ import annotations

import hashlib
import json
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .hard import make_hard_instance
from .kernel import build_legendre_kernel
from .network import build_topology, metropolis_matrix
from .noise import NoiseModel
from .objectives import (Ball, Box, Objective, make_affine, make_constant, make_holder_probe,
                         make_least_squares, make_logistic, make_quadratic)
from .optimizer import Problem, Schedule, record_times
from .rand import RandomStream

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "config_hash",
    "canonical_json",
    "build_objective",
    "build_problem",
    "record_grid",
    "sweep_seeds",
]


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GraphSpec(_Spec):
    kind: Literal["complete", "ring", "path", "grid", "erdos_renyi"] = "complete"
    p: Optional[float] = Field(default=None, gt=0, le=1)
    seed: int = 0

    @model_validator(mode="after")
    def _need_p(self):
        if self.kind == "erdos_renyi" and self.p is None:
            raise ValueError("graph.p is required for erdos_renyi")
        return self


class ObjectiveSpec(_Spec):
    kind: Literal["quadratic", "least_squares", "logistic", "holder_probe",
                  "hard_instance", "constant", "affine"]
    seed: int = 0
    # quadratic
    alpha: float = Field(default=1.0, gt=0)
    Lbar: float = Field(default=4.0, gt=0)
    spectrum: Optional[List[float]] = None
    xstar: Optional[List[float]] = None
    # least squares / logistic: explicit data or a generated design
    A: Optional[List[List[float]]] = None
    y: Optional[List[float]] = None
    m: Optional[int] = Field(default=None, ge=1)
    singular_values: Optional[List[float]] = None
    # affine / constant
    c: Optional[List[float]] = None
    b: float = 0.0
    value: float = 0.0
    # hard instance: +1/-1 per coordinate
    omega: Optional[List[int]] = None


class ThetaSpec(_Spec):
    kind: Literal["ball", "box"]
    center: Optional[List[float]] = None
    radius: float = Field(default=1.0, gt=0)
    lo: Optional[List[float]] = None
    hi: Optional[List[float]] = None


class NoiseSpec(_Spec):
    kind: Literal["zero", "gaussian", "uniform", "sign_alternating", "constant_bias",
                  "precommitted_sequence"] = "zero"
    sigma: float = Field(default=0.0, ge=0)
    sequence: Optional[list] = None


class ScheduleSpec(_Spec):
    kind: Literal["strongly_convex_pl", "improved_beta2", "custom"] = "strongly_convex_pl"
    alpha: Optional[float] = Field(default=None, gt=0)
    eta0: float = Field(default=1.0, gt=0)
    eta_power: float = Field(default=1.0, ge=0)
    h0: float = Field(default=1.0, gt=0)
    h_power: float = Field(default=0.25, ge=0)


class InitSpec(_Spec):
    kind: Literal["shared", "uniform"] = "shared"
    point: Optional[List[float]] = None


class RecordSpec(_Spec):
    every: Optional[int] = Field(default=None, ge=1)
    log_spaced: bool = True
    points: int = Field(default=200, ge=2)


class ExperimentConfig(_Spec):
    seed: int = 0
    T: int = Field(ge=1)
    n: int = Field(ge=1)
    d: int = Field(ge=1)
    graph: GraphSpec = GraphSpec()
    beta: float = Field(default=2.0, gt=1)
    estimator: Literal["kernel", "plain_beta2"] = "kernel"
    objective: ObjectiveSpec
    theta: Optional[ThetaSpec] = None
    noise: NoiseSpec = NoiseSpec()
    schedule: ScheduleSpec = ScheduleSpec()
    init: InitSpec = InitSpec()
    record: RecordSpec = RecordSpec()
    seeds: Optional[Union[int, List[int]]] = None

    @model_validator(mode="after")
    def _semantics(self):
        errs = []
        if self.estimator == "plain_beta2" and self.beta != 2:
            errs.append(f"estimator plain_beta2 requires beta = 2 (got beta = {self.beta})")
        o, d = self.objective, self.d
        for name in ("xstar", "c", "omega"):
            v = getattr(o, name)
            if v is not None and len(v) != d:
                errs.append(f"objective.{name} must have d = {d} entries")
        if o.spectrum is not None and len(o.spectrum) != d:
            errs.append(f"objective.spectrum must have d = {d} entries")
        if o.kind == "affine" and o.c is None:
            errs.append("objective.c is required for affine objectives")
        if o.kind == "least_squares" and o.A is None and o.singular_values is None:
            errs.append("least_squares needs objective.A and objective.y, or objective.singular_values")
        if o.A is not None and any(len(row) != d for row in o.A):
            errs.append(f"every row of objective.A must have d = {d} entries")
        if o.kind == "least_squares" and o.A is not None and (o.y is None or len(o.y) != len(o.A)):
            errs.append("objective.y must have one entry per row of objective.A")
        if o.omega is not None and any(w not in (-1, 1) for w in o.omega):
            errs.append("objective.omega entries must be +1 or -1")
        if o.kind == "holder_probe" and self.beta != int(self.beta):
            errs.append("holder_probe needs an integer beta")
        if self.theta is not None:
            t = self.theta
            if o.kind == "hard_instance":
                errs.append("hard_instance fixes its own feasible box; omit theta")
            if t.kind == "ball" and t.center is not None and len(t.center) != d:
                errs.append(f"theta.center must have d = {d} entries")
            if t.kind == "box" and (t.lo is None or t.hi is None or len(t.lo) != d or len(t.hi) != d):
                errs.append(f"box theta needs lo and hi with d = {d} entries")
        if self.init.point is not None and len(self.init.point) != d:
            errs.append(f"init.point must have d = {d} entries")
        if self.init.kind == "uniform" and self.init.point is not None:
            errs.append("init.point only applies to shared init")
        if self.noise.kind == "precommitted_sequence" and self.noise.sequence is None:
            errs.append("noise.sequence is required for precommitted_sequence")
        if self.graph.kind == "grid" and round(self.n ** 0.5) ** 2 != self.n:
            errs.append(f"grid graphs need a square number of agents (got n = {self.n})")
        if errs:
            raise ValueError("; ".join(errs))
        return self


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{loc}: {e['msg']}")
    return "invalid configuration:\n  " + "\n  ".join(lines)


def parse_config(text: str | dict) -> ExperimentConfig:
    """Validate a JSON document (text or already-decoded object); all schema errors are reported."""
    if isinstance(text, (str, bytes)):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    else:
        data = text
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def canonical_json(cfg: ExperimentConfig, **overrides) -> str:
    data = cfg.model_dump(mode="json", exclude={"seeds"})
    data.update(overrides)
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: ExperimentConfig, **overrides) -> str:
    """SHA-256 of the canonical JSON of the run-defining fields (seed included, ``seeds`` excluded)."""
    return hashlib.sha256(canonical_json(cfg, **overrides).encode()).hexdigest()


def _theta(cfg: ExperimentConfig):
    t, d = cfg.theta, cfg.d
    if t is None:
        return None
    if t.kind == "ball":
        return Ball(np.zeros(d) if t.center is None else np.array(t.center, dtype=float), t.radius)
    return Box(np.array(t.lo, dtype=float), np.array(t.hi, dtype=float))


def _orthonormal(rows: int, cols: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def _design(o: ObjectiveSpec, d: int, stream: RandomStream) -> np.ndarray:
    if o.A is not None:
        return np.array(o.A, dtype=float)
    rng = stream.child("design").rng
    if o.singular_values is None:
        m = o.m or 2 * d
        return rng.standard_normal((m, d)) / np.sqrt(d)
    s = np.array(o.singular_values, dtype=float)
    k = s.size
    if k > d or np.any(s <= 0):
        raise ConfigError("objective.singular_values must be positive with at most d entries")
    m = o.m or 2 * d
    if m < k:
        raise ConfigError("objective.m must be at least the number of singular values")
    U = _orthonormal(m, k, rng)
    V = _orthonormal(d, k, rng)
    return (U * s) @ V.T


def build_objective(cfg: ExperimentConfig) -> Objective:
    """Objective (and its feasible set) described by ``cfg.objective`` and ``cfg.theta``."""
    o, d = cfg.objective, cfg.d
    stream = RandomStream(o.seed, ("objective",))
    theta = _theta(cfg)
    if o.kind == "quadratic":
        return make_quadratic(d, o.alpha, o.Lbar, o.xstar, theta, stream, o.spectrum)
    if o.kind == "least_squares":
        A = _design(o, d, stream)
        if o.y is not None:
            y = np.array(o.y, dtype=float)
        else:
            # consistent system: y in the range of A, minimiser drawn inside the unit ball
            x0 = np.array(o.xstar, dtype=float) if o.xstar is not None else \
                0.5 * stream.child("target").rng.uniform(-1, 1, d) / np.sqrt(d)
            y = A @ x0
        if theta is None:
            theta = Ball(np.zeros(d), 1.0)
        return make_least_squares(A, y, theta, stream)
    if o.kind == "logistic":
        return make_logistic(_design(o, d, stream), theta, stream)
    if o.kind == "holder_probe":
        return make_holder_probe(int(cfg.beta), d, theta)
    if o.kind == "hard_instance":
        omega = np.ones(d) if o.omega is None else np.array(o.omega, dtype=float)
        return make_hard_instance(d, cfg.beta, o.alpha, cfg.T, omega)[1]
    if o.kind == "constant":
        return make_constant(d, o.value, theta)
    return make_affine(np.array(o.c, dtype=float), o.b, theta)


def build_problem(cfg: ExperimentConfig) -> Problem:
    obj = build_objective(cfg)
    topo = build_topology(cfg.graph.kind, cfg.n, cfg.graph.p, RandomStream(cfg.graph.seed, ("graph",)))
    mix = metropolis_matrix(topo)
    s = cfg.schedule
    alpha = s.alpha if s.alpha is not None else obj.alpha
    if alpha is None and s.kind != "custom":
        raise ConfigError(f"schedule.alpha is required: objective {obj.name!r} has no known PL constant")
    sched = Schedule(s.kind, float(alpha) if alpha is not None else 1.0, float(cfg.beta), cfg.d,
                     s.eta0, s.eta_power, s.h0, s.h_power)
    nz = cfg.noise
    noise = NoiseModel(nz.kind, nz.sigma, None if nz.sequence is None else np.array(nz.sequence, dtype=float))
    kernel = build_legendre_kernel(cfg.beta) if cfg.estimator == "kernel" else None
    point = None if cfg.init.point is None else np.array(cfg.init.point, dtype=float)
    return Problem(obj, topo, mix, sched, noise, cfg.estimator, kernel, cfg.init.kind, point)


def record_grid(cfg: ExperimentConfig) -> np.ndarray:
    """Recording times: ``record.every`` if set, else log-spaced, else every step."""
    r = cfg.record
    if r.every is not None:
        return record_times(cfg.T, r.every)
    if r.log_spaced:
        return record_times(cfg.T, None, r.points)
    return record_times(cfg.T, 1)


def sweep_seeds(cfg: ExperimentConfig, k: Optional[int] = None) -> list[int]:
    """Seeds for a sweep: an explicit list from the config, else ``seed, seed+1, ..., seed+k-1``."""
    if isinstance(cfg.seeds, list):
        seeds = list(cfg.seeds)
        if k is not None and k != len(seeds):
            raise ConfigError(f"--seeds {k} disagrees with the {len(seeds)} seeds listed in the config")
    else:
        k = k if k is not None else cfg.seeds
        if k is None:
            raise ConfigError("sweep needs a seed count")
        seeds = [cfg.seed + i for i in range(int(k))]
    if len(seeds) < 2:
        raise ConfigError("a sweep needs at least 2 seeds")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("sweep seeds must be distinct")
    return seeds
