"""Query-noise models.

The noise is drawn from streams carrying the ``"noise"`` purpose tag, so it is
independent of the ``r``/``zeta`` randomisation by construction.  It need not
be zero-mean or independent across time: the deterministic kinds are
adversarial sequences fixed before the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, SequenceExhaustedError
from .rand import RandomStream

__all__ = ["NOISE_KINDS", "NOISE_PURPOSE", "NoiseModel", "sample_noise", "noise_block", "noise_stream"]

NOISE_KINDS = ("zero", "gaussian", "uniform", "sign_alternating", "constant_bias", "precommitted_sequence")
NOISE_PURPOSE = "noise"
_WHICH = {"first": 0, "second": 1}


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "zero"
    sigma: float = 0.0
    sequence: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ConfigError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ConfigError("noise sigma must be finite and >= 0")
        if self.kind == "precommitted_sequence":
            if self.sequence is None:
                raise ConfigError("precommitted_sequence noise needs a sequence payload")
            seq = np.asarray(self.sequence, dtype=float)
            # rows are time steps; optional trailing axes (agent, query) broadcast
            if seq.ndim == 0 or seq.ndim > 3:
                raise ConfigError("noise sequence must have 1 to 3 axes (time[, agent[, query]])")
            if np.any(np.abs(seq) > self.sigma + 1e-15):
                raise ConfigError("every precommitted noise value must satisfy |xi| <= sigma")
            object.__setattr__(self, "sequence", seq)

    @property
    def deterministic(self) -> bool:
        return self.kind in ("zero", "sign_alternating", "constant_bias", "precommitted_sequence")


def noise_stream(master_seed: int, *parts) -> RandomStream:
    return RandomStream(master_seed, (NOISE_PURPOSE,) + parts)


def _lookup(model: NoiseModel, t: np.ndarray, agent: np.ndarray, which: np.ndarray) -> np.ndarray:
    seq = model.sequence
    if np.any(t > seq.shape[0]):
        raise SequenceExhaustedError(
            f"precommitted noise has {seq.shape[0]} steps, asked for t={int(np.max(t))}")
    if seq.ndim >= 2 and np.any(agent >= seq.shape[1]):
        raise SequenceExhaustedError("precommitted noise has fewer agents than requested")
    if seq.ndim == 1:
        return seq[t - 1]
    if seq.ndim == 2:
        return seq[t - 1, agent]
    return seq[t - 1, agent, which]


def noise_block(model: NoiseModel, t_values, n_agents: int, stream: RandomStream | None) -> np.ndarray:
    """Noise for a block of time steps: array ``(len(t_values), n_agents, 2)``.

    The last axis holds the two queries (``xi`` and ``xi'``).
    """
    t = np.asarray(t_values, dtype=np.int64)
    shape = (t.size, n_agents, 2)
    if np.any(t < 1):
        raise ConfigError("noise is defined for t >= 1")
    s = model.sigma
    if model.kind == "zero":
        return np.zeros(shape)
    if model.kind == "gaussian":
        return s * stream.rng.standard_normal(shape)
    if model.kind == "uniform":
        w = s * math.sqrt(3.0)
        return stream.rng.uniform(-w, w, size=shape)
    if model.kind == "constant_bias":
        return np.full(shape, s)
    tt = t[:, None, None]
    ag = np.arange(n_agents)[None, :, None]
    if model.kind == "sign_alternating":
        return np.broadcast_to(s * (1.0 - 2.0 * ((tt + ag) % 2)), shape).astype(float)
    wh = np.arange(2)[None, None, :]
    tt, ag, wh = np.broadcast_arrays(tt, ag, wh)
    return _lookup(model, tt, ag, wh).astype(float)


def sample_noise(model: NoiseModel, t: int, agent: int, which: str, stream: RandomStream | None) -> float:
    """Single noise value for query ``which`` (``"first"``/``"second"``) of ``agent`` at time ``t``.

    Random kinds consume one draw from ``stream``.
    """
    if t < 1:
        raise ConfigError("noise is defined for t >= 1")
    k = _WHICH[which]
    s = model.sigma
    if model.kind == "zero":
        return 0.0
    if model.kind == "gaussian":
        return float(s * stream.rng.standard_normal())
    if model.kind == "uniform":
        w = s * math.sqrt(3.0)
        return float(stream.rng.uniform(-w, w))
    if model.kind == "constant_bias":
        return float(s)
    if model.kind == "sign_alternating":
        return float(s if (t + agent) % 2 == 0 else -s)
    return float(_lookup(model, np.array(t), np.array(agent), np.array(k)))
