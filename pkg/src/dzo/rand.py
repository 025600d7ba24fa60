"""Reproducible random primitives.

A :class:`RandomStream` is identified by a master seed and a label tuple such
as ``("zeta", agent, t)``.  The label is hashed into the spawn key of a
:class:`numpy.random.SeedSequence`, which seeds a counter-based Philox bit
generator.  The sequence produced by a stream therefore depends only on
``(master_seed, label)`` and never on the order in which streams are created
or consumed.
"""

from __future__ import annotations

import hashlib
from typing import Hashable, Sequence

import numpy as np

from .errors import InvalidDimensionError

__all__ = [
    "RandomStream",
    "label_key",
    "sample_interval",
    "sample_sphere",
    "sample_ball",
]

_MASK64 = (1 << 64) - 1


def _word(part: Hashable) -> int:
    if isinstance(part, (bool, np.bool_)):
        part = int(part)
    if isinstance(part, (int, np.integer)):
        # tag the word so that 3 and "3" hash apart
        payload = b"i" + int(part).to_bytes(16, "little", signed=True)
    else:
        payload = b"s" + str(part).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def label_key(label: Sequence[Hashable]) -> tuple[int, ...]:
    """Map a label tuple onto 64-bit words usable as a SeedSequence spawn key."""
    return tuple(_word(p) for p in label)


class RandomStream:
    """Independent labelled random stream derived from a master seed.

    Parameters
    ----------
    master_seed : int
        64-bit master seed of the experiment.
    label : tuple
        Purpose tag followed by any integers (agent index, time index, block
        index, ...).  Streams with distinct labels are independent.
    """

    __slots__ = ("master_seed", "label", "_rng")

    def __init__(self, master_seed: int, label: Sequence[Hashable] = ()):
        self.master_seed = int(master_seed) & _MASK64
        self.label = tuple(label)
        self._rng: np.random.Generator | None = None

    @property
    def rng(self) -> np.random.Generator:
        if self._rng is None:
            ss = np.random.SeedSequence(self.master_seed, spawn_key=label_key(self.label))
            self._rng = np.random.Generator(np.random.Philox(ss))
        return self._rng

    def child(self, *parts: Hashable) -> "RandomStream":
        """Fresh stream whose label extends this one."""
        return RandomStream(self.master_seed, self.label + tuple(parts))

    def fresh(self) -> "RandomStream":
        """Same (seed, label), rewound to the beginning of the sequence."""
        return RandomStream(self.master_seed, self.label)

    def __repr__(self) -> str:
        return f"RandomStream(master_seed={self.master_seed}, label={self.label!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RandomStream):
            return NotImplemented
        return (self.master_seed, self.label) == (other.master_seed, other.label)

    def __hash__(self) -> int:
        return hash((self.master_seed, self.label))


def _check_dim(d: int) -> int:
    d = int(d)
    if d < 1:
        raise InvalidDimensionError(f"dimension must be >= 1, got {d}")
    return d


def sample_interval(stream: RandomStream, size=None):
    """Uniform draw(s) on [-1, 1]."""
    return stream.rng.uniform(-1.0, 1.0, size=size)


def sample_sphere(stream: RandomStream, d: int, size=None) -> np.ndarray:
    """Uniform draw(s) on the unit sphere of R^d, shape ``(*size, d)``.

    Normalised standard Gaussian vectors.
    """
    d = _check_dim(d)
    shape = (d,) if size is None else tuple(np.atleast_1d(size)) + (d,)
    z = stream.rng.standard_normal(shape)
    norm = np.sqrt(np.einsum("...i,...i->...", z, z))
    # a zero Gaussian vector has probability zero; guard anyway
    while np.any(norm == 0.0):
        bad = norm == 0.0
        z[bad] = stream.rng.standard_normal((int(bad.sum()), d))
        norm = np.sqrt(np.einsum("...i,...i->...", z, z))
    return z / norm[..., None]


def sample_ball(stream: RandomStream, d: int, size=None) -> np.ndarray:
    """Uniform draw(s) in the closed unit ball of R^d, shape ``(*size, d)``."""
    d = _check_dim(d)
    u = sample_sphere(stream, d, size)
    radius = stream.rng.uniform(0.0, 1.0, size=u.shape[:-1]) ** (1.0 / d)
    return u * radius[..., None]
