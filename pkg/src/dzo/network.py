"""Communication graphs and Metropolis mixing matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError, ConnectivityError, NumericalError, ShapeError
from .rand import RandomStream

__all__ = [
    "GRAPH_KINDS",
    "GraphTopology",
    "MixingMatrix",
    "build_topology",
    "metropolis_matrix",
    "spectral_gap",
    "rho_bound",
    "check_mixing",
]

GRAPH_KINDS = ("complete", "ring", "path", "grid", "erdos_renyi")
ER_MAX_TRIES = 100


@dataclass(frozen=True)
class GraphTopology:
    """Undirected simple graph on nodes ``0..n-1``; edges stored as ``(i, j)`` with ``i < j``."""

    n: int
    edges: frozenset
    kind: str

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def neighbors(self, i: int) -> list[int]:
        return sorted({j for a, b in self.edges for j in (a, b) if i in (a, b) and j != i})

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        ncomp, _ = connected_components(csr_matrix(self.adjacency()), directed=False)
        return ncomp == 1


def _edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


def build_topology(kind: str, n: int, param: float | None = None,
                   stream: RandomStream | None = None) -> GraphTopology:
    """Connected graph of family ``kind`` on ``n`` nodes.

    ``param`` is the edge probability for ``erdos_renyi``; the graph is
    resampled (up to 100 times) until connected.
    """
    n = int(n)
    if n < 1:
        raise ConfigError(f"graph needs n >= 1, got {n}")
    if kind == "complete":
        edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    elif kind == "ring":
        edges = {_edge(i, (i + 1) % n) for i in range(n)} if n > 1 else set()
        edges.discard((0, 0))
    elif kind == "path":
        edges = {(i, i + 1) for i in range(n - 1)}
    elif kind == "grid":
        m = math.isqrt(n)
        if m * m != n:
            raise ShapeError(f"grid graph needs a square node count, got {n}")
        edges = set()
        for r in range(m):
            for c in range(m):
                v = r * m + c
                if c + 1 < m:
                    edges.add((v, v + 1))
                if r + 1 < m:
                    edges.add((v, v + m))
    elif kind == "erdos_renyi":
        if param is None or not (0.0 < param <= 1.0):
            raise ConfigError(f"erdos_renyi needs edge probability in (0, 1], got {param}")
        if stream is None:
            raise ConfigError("erdos_renyi needs a random stream")
        iu, ju = np.triu_indices(n, k=1)
        for _ in range(ER_MAX_TRIES):
            keep = stream.rng.random(iu.size) < param
            g = GraphTopology(n, frozenset(zip(iu[keep].tolist(), ju[keep].tolist())), kind)
            if g.is_connected():
                return g
        raise ConnectivityError(
            f"erdos_renyi(n={n}, p={param}) still disconnected after {ER_MAX_TRIES} draws")
    else:
        raise ConfigError(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")
    g = GraphTopology(n, frozenset(edges), kind)
    if not g.is_connected():
        raise ConnectivityError(f"{kind} graph on {n} nodes is disconnected")
    return g


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic consensus matrix and its spectral quantity ``rho``."""

    W: np.ndarray = field(repr=False)
    rho: float
    complete: bool = False

    @property
    def n(self) -> int:
        return self.W.shape[0]


def _is_complete(g: GraphTopology) -> bool:
    return len(g.edges) == g.n * (g.n - 1) // 2


def metropolis_matrix(g: GraphTopology) -> MixingMatrix:
    """Metropolis weights ``1 / (2 max(d_i, d_j))`` on edges; exact averaging on complete graphs."""
    n = g.n
    if _is_complete(g):
        W = np.full((n, n), 1.0 / n)
        return MixingMatrix(W, spectral_gap(W), complete=True)
    deg = g.degrees()
    W = np.zeros((n, n))
    for i, j in g.edges:
        w = 1.0 / (2.0 * max(deg[i], deg[j]))
        W[i, j] = W[j, i] = w
    # sum off-diagonals in a fixed order so the row sums are reproducible
    W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    return MixingMatrix(W, spectral_gap(W), complete=False)


def spectral_gap(W) -> float:
    """``rho = ||W - 11^T/n||_2``, the largest |eigenvalue| of W off the consensus direction."""
    W = W.W if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)
    n = W.shape[0]
    M = W - np.full((n, n), 1.0 / n)
    M = 0.5 * (M + M.T)
    try:
        eig = np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("eigen-solver failed to converge") from exc
    return float(np.max(np.abs(eig)))


def rho_bound(n: int) -> float:
    """Connectivity bound ``1 - 1/(71 n^2)`` for Metropolis matrices."""
    return 1.0 - 1.0 / (71.0 * n * n)


def check_mixing(g: GraphTopology, mix: MixingMatrix, tol: float = 1e-12) -> dict:
    """Evaluate every MixingMatrix invariant against its graph."""
    W = mix.W
    n = g.n
    adj = g.adjacency()
    off = ~np.eye(n, dtype=bool)
    sym_err = float(np.max(np.abs(W - W.T)))
    row_err = float(np.max(np.abs(W.sum(axis=1) - 1.0)))
    col_err = float(np.max(np.abs(W.sum(axis=0) - 1.0)))
    sparsity_ok = bool(np.all(W[off & ~adj] == 0.0)) if not mix.complete else True
    bound = rho_bound(n)
    return {
        "kind": g.kind,
        "n": n,
        "symmetry_error": sym_err,
        "row_sum_error": row_err,
        "col_sum_error": col_err,
        "nonnegative": bool(np.all(W >= 0.0)),
        "sparsity_ok": sparsity_ok,
        "rho": mix.rho,
        "rho_bound": bound,
        "stochastic_ok": sym_err <= tol and row_err <= tol and col_err <= tol,
        "rho_ok": bool(0.0 <= mix.rho < bound) if n > 1 else mix.rho == 0.0,
        "complete_exact": (mix.rho == 0.0) if mix.complete else None,
    }
