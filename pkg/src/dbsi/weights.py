"""Doubly stochastic averaging matrices with graph sparsity.

Two closed-form constructions stand in for the semidefinite FDLA optimum:
best-constant edge weights ``W = I - alpha * Lap`` and Metropolis-Hastings
weights.  Both are symmetric, respect the sparsity pattern of the adjacency
matrix and have convergence factor below one on connected graphs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dbsi.errors import TopologyError
from dbsi.topology import Topology, is_connected


@dataclass(frozen=True)
class WeightMatrix:
    W: np.ndarray
    topology: Topology
    kind: str
    convergence_factor: float

    def row(self, i: int) -> dict[int, float]:
        """Nonzero-pattern weights of node ``i`` keyed by neighbor index."""
        return {j: float(self.W[i, j]) for j in self.topology.neighborhoods[i]}

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.W >= 0.0))


def convergence_factor(W) -> float:
    """Spectral norm of ``W - 11^T/M`` via symmetric eigen-decomposition."""
    W = W.W if isinstance(W, WeightMatrix) else np.asarray(W, dtype=float)
    M = W.shape[0]
    D = W - np.full((M, M), 1.0 / M)
    D = 0.5 * (D + D.T)
    return float(np.max(np.abs(np.linalg.eigvalsh(D))))


def _require_connected(topology: Topology):
    if not is_connected(topology):
        raise TopologyError(
            f"averaging needs a connected graph; components: {topology.components()}"
        )


def _finish(W: np.ndarray, topology: Topology, kind: str) -> WeightMatrix:
    W = 0.5 * (W + W.T)
    W[topology.adjacency == 0] = 0.0
    # exact row sums: absorb rounding into the diagonal
    W[np.diag_indices_from(W)] += 1.0 - W.sum(axis=1)
    W.setflags(write=False)
    return WeightMatrix(W, topology, kind, convergence_factor(W))


def best_constant_weights(topology: Topology) -> WeightMatrix:
    _require_connected(topology)
    M = topology.M
    if M == 1:
        return _finish(np.ones((1, 1)), topology, "best_constant")
    lap_eigs = np.linalg.eigvalsh(topology.laplacian())
    lam_max = lap_eigs[-1]
    # smallest nonzero eigenvalue is the second one for a connected graph
    lam_min = lap_eigs[1]
    alpha = 2.0 / (lam_min + lam_max)
    W = np.eye(M) - alpha * topology.laplacian()
    return _finish(W, topology, "best_constant")


def metropolis_weights(topology: Topology) -> WeightMatrix:
    _require_connected(topology)
    M = topology.M
    W = np.zeros((M, M))
    for i in range(M):
        for j in topology.neighbors(i, include_self=False):
            W[i, j] = 1.0 / (1.0 + max(topology.degree(i), topology.degree(j)))
        W[i, i] = 1.0 - W[i].sum()
    return _finish(W, topology, "metropolis")


def averaging_weights(topology: Topology, kind: str = "best_constant") -> tuple[WeightMatrix, bool]:
    """Weights for the norm estimator; returns ``(weights, fell_back)``.

    Best-constant weights can put a negative weight on the diagonal for some
    graphs, which breaks nonnegativity of the averaged squared norms.  In that
    case Metropolis weights are used instead and the fallback is reported.
    """
    if kind == "metropolis":
        return metropolis_weights(topology), False
    if kind != "best_constant":
        raise ValueError(f"unknown weights kind {kind!r}")
    wm = best_constant_weights(topology)
    if wm.nonnegative:
        return wm, False
    return metropolis_weights(topology), True


def uniform_weights(topology: Topology) -> WeightMatrix:
    """``ones/M``; only valid on the complete graph."""
    M = topology.M
    if int(topology.adjacency.sum()) != M * M:
        raise TopologyError("uniform weights need a fully connected topology")
    return _finish(np.full((M, M), 1.0 / M), topology, "uniform")
