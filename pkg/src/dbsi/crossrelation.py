"""Cross-relation (CR) matrices.

For frames ``x_p`` of a set of nodes the instantaneous CR matrix ``Q`` has
diagonal blocks ``sum_{l != p} x_l x_l^T`` and off-diagonal blocks
``Q_pq = -x_q x_p^T`` so that

    h^T Q h = sum_{p<q} (x_p^T h_q - x_q^T h_p)^2 .

Each unordered pair is counted once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


def _as_frame_matrix(frames, node_list=None) -> np.ndarray:
    if isinstance(frames, Mapping):
        if node_list is None:
            node_list = sorted(frames)
        rows = [np.asarray(frames[j], dtype=float) for j in node_list]
        lengths = {r.shape for r in rows}
        if len(lengths) > 1:
            raise ValueError(f"frames have mismatched shapes {sorted(lengths)}")
        return np.vstack(rows) if rows else np.zeros((0, 0))
    X = np.asarray(frames, dtype=float)
    if X.ndim != 2:
        raise ValueError("frames must be a (nodes, L) array or a node->frame mapping")
    if node_list is not None:
        X = X[list(node_list)]
    return X


def cr_instantaneous(frames, node_list: Sequence[int] | None = None) -> np.ndarray:
    X = _as_frame_matrix(frames, node_list)
    k, L = X.shape
    S = X.T @ X
    # -B with B[p, a, q, b] = x_q[a] x_p[b]
    Q = np.multiply.outer(X, -X).transpose(2, 1, 0, 3).copy()
    for p in range(k):
        Q[p, :, p, :] += S
    return Q.reshape(k * L, k * L)


def cr_error_sum(frames, h) -> float:
    """``sum_{p<q} (x_p^T h_q - x_q^T h_p)^2`` by explicit double loop."""
    X = np.asarray(frames, dtype=float)
    H = np.asarray(h, dtype=float).reshape(X.shape)
    total = 0.0
    for p in range(X.shape[0]):
        for q in range(p + 1, X.shape[0]):
            total += (X[p] @ H[q] - X[q] @ H[p]) ** 2
    return total


def local_cr_update(P: np.ndarray, frames, lam: float) -> np.ndarray:
    """Exponentially weighted update ``lam * P + (1 - lam) * Q``."""
    if not (0.0 < lam <= 1.0):
        raise ValueError(f"forgetting factor must lie in (0, 1], got {lam}")
    Q = cr_instantaneous(frames)
    if Q.shape != P.shape:
        raise ValueError(f"P has shape {P.shape} but the frames give {Q.shape}")
    if lam == 1.0:
        return P.copy()
    # elementwise ops keep a symmetric P exactly symmetric
    return lam * P + (1.0 - lam) * Q


@dataclass
class LocalCRMatrix:
    """Recursive CR estimate owned by one node over its sorted neighborhood."""

    owner: int
    neighborhood: tuple[int, ...]
    L: int
    lam: float = 0.999
    eps: float = 1e-6
    P: np.ndarray = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0):
            raise ValueError(f"forgetting factor must lie in (0, 1], got {self.lam}")
        d = len(self.neighborhood) * self.L
        self.P = self.eps * np.eye(d)

    def block_of(self, j: int) -> slice:
        pos = self.neighborhood.index(j)
        return slice(pos * self.L, (pos + 1) * self.L)

    def update(self, frames) -> np.ndarray:
        X = _as_frame_matrix(frames, self.neighborhood if isinstance(frames, Mapping) else None)
        if self.lam == 1.0:
            return self.P
        Q = cr_instantaneous(X)
        self.P *= self.lam
        Q *= 1.0 - self.lam
        self.P += Q
        return self.P


def global_cr_accumulate(R: np.ndarray | None, frames) -> np.ndarray:
    Q = cr_instantaneous(frames)
    if R is None:
        return Q
    return R + Q


def global_cr_matrix(frames: np.ndarray) -> np.ndarray:
    """Sum of instantaneous CR matrices over ``frames`` shaped ``(T, M, L)``.

    Uses per-channel Gram matrices instead of a loop over frames.
    """
    F = np.asarray(frames, dtype=float)
    T, M, L = F.shape
    if T == 0:
        return np.zeros((M * L, M * L))
    G = np.einsum("tpa,tqb->pqab", F, F)  # G[p, q] = sum_t x_p x_q^T
    R = np.zeros((M, L, M, L))
    total = G[np.arange(M), np.arange(M)].sum(axis=0)
    for p in range(M):
        R[p, :, p, :] = total - G[p, p]
        for q in range(M):
            if q != p:
                R[p, :, q, :] = -G[q, p]
    return R.reshape(M * L, M * L)


def batch_oracle_estimate(R: np.ndarray, degenerate_tol: float = 1e-10) -> tuple[np.ndarray, bool]:
    """Unit eigenvector of the smallest eigenvalue of ``R``.

    The sign is fixed so that the first nonzero entry is positive.  The flag
    reports a (numerically) repeated smallest eigenvalue, in which case the
    minimizer is not unique.
    """
    R = 0.5 * (np.asarray(R, dtype=float) + np.asarray(R, dtype=float).T)
    vals, vecs = np.linalg.eigh(R)
    h = vecs[:, 0].copy()
    nz = np.flatnonzero(np.abs(h) > 1e-14)
    if nz.size and h[nz[0]] < 0:
        h = -h
    scale = max(np.max(np.abs(vals)), 1e-300)
    degenerate = len(vals) > 1 and (vals[1] - vals[0]) <= degenerate_tol * scale
    return h, bool(degenerate)
