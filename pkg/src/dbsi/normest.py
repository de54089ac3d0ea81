"""Distributed adaptive estimation of the network-wide squared-norm sum.

Each node keeps an averaging variable ``phi``.  Per frame it blends the
instantaneous neighborhood estimate ``eta`` into the value carried over
from the previous frame with a mixing factor ``gamma``, then runs ``K``
synchronous averaging iterations ``phi <- W phi`` with its neighbors.
``M * phi`` estimates ``sum_j ||hbar_j||^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from dbsi import bus as _bus
from dbsi.errors import EstimatorDivergence

ETA_FLOOR = 1e-12


@dataclass
class EstimatorState:
    """Scalars of one node's norm estimator."""

    phi: float = 0.0
    eta: float = 0.0
    eta_prev: float = 1.0
    gamma: float = 0.0


@dataclass(frozen=True)
class GammaMode:
    kind: str = "adaptive"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("adaptive", "fixed"):
            raise ValueError(f"gamma mode must be 'adaptive' or 'fixed', got {self.kind!r}")
        if self.kind == "fixed" and not (0.0 <= self.value <= 1.0):
            raise ValueError(f"fixed gamma must lie in [0, 1], got {self.value}")

    @classmethod
    def parse(cls, spec) -> "GammaMode":
        """Accepts ``"adaptive"``, a number, or ``"fixed(0.1)"``."""
        if isinstance(spec, GammaMode):
            return spec
        if isinstance(spec, (int, float)):
            return cls("fixed", float(spec))
        s = str(spec).strip()
        if s == "adaptive":
            return cls("adaptive")
        if s.startswith("fixed(") and s.endswith(")"):
            return cls("fixed", float(s[6:-1]))
        raise ValueError(f"cannot parse gamma mode {spec!r}")

    def __str__(self):
        return "adaptive" if self.kind == "adaptive" else f"fixed({self.value:g})"


def instantaneous_eta(i: int, sq_norms: Mapping[int, float], w_row: Mapping[int, float],
                      mode: str = "neighborhood") -> float:
    """Weighted in-neighborhood sum of squared norms.

    ``mode="local"`` uses the node's own squared norm for every neighbor
    (the formula read literally), which reduces to ``||hbar_i||^2``.
    """
    if mode == "neighborhood":
        missing = [j for j in w_row if j not in sq_norms]
        if missing:
            raise KeyError(f"node {i} is missing squared norms from {missing}")
        return float(sum(w_row[j] * sq_norms[j] for j in sorted(w_row)))
    if mode == "local":
        own = sq_norms[i]
        return float(sum(w_row[j] * own for j in sorted(w_row)))
    raise ValueError(f"unknown eta mode {mode!r}")


def adaptive_gamma(eta: float, eta_prev: float) -> float:
    """``min(|eta - eta_prev| / eta_prev, 1)`` with ``eta_prev`` floored at 1e-12."""
    denom = max(eta_prev, ETA_FLOOR)
    return min(abs(eta - eta_prev) / denom, 1.0)


def mix_initial(phi_prev: float | None, eta: float, gamma: float, n: int,
                own_sq_norm: float | None = None) -> float:
    """Starting value of this frame's averaging iterations.

    Frame 0 starts from the node's own squared norm; later frames use the
    convex combination ``gamma * eta + (1 - gamma) * phi_prev``.
    """
    if n == 0:
        if own_sq_norm is None:
            raise ValueError("frame 0 needs the node's own squared norm")
        return float(own_sq_norm)
    return float(gamma * eta + (1.0 - gamma) * phi_prev)


def averaging_sweep(phi0: Mapping[int, float] | np.ndarray, weights, K: int, bus=None) -> dict[int, float]:
    """``K`` synchronous iterations ``phi_i <- sum_j W_ij phi_j``.

    With a bus, every iteration exchanges the current values with the
    neighbors (tag ``phi-iterate``) and each node combines only what it
    received plus its own value.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    topo = weights.topology
    phi = {i: float(phi0[i]) for i in range(topo.M)}
    rows = [weights.row(i) for i in range(topo.M)]
    for k in range(K):
        if bus is not None:
            for i in range(topo.M):
                bus.to_neighbors(i, _bus.PHI_ITERATE, phi[i], k=k)
            bus.barrier()
            new = {}
            for i in range(topo.M):
                got = dict(bus.inbox(i, _bus.PHI_ITERATE))
                got[i] = phi[i]
                new[i] = sum(rows[i][j] * got[j] for j in sorted(rows[i]))
        else:
            new = {i: sum(rows[i][j] * phi[j] for j in sorted(rows[i])) for i in range(topo.M)}
        phi = new
    return phi


def global_norm_sq(M: int, phi_K: float, node: int | None = None, frame: int | None = None) -> float:
    """Scaled estimate ``M * phi_i(K)``; nonpositive or non-finite values raise."""
    est = M * phi_K
    if not np.isfinite(est) or est <= 0.0:
        where = "" if node is None else f" at node {node}"
        when = "" if frame is None else f", frame {frame}"
        raise EstimatorDivergence(f"norm estimate {est!r}{where}{when} is not positive")
    return est


class NormEstimator:
    """Network-wide driver of the per-node estimator states for one frame."""

    def __init__(self, weights, K: int = 1, gamma=GammaMode(), eta_mode: str = "neighborhood"):
        if K < 1:
            raise ValueError("K must be at least 1")
        if eta_mode not in ("neighborhood", "local"):
            raise ValueError(f"unknown eta mode {eta_mode!r}")
        self.weights = weights
        self.K = int(K)
        self.gamma = GammaMode.parse(gamma)
        self.eta_mode = eta_mode
        self.M = weights.topology.M
        self.states = [EstimatorState() for _ in range(self.M)]
        self._rows = [weights.row(i) for i in range(self.M)]

    def step(self, n: int, own_sq_norms: Mapping[int, float], bus=None) -> dict[int, float]:
        """Run one frame; returns ``M * phi_i(K)`` per node."""
        topo = self.weights.topology
        if self.eta_mode == "neighborhood" and bus is not None:
            for i in range(self.M):
                bus.to_neighbors(i, _bus.NORM_SCALAR, own_sq_norms[i])
            bus.barrier()
        phi0 = {}
        for i in range(self.M):
            st = self.states[i]
            if self.eta_mode == "neighborhood":
                if bus is not None:
                    known = dict(bus.inbox(i, _bus.NORM_SCALAR))
                    known[i] = own_sq_norms[i]
                else:
                    known = {j: own_sq_norms[j] for j in topo.neighborhoods[i]}
            else:
                known = {i: own_sq_norms[i]}
            st.eta = instantaneous_eta(i, known, self._rows[i], self.eta_mode)
            if self.gamma.kind == "adaptive":
                st.gamma = adaptive_gamma(st.eta, st.eta_prev)
            else:
                st.gamma = self.gamma.value
            phi0[i] = mix_initial(st.phi, st.eta, st.gamma, n, own_sq_norm=own_sq_norms[i])
            st.eta_prev = st.eta
        phi = averaging_sweep(phi0, self.weights, self.K, bus)
        out = {}
        for i in range(self.M):
            self.states[i].phi = phi[i]
            out[i] = global_norm_sq(self.M, phi[i], node=i, frame=n)
        return out
