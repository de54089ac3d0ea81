"""Online consensus-ADMM for cross-relation blind identification.

Node ``i`` holds a local stacked estimate ``w_i`` and duals ``u_i`` with one
length-``L`` block per neighbor ``j`` (sorted neighborhood order).  One frame:

1. exchange signal frames, update the local CR matrix ``P_i``;
2. primal solve ``(2 P_i + rho I) w_i = rho hhat_stack - u_i`` using the
   previous frame's normalized consensus blocks;
3. every node ``g`` averages ``(w_j)_g + (u_j)_g / rho`` over ``j in N_g``
   to get its unnormalized consensus block ``hbar_g``;
4. the network-wide ``sum_j ||hbar_j||^2`` is obtained exactly (ideal mode,
   broadcast) or estimated by the distributed norm estimator;
5. ``hhat_g = hbar_g / sqrt(estimate)`` is sent to the neighbors;
6. dual ascent ``(u_i)_j += rho ((w_i)_j - hhat_j)``.

Phases are separated by bus barriers, so node evaluation order within a
phase never changes the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from dbsi import bus as _bus
from dbsi.bus import MessageBus
from dbsi.crossrelation import LocalCRMatrix
from dbsi.errors import EstimatorDivergence
from dbsi.normest import NormEstimator
from dbsi.topology import Topology


@dataclass
class NodeState:
    node: int
    neighborhood: tuple[int, ...]
    L: int
    rho: float
    cr: LocalCRMatrix
    w: np.ndarray
    u: np.ndarray
    hbar: np.ndarray = field(default=None)
    hhat: np.ndarray = field(default=None)
    # previous normalized consensus blocks of the neighborhood, stacked
    hhat_stack: np.ndarray = field(default=None)

    @property
    def P(self) -> np.ndarray:
        return self.cr.P

    def block(self, j: int) -> slice:
        return self.cr.block_of(j)


def make_node(node: int, neighborhood: Sequence[int], L: int, rho: float,
              lam: float, init_stack: np.ndarray, eps: float = 1e-6) -> NodeState:
    """Node with ``w`` taken from ``init_stack`` (the global ``(M, L)`` init) and zero duals."""
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    nb = tuple(sorted(neighborhood))
    init = np.asarray(init_stack, dtype=float)
    local = init[list(nb)].ravel().copy()
    st = NodeState(
        node=node, neighborhood=nb, L=L, rho=float(rho),
        cr=LocalCRMatrix(node, nb, L, lam=lam, eps=eps),
        w=local.copy(), u=np.zeros_like(local),
        hbar=init[node].copy(), hhat=init[node].copy(), hhat_stack=local.copy(),
    )
    return st


def primal_update(state: NodeState, hhat_stack: np.ndarray | None = None) -> np.ndarray:
    """Minimizer of ``w^T P w + u^T (w - hhat) + rho/2 ||w - hhat||^2``."""
    hs = state.hhat_stack if hhat_stack is None else np.asarray(hhat_stack, dtype=float)
    d = hs.shape[0]
    A = 2.0 * state.P
    A[np.diag_indices(d)] += state.rho
    rhs = state.rho * hs - state.u
    state.w = np.linalg.solve(A, rhs)
    return state.w


def primal_objective(P, u, rho, hhat_stack, w) -> float:
    r = w - hhat_stack
    return float(w @ P @ w + u @ r + 0.5 * rho * r @ r)


def local_contribution(state: NodeState, g: int) -> np.ndarray:
    """Node's block for channel ``g``: ``(w)_g + (u)_g / rho``."""
    b = state.block(g)
    return state.w[b] + state.u[b] / state.rho


def consensus_aggregate(states: Sequence[NodeState] | Mapping[int, NodeState], g: int,
                        topology: Topology | None = None) -> np.ndarray:
    """``hbar_g = mean_{j in N_g} [(w_j)_g + (u_j)_g / rho]``."""
    if isinstance(states, Mapping):
        lookup = states
    else:
        lookup = {s.node: s for s in states}
    holders = topology.neighborhoods[g] if topology is not None else lookup[g].neighborhood
    acc = np.zeros(lookup[g].L)
    for j in sorted(holders):
        acc = acc + local_contribution(lookup[j], g)
    return acc / len(holders)


def normalize(state: NodeState, global_norm_sq_estimate: float) -> np.ndarray:
    if not (global_norm_sq_estimate > 0.0) or not math.isfinite(global_norm_sq_estimate):
        raise EstimatorDivergence(
            f"node {state.node}: norm estimate {global_norm_sq_estimate!r} is not positive"
        )
    state.hhat = state.hbar / math.sqrt(global_norm_sq_estimate)
    return state.hhat


def dual_update(state: NodeState, hhat_blocks: Mapping[int, np.ndarray]) -> np.ndarray:
    stack = np.concatenate([np.asarray(hhat_blocks[j], dtype=float) for j in state.neighborhood])
    state.u = state.u + state.rho * (state.w - stack)
    state.hhat_stack = stack
    return state.u


class Network:
    """All node state machines of one run plus the bus and norm estimator.

    ``mode="ideal"`` computes the exact norm sum by broadcasting squared
    norms to every node; ``mode="distributed"`` uses ``estimator``.
    """

    def __init__(self, topology: Topology, L: int, init: np.ndarray, *, rho: float = 20.0,
                 lam: float = 0.999, mode: str = "distributed",
                 estimator: NormEstimator | None = None, eps: float = 1e-6,
                 audit: bool = False, order: Sequence[int] | None = None):
        if mode not in ("ideal", "distributed"):
            raise ValueError(f"mode must be 'ideal' or 'distributed', got {mode!r}")
        if mode == "distributed" and estimator is None:
            raise ValueError("distributed mode needs a NormEstimator")
        init = np.asarray(init, dtype=float).reshape(topology.M, L)
        self.topology = topology
        self.M = topology.M
        self.L = L
        self.mode = mode
        self.estimator = estimator
        self.order = list(range(self.M)) if order is None else list(order)
        if sorted(self.order) != list(range(self.M)):
            raise ValueError("order must be a permutation of the node indices")
        tags = (_bus.NORM_SCALAR,) if mode == "ideal" else ()
        self.bus = MessageBus(topology, broadcast_tags=tags, audit=audit)
        self.nodes = [
            make_node(i, topology.neighborhoods[i], L, rho, lam, init, eps) for i in range(self.M)
        ]
        self.norm_sq_estimates = np.full(self.M, np.nan)
        self.frame = -1

    def stacked_estimate(self) -> np.ndarray:
        return np.concatenate([nd.hhat for nd in self.nodes])

    def block_norms(self) -> np.ndarray:
        return np.array([np.linalg.norm(nd.hhat) for nd in self.nodes])

    def step_frame(self, n: int, frames: np.ndarray) -> None:
        """Advance all nodes by frame ``n``; ``frames[i]`` is node ``i``'s own window."""
        bus, nodes = self.bus, self.nodes
        bus.start_frame(n)
        # signal frames
        for i in self.order:
            bus.to_neighbors(i, _bus.SIGNAL_FRAME, frames[i])
        bus.barrier()
        # CR update + primal
        for i in self.order:
            nd = nodes[i]
            got = dict(bus.inbox(i, _bus.SIGNAL_FRAME))
            got[i] = frames[i]
            X = np.vstack([got[j] for j in nd.neighborhood])
            nd.cr.update(X)
            primal_update(nd)
            for g in nd.neighborhood:
                if g != i:
                    bus.post(i, g, _bus.LOCAL_BLOCK, local_contribution(nd, g))
        bus.barrier()
        # consensus blocks
        sq = {}
        for g in self.order:
            nd = nodes[g]
            got = dict(bus.inbox(g, _bus.LOCAL_BLOCK))
            got[g] = local_contribution(nd, g)
            acc = np.zeros(self.L)
            for j in sorted(got):
                acc = acc + got[j]
            nd.hbar = acc / len(got)
            sq[g] = float(nd.hbar @ nd.hbar)
        # network-wide squared norm
        if self.mode == "ideal":
            for i in self.order:
                bus.to_all(i, _bus.NORM_SCALAR, sq[i])
            bus.barrier()
            est = {}
            for i in self.order:
                got = dict(bus.inbox(i, _bus.NORM_SCALAR))
                got[i] = sq[i]
                est[i] = math.fsum(got[j] for j in sorted(got))
        else:
            est = self.estimator.step(n, sq, bus)
        for i in self.order:
            try:
                normalize(nodes[i], est[i])
            except EstimatorDivergence as exc:
                raise EstimatorDivergence(f"frame {n}: {exc}") from None
            self.norm_sq_estimates[i] = est[i]
            bus.to_neighbors(i, _bus.CONSENSUS_BLOCK, nodes[i].hhat)
        bus.barrier()
        # dual ascent
        for i in self.order:
            got = dict(bus.inbox(i, _bus.CONSENSUS_BLOCK))
            got[i] = nodes[i].hhat
            dual_update(nodes[i], got)
        bus.end_frame()
        self.frame = n
