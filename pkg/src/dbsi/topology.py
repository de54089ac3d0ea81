"""Undirected sensor-network topologies with self-loops."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from dbsi.errors import TopologyError


@dataclass(frozen=True)
class Topology:
    """Undirected graph on nodes ``0..M-1``.

    Every node carries a self-pair ``(i, i)``; it is not a communication
    link, it only records that a node knows its own values.  Neighborhoods
    include the node itself and are sorted ascending.
    """

    node_count: int
    edges: frozenset[tuple[int, int]]
    neighborhoods: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    adjacency: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        M = self.node_count
        if M < 1:
            raise TopologyError(f"node_count must be positive, got {M}")
        C = np.zeros((M, M), dtype=np.int64)
        for i, j in self.edges:
            if not (0 <= i < M and 0 <= j < M):
                raise TopologyError(f"edge ({i}, {j}) out of range for {M} nodes")
            C[i, j] = C[j, i] = 1
        for i in range(M):
            if C[i, i] != 1:
                raise TopologyError(f"missing self-pair for node {i}")
        C.setflags(write=False)
        nbhd = tuple(tuple(int(j) for j in np.flatnonzero(C[i])) for i in range(M))
        object.__setattr__(self, "adjacency", C)
        object.__setattr__(self, "neighborhoods", nbhd)

    @property
    def M(self) -> int:
        return self.node_count

    def neighbors(self, i: int, include_self: bool = True) -> tuple[int, ...]:
        if include_self:
            return self.neighborhoods[i]
        return tuple(j for j in self.neighborhoods[i] if j != i)

    def degree(self, i: int) -> int:
        """Number of neighbors excluding the node itself."""
        return len(self.neighborhoods[i]) - 1

    def has_link(self, i: int, j: int) -> bool:
        return i != j and bool(self.adjacency[i, j])

    def laplacian(self) -> np.ndarray:
        A = self.adjacency.astype(float) - np.eye(self.M)
        return np.diag(A.sum(axis=1)) - A

    def components(self) -> list[list[int]]:
        seen = [False] * self.M
        comps = []
        for start in range(self.M):
            if seen[start]:
                continue
            stack, comp = [start], []
            seen[start] = True
            while stack:
                i = stack.pop()
                comp.append(i)
                for j in self.neighborhoods[i]:
                    if not seen[j]:
                        seen[j] = True
                        stack.append(j)
            comps.append(sorted(comp))
        return comps

    def describe(self) -> dict:
        return {
            "node_count": self.M,
            "edges": sorted([list(e) for e in self.edges if e[0] != e[1]]),
            "neighborhoods": [list(n) for n in self.neighborhoods],
        }


def _normalize(M: int, edge_list: Iterable) -> frozenset[tuple[int, int]]:
    edges = set()
    for e in edge_list:
        pair = tuple(int(v) for v in e)
        if len(pair) == 1:
            pair = (pair[0], pair[0])
        if len(pair) != 2:
            raise TopologyError(f"edge {e!r} is not a pair")
        i, j = pair
        if not (0 <= i < M and 0 <= j < M):
            raise TopologyError(f"edge {e!r} out of range for {M} nodes")
        edges.add((min(i, j), max(i, j)))
    edges.update((i, i) for i in range(M))
    return frozenset(edges)


def is_connected(topology: Topology) -> bool:
    return len(topology.components()) == 1


def build_custom(M: int, edge_list: Iterable) -> Topology:
    """Topology from an explicit list of unordered pairs; self-loops are added."""
    if M < 1:
        raise TopologyError(f"node_count must be positive, got {M}")
    topo = Topology(M, _normalize(M, edge_list))
    comps = topo.components()
    if len(comps) > 1:
        raise TopologyError(f"graph is disconnected; components: {comps}")
    return topo


def build_ring(M: int, neighbors_per_side: int = 1) -> Topology:
    """Cycle where each node links to its ``neighbors_per_side`` nearest nodes on each side.

    ``build_ring(2, 1)`` is accepted and gives the single-edge graph.
    """
    if M < 2:
        raise TopologyError(f"a ring needs at least 2 nodes, got {M}")
    if neighbors_per_side < 1:
        raise TopologyError("neighbors_per_side must be positive")
    if M == 2 and neighbors_per_side == 1:
        return build_custom(2, [(0, 1)])
    if 2 * neighbors_per_side + 1 > M:
        raise TopologyError(
            f"neighborhood of {2 * neighbors_per_side + 1} exceeds network size {M}"
        )
    edges = [(i, (i + d) % M) for i in range(M) for d in range(1, neighbors_per_side + 1)]
    return build_custom(M, edges)


def build_complete(M: int) -> Topology:
    return build_custom(M, [(i, j) for i in range(M) for j in range(i + 1, M)])
