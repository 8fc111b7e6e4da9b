"""Directed spreading graphs: moralization, covers, and neighbor queries.

Nodes are dense integer ids ``0..n-1``.  A directed edge ``(j, i)`` is read
as "j can transmit to i".  Graph values are immutable after construction and
safe to share across threads; time-varying transmission/healing parameters
live outside the graph (see :mod:`episteer.simulate`).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

import numpy as np

from .errors import CoverViolation


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpreadingGraph:
    """Directed graph with per-node in/out adjacency indexes.

    ``edges`` is canonicalized to a lexicographically sorted tuple; this
    order also defines the layout of per-edge parameter arrays elsewhere.
    """

    node_count: int
    edges: tuple

    def __post_init__(self):
        n = int(self.node_count)
        if n < 1:
            raise ValueError("node_count must be positive")
        object.__setattr__(self, "node_count", n)
        canon = []
        seen = set()
        for e in self.edges:
            j, i = int(e[0]), int(e[1])
            if j == i:
                raise ValueError(f"self-loop on node {j}")
            if not (0 <= j < n and 0 <= i < n):
                raise ValueError(f"edge ({j}, {i}) outside node range 0..{n - 1}")
            if (j, i) in seen:
                raise ValueError(f"duplicate edge ({j}, {i})")
            seen.add((j, i))
            canon.append((j, i))
        canon.sort()
        object.__setattr__(self, "edges", tuple(canon))

    @cached_property
    def edge_index(self) -> dict:
        """Map (source, target) -> position in the canonical edge order."""
        return {e: k for k, e in enumerate(self.edges)}

    @cached_property
    def in_neighbors(self) -> tuple:
        """``in_neighbors[i]``: array of sources j with an edge (j, i)."""
        nbrs = [[] for _ in range(self.node_count)]
        for j, i in self.edges:
            nbrs[i].append(j)
        return tuple(_frozen(np.array(v, dtype=np.int64)) for v in nbrs)

    @cached_property
    def out_neighbors(self) -> tuple:
        """``out_neighbors[j]``: array of targets i with an edge (j, i)."""
        nbrs = [[] for _ in range(self.node_count)]
        for j, i in self.edges:
            nbrs[j].append(i)
        return tuple(_frozen(np.array(v, dtype=np.int64)) for v in nbrs)

    @cached_property
    def in_edge_ids(self) -> tuple:
        """``in_edge_ids[i]``: edge ids of (j, i), aligned with ``in_neighbors[i]``."""
        ids = [[] for _ in range(self.node_count)]
        for k, (j, i) in enumerate(self.edges):
            ids[i].append(k)
        return tuple(_frozen(np.array(v, dtype=np.int64)) for v in ids)

    @cached_property
    def d_max(self) -> int:
        """Maximum in-degree over all nodes."""
        return max(len(v) for v in self.in_neighbors)

    def __repr__(self):
        return f"SpreadingGraph(n={self.node_count}, edges={len(self.edges)})"


@dataclass(frozen=True, eq=False)
class MoralGraph:
    """Undirected graph; edges stored as sorted (u, v) pairs with u < v."""

    node_count: int
    edges: tuple

    def __post_init__(self):
        n = int(self.node_count)
        if n < 1:
            raise ValueError("node_count must be positive")
        canon = set()
        for e in self.edges:
            u, v = int(e[0]), int(e[1])
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) outside node range 0..{n - 1}")
            canon.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    def __repr__(self):
        return f"MoralGraph(n={self.node_count}, edges={len(self.edges)})"


@dataclass(frozen=True, eq=False)
class ObserverSet:
    """Subset of nodes whose compartments are revealed every step."""

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool).copy()
        object.__setattr__(self, "mask", _frozen(mask))

    @classmethod
    def from_members(cls, node_count: int, members: Iterable[int]) -> "ObserverSet":
        mask = np.zeros(node_count, dtype=bool)
        for i in members:
            i = int(i)
            if not (0 <= i < node_count):
                raise ValueError(f"observer id {i} outside node range 0..{node_count - 1}")
            mask[i] = True
        return cls(mask)

    @property
    def node_count(self) -> int:
        return self.mask.size

    @property
    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, i) -> bool:
        return bool(self.mask[int(i)])

    def __repr__(self):
        return f"ObserverSet({list(self.members)})"


def moralize(g: SpreadingGraph) -> MoralGraph:
    """Drop edge directions and connect every pair of co-parents.

    Two distinct nodes become adjacent when one transmits to the other, or
    when both transmit to a common target.
    """
    pairs = set()
    for j, i in g.edges:
        pairs.add((min(j, i), max(j, i)))
    for k in range(g.node_count):
        parents = g.in_neighbors[k]
        for a in range(len(parents)):
            for b in range(a + 1, len(parents)):
                u, v = int(parents[a]), int(parents[b])
                pairs.add((min(u, v), max(u, v)))
    return MoralGraph(g.node_count, tuple(sorted(pairs)))


def is_vertex_cover(m: MoralGraph, o: ObserverSet) -> bool:
    """True iff every edge of ``m`` has at least one endpoint in ``o``."""
    if o.node_count != m.node_count:
        raise ValueError("observer mask length does not match graph")
    mask = o.mask
    return all(mask[u] or mask[v] for u, v in m.edges)


def approx_min_cover(m: MoralGraph) -> ObserverSet:
    """Greedy maximal-matching cover: at most twice the minimum cover size.

    Deterministic: edges are scanned in their canonical sorted order and both
    endpoints of every matched edge enter the cover.
    """
    mask = np.zeros(m.node_count, dtype=bool)
    for u, v in m.edges:
        if not mask[u] and not mask[v]:
            mask[u] = True
            mask[v] = True
    return ObserverSet(mask)


def unobserved_in_neighbor(g: SpreadingGraph, o: ObserverSet, i) -> Optional[int]:
    """The unique unobserved in-neighbor of observed node ``i``, if any.

    When the observer set covers the moralized graph, an observed node can
    have at most one unobserved in-neighbor; finding two means the cover
    precondition was violated.
    """
    i = int(i)
    found = None
    for j in g.in_neighbors[i]:
        if not o.mask[j]:
            if found is not None:
                raise CoverViolation(
                    f"node {i} has at least two unobserved in-neighbors "
                    f"({found} and {int(j)}); observer set is not a cover",
                    node=i,
                )
            found = int(j)
    return found
