"""Strategy graphs and the discrete calculus on them.

Index convention
----------------
Strategies are numbered ``1..n`` wherever a human writes them down: the
``edge_list`` argument of :func:`build_graph`, run-config files and column
names in exported files. Everything that lives in a numpy array is
0-based, so ``rho[0]`` is strategy 1 and ``StrategyGraph.edges`` holds
0-based pairs ``(i, j)`` with ``i < j``.
"""
from __future__ import annotations

from collections import deque
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AntisymmetryError,
    DimensionError,
    DisconnectedGraphError,
    GraphError,
    IndexRangeError,
    SelfLoopError,
)

ANTISYMMETRY_TOL = 1e-12


class StrategyGraph:
    """Undirected, connected graph on ``n`` strategies.

    Immutable after construction. Edges are kept in a canonical order
    (lexicographic on 0-based ``(i, j)``, ``i < j``); ``edge_i`` and
    ``edge_j`` are the matching index arrays used by the numerical kernels.
    """

    __slots__ = ("n", "edges", "labels", "neighbors", "edge_i", "edge_j", "_index")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]], labels=None):
        canon = sorted({(min(i, j), max(i, j)) for i, j in edges})
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", tuple(canon))
        if labels is not None:
            labels = tuple(str(s) for s in labels)
            if len(labels) != n:
                raise DimensionError(f"expected {n} labels, got {len(labels)}")
        object.__setattr__(self, "labels", labels)
        nbrs = [[] for _ in range(n)]
        for i, j in canon:
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "neighbors", tuple(tuple(sorted(a)) for a in nbrs))
        ei = np.array([e[0] for e in canon], dtype=np.intp)
        ej = np.array([e[1] for e in canon], dtype=np.intp)
        ei.setflags(write=False)
        ej.setflags(write=False)
        object.__setattr__(self, "edge_i", ei)
        object.__setattr__(self, "edge_j", ej)
        object.__setattr__(self, "_index", {e: k for k, e in enumerate(canon)})

    def __setattr__(self, name, value):
        raise AttributeError("StrategyGraph is immutable")

    def __repr__(self):
        return f"StrategyGraph(n={self.n}, edges={len(self.edges)})"

    def __eq__(self, other):
        return (
            isinstance(other, StrategyGraph)
            and self.n == other.n
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.n, self.edges))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def edge_index(self, i: int, j: int) -> tuple[int, int]:
        """Return ``(k, sign)`` for the 0-based ordered pair ``(i, j)``.

        ``sign`` is +1 when ``(i, j)`` matches the canonical orientation.
        """
        if i < j:
            return self._index[(i, j)], 1
        return self._index[(j, i)], -1

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._index

    def is_complete(self) -> bool:
        return self.num_edges == self.n * (self.n - 1) // 2

    def to_spec(self) -> dict:
        """Config-file representation (1-based)."""
        if self.is_complete():
            return {"type": "complete"}
        return {"type": "edges", "edges": [[i + 1, j + 1] for i, j in self.edges]}


def _is_connected(n: int, edges: Sequence[tuple[int, int]]) -> bool:
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return all(seen)


def build_graph(n: int, edge_list, labels=None) -> StrategyGraph:
    """Validate a 1-based edge list and build the graph.

    Duplicate pairs (in either orientation) collapse to one edge.

    Raises
    ------
    IndexRangeError
        A vertex outside ``1..n``.
    SelfLoopError
        A pair ``{i, i}``.
    DisconnectedGraphError
        Some strategy cannot be reached from strategy 1.
    """
    if int(n) != n or n < 2:
        raise GraphError(f"need at least 2 strategies, got n={n}")
    n = int(n)
    edges = []
    for pair in edge_list:
        pair = tuple(pair)
        if len(pair) != 2:
            raise GraphError(f"edge {pair!r} is not a pair")
        i, j = pair
        for v in (i, j):
            if int(v) != v or not 1 <= v <= n:
                raise IndexRangeError(f"vertex {v!r} in edge {pair!r} outside 1..{n}")
        if i == j:
            raise SelfLoopError(f"self-loop on strategy {i}")
        edges.append((int(i) - 1, int(j) - 1))
    if not _is_connected(n, edges):
        raise DisconnectedGraphError(f"graph on {n} strategies is not connected")
    return StrategyGraph(n, edges, labels)


def complete_graph(n: int, labels=None) -> StrategyGraph:
    if int(n) != n or n < 2:
        raise GraphError(f"need at least 2 strategies, got n={n}")
    n = int(n)
    return StrategyGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)], labels)


class EdgeFlux:
    """Function on ordered edges, stored densely once per direction.

    ``forward[k]`` is the value on canonical edge ``k = (i, j)`` (``i < j``)
    and ``backward[k]`` the value on ``(j, i)``.
    """

    __slots__ = ("graph", "forward", "backward")

    def __init__(self, graph: StrategyGraph, forward, backward=None):
        forward = np.asarray(forward, dtype=float)
        if forward.shape != (graph.num_edges,):
            raise DimensionError(
                f"flux needs {graph.num_edges} edge values, got shape {forward.shape}"
            )
        backward = -forward if backward is None else np.asarray(backward, dtype=float)
        if backward.shape != forward.shape:
            raise DimensionError("forward/backward flux arrays differ in shape")
        self.graph = graph
        self.forward = forward
        self.backward = backward

    @classmethod
    def from_matrix(cls, graph: StrategyGraph, m) -> "EdgeFlux":
        """Read an ``n x n`` array; entries off the edge set are ignored."""
        m = np.asarray(m, dtype=float)
        if m.shape != (graph.n, graph.n):
            raise DimensionError(f"expected ({graph.n}, {graph.n}) matrix, got {m.shape}")
        return cls(graph, m[graph.edge_i, graph.edge_j], m[graph.edge_j, graph.edge_i])

    def __getitem__(self, ij):
        i, j = ij
        k, sign = self.graph.edge_index(i, j)
        return self.forward[k] if sign > 0 else self.backward[k]

    def to_matrix(self) -> np.ndarray:
        m = np.zeros((self.graph.n, self.graph.n))
        m[self.graph.edge_i, self.graph.edge_j] = self.forward
        m[self.graph.edge_j, self.graph.edge_i] = self.backward
        return m

    def antisymmetry_defect(self) -> float:
        if self.forward.size == 0:
            return 0.0
        return float(np.max(np.abs(self.forward + self.backward)))


def _node_function(graph: StrategyGraph, values, name="node function") -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (graph.n,):
        raise DimensionError(f"{name} must have length {graph.n}, got shape {values.shape}")
    return values


def gradient(graph: StrategyGraph, phi) -> EdgeFlux:
    """Discrete gradient ``phi_i - phi_j`` on every ordered edge."""
    phi = _node_function(graph, phi)
    fwd = phi[graph.edge_i] - phi[graph.edge_j]
    return EdgeFlux(graph, fwd, -fwd)


def divergence(graph: StrategyGraph, m: EdgeFlux) -> np.ndarray:
    """``div(m)_i = -sum_{j in N(i)} m_ij``.

    Raises :class:`AntisymmetryError` if ``m_ij + m_ji`` exceeds 1e-12 on
    any edge.
    """
    if m.graph != graph:
        raise DimensionError("flux belongs to a different graph")
    defect = m.antisymmetry_defect()
    if defect > ANTISYMMETRY_TOL:
        raise AntisymmetryError(f"flux is not antisymmetric (max |m_ij + m_ji| = {defect:.3e})")
    out = np.zeros(graph.n)
    np.add.at(out, graph.edge_i, -m.forward)
    np.add.at(out, graph.edge_j, -m.backward)
    return out


def laplacian(graph: StrategyGraph, weights) -> np.ndarray:
    """Weighted graph Laplacian ``D - W`` for symmetric per-edge weights."""
    weights = np.asarray(weights, dtype=float)
    lap = np.zeros((graph.n, graph.n))
    lap[graph.edge_i, graph.edge_j] = -weights
    lap[graph.edge_j, graph.edge_i] = -weights
    lap[np.diag_indices(graph.n)] = -lap.sum(axis=1)
    return lap
