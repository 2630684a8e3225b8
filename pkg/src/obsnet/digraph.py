"""Topology of directed communication graphs.

Vertices are labelled ``1..N``. An edge ``(j, i)`` points from its tail ``j``
to its head ``i``: node ``i`` receives information from node ``j``. The
Laplacian uses in-degrees, ``L = D - A`` with ``A[i, j] = 1`` iff ``(j, i)``
is an edge, so every row of ``L`` sums to zero.

A *cluster* is a maximal forward-reachable set ``reach(v)``; its *inner
subgraph* is the set of vertices that reach the whole cluster. Inner
subgraphs are exactly the source components of the SCC condensation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Digraph",
    "ClusterDecomposition",
    "SpanningTree",
    "GraphError",
    "DecompositionError",
    "laplacian",
    "reach",
    "strongly_connected_components",
    "scc_count",
    "clusters",
    "spanning_tree",
    "permuted_laplacian",
    "exact_rank",
    "numerical_rank",
    "zero_multiplicity",
    "nullspace_basis",
]


class GraphError(ValueError):
    """Invalid graph data or an invalid query against a graph."""


class DecompositionError(ArithmeticError):
    """The block decomposition produced a singular residual block."""


@dataclass(frozen=True)
class Digraph:
    """Directed graph without self-loops on vertices ``1..num_nodes``."""

    num_nodes: int
    edges: frozenset

    def __post_init__(self):
        if not isinstance(self.num_nodes, (int, np.integer)) or self.num_nodes < 1:
            raise GraphError(f"num_nodes must be a positive integer, got {self.num_nodes!r}")
        object.__setattr__(self, "num_nodes", int(self.num_nodes))
        normalized = set()
        for edge in self.edges:
            try:
                tail, head = (int(v) for v in edge)
            except (TypeError, ValueError):
                raise GraphError(f"edge {edge!r} is not a (tail, head) pair") from None
            for v in (tail, head):
                if not 1 <= v <= self.num_nodes:
                    raise GraphError(f"edge {edge!r} has endpoint {v} outside 1..{self.num_nodes}")
            if tail == head:
                raise GraphError(f"self-loop ({tail}, {head}) is not allowed")
            normalized.add((tail, head))
        object.__setattr__(self, "edges", frozenset(normalized))

    @classmethod
    def from_edges(cls, num_nodes: int, edges: Iterable[Sequence[int]]) -> "Digraph":
        """Build a graph from an edge list, rejecting duplicate edges."""
        edge_list = [tuple(int(v) for v in e) for e in edges]
        if len(set(edge_list)) != len(edge_list):
            seen, dup = set(), None
            for e in edge_list:
                if e in seen:
                    dup = e
                    break
                seen.add(e)
            raise GraphError(f"duplicate edge {dup}")
        return cls(num_nodes, frozenset(edge_list))

    @property
    def vertices(self) -> range:
        return range(1, self.num_nodes + 1)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def in_neighbors(self, i: int) -> list[int]:
        """Neighbourhood of ``i``: the tails of edges ending at ``i``."""
        return sorted(j for (j, h) in self.edges if h == i)

    def out_neighbors(self, i: int) -> list[int]:
        """Nodes that receive from ``i``."""
        return sorted(h for (t, h) in self.edges if t == i)

    def in_degree(self, i: int) -> int:
        return sum(1 for (_, h) in self.edges if h == i)

    def successors(self) -> dict[int, list[int]]:
        succ: dict[int, list[int]] = {v: [] for v in self.vertices}
        for t, h in self.sorted_edges():
            succ[t].append(h)
        return succ

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.num_nodes, self.num_nodes), dtype=np.int64)
        for t, h in self.edges:
            adj[h - 1, t - 1] = 1
        return adj

    def without_incoming(self, nodes: Iterable[int]) -> "Digraph":
        """Copy of the graph with every edge ending in ``nodes`` removed."""
        drop = set(nodes)
        return Digraph(self.num_nodes, frozenset(e for e in self.edges if e[1] not in drop))

    def to_json(self) -> dict:
        return {"num_nodes": self.num_nodes, "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_json(cls, data: dict) -> "Digraph":
        return cls.from_edges(data["num_nodes"], data["edges"])


@dataclass(frozen=True)
class ClusterDecomposition:
    """Clusters, their inner subgraphs, and the block ordering of the Laplacian.

    ``permutation[k]`` is the original label placed at position ``k``; the
    ordering lists inner subgraph 1, ..., inner subgraph l, then the residual
    vertices, each block in ascending label order.
    """

    clusters: tuple[tuple[int, ...], ...]
    inner_subgraphs: tuple[tuple[int, ...], ...]
    permutation: tuple[int, ...]
    block_sizes: tuple[int, ...]

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    @property
    def residual(self) -> tuple[int, ...]:
        return self.permutation[sum(self.block_sizes[:-1]):]

    def cluster_of_inner(self, v: int) -> int | None:
        """Index of the cluster whose inner subgraph holds ``v``, else None."""
        for k, inner in enumerate(self.inner_subgraphs):
            if v in inner:
                return k
        return None

    def to_json(self) -> dict:
        return {
            "clusters": [list(c) for c in self.clusters],
            "inner_subgraphs": [list(s) for s in self.inner_subgraphs],
            "permutation": list(self.permutation),
            "block_sizes": list(self.block_sizes),
        }


@dataclass(frozen=True)
class SpanningTree:
    root: int
    tree_edges: tuple[tuple[int, int], ...]

    def to_json(self) -> dict:
        return {"root": self.root, "edges": [list(e) for e in self.tree_edges]}


def laplacian(g: Digraph) -> np.ndarray:
    """In-degree Laplacian ``D - A`` as an integer matrix."""
    adj = g.adjacency()
    return np.diag(adj.sum(axis=1)) - adj


def _check_vertex(g: Digraph, v: int) -> None:
    if not 1 <= v <= g.num_nodes:
        raise GraphError(f"vertex {v} outside 1..{g.num_nodes}")


def _bfs(succ: dict[int, list[int]], start: int, allowed=None) -> dict[int, int | None]:
    parent: dict[int, int | None] = {start: None}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in succ[u]:
            if w not in parent and (allowed is None or w in allowed):
                parent[w] = u
                queue.append(w)
    return parent


def reach(g: Digraph, v: int) -> frozenset:
    """Vertices reachable from ``v`` along directed edges, ``v`` included."""
    _check_vertex(g, v)
    return frozenset(_bfs(g.successors(), v))


def strongly_connected_components(g: Digraph) -> list[tuple[int, ...]]:
    """Tarjan's algorithm, iterative. Components come out sorted by min label."""
    succ = g.successors()
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    components: list[tuple[int, ...]] = []
    counter = 0

    for root in g.vertices:
        if root in index:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, pos = work[-1]
            children = succ[v]
            if pos < len(children):
                work[-1] = (v, pos + 1)
                w = children[pos]
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, 0))
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                components.append(tuple(sorted(comp)))
    return sorted(components)


def scc_count(g: Digraph) -> int:
    return len(strongly_connected_components(g))


def clusters(g: Digraph) -> ClusterDecomposition:
    """Decompose ``g`` into clusters and inner subgraphs.

    Source components of the SCC condensation are the inner subgraphs; the
    forward closure of each is its cluster.
    """
    comps = strongly_connected_components(g)
    comp_of = {v: k for k, comp in enumerate(comps) for v in comp}
    has_incoming = [False] * len(comps)
    for t, h in g.edges:
        if comp_of[t] != comp_of[h]:
            has_incoming[comp_of[h]] = True
    inner = [comps[k] for k in range(len(comps)) if not has_incoming[k]]

    succ = g.successors()
    cluster_sets = [tuple(sorted(_bfs(succ, s[0]))) for s in inner]

    for members in cluster_sets:
        member_set = set(members)
        for t, h in g.edges:
            if t in member_set and h not in member_set:
                raise DecompositionError(f"edge ({t}, {h}) leaves cluster {members}")

    in_inner = {v for s in inner for v in s}
    residual = tuple(v for v in g.vertices if v not in in_inner)
    permutation = tuple(v for s in inner for v in s) + residual
    return ClusterDecomposition(
        clusters=tuple(cluster_sets),
        inner_subgraphs=tuple(inner),
        permutation=permutation,
        block_sizes=tuple(len(s) for s in inner) + (len(residual),),
    )


def spanning_tree(g: Digraph, cluster: Iterable[int], root: int) -> SpanningTree:
    """BFS tree of the subgraph induced by ``cluster``, rooted at ``root``.

    Raises
    ------
    GraphError
        If ``root`` is outside the cluster or does not reach all of it.
    """
    members = frozenset(cluster)
    _check_vertex(g, root)
    if root not in members:
        raise GraphError(f"root {root} is not in the cluster {sorted(members)}")
    parent = _bfs(g.successors(), root, allowed=members)
    missing = members - parent.keys()
    if missing:
        raise GraphError(f"root {root} does not reach {sorted(missing)} within the cluster")
    edges = sorted((p, v) for v, p in parent.items() if p is not None)
    return SpanningTree(root=root, tree_edges=tuple(edges))


def permuted_laplacian(g: Digraph, decomposition: ClusterDecomposition | None = None) -> np.ndarray:
    """Laplacian with rows and columns in the block order of the decomposition."""
    if decomposition is None:
        decomposition = clusters(g)
    idx = np.array(decomposition.permutation) - 1
    return laplacian(g)[np.ix_(idx, idx)]


def exact_rank(matrix) -> int:
    """Rank of an integer matrix by fraction-free (Bareiss) elimination."""
    rows = [[int(x) for x in row] for row in np.asarray(matrix).tolist()]
    if not rows or not rows[0]:
        return 0
    m, n = len(rows), len(rows[0])
    rank, prev = 0, 1
    for col in range(n):
        pivot = next((r for r in range(rank, m) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        p = rows[rank][col]
        for r in range(rank + 1, m):
            f = rows[r][col]
            rows[r] = [(p * rows[r][c] - f * rows[rank][c]) // prev for c in range(n)]
        prev = p
        rank += 1
        if rank == m:
            break
    return rank


def numerical_rank(matrix, rank_tol: float | None = None) -> int:
    """Count singular values above ``rank_tol * sigma_max``.

    The default relative tolerance is ``max(rows, cols) * eps``.
    """
    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    rel = max(m.shape) * np.finfo(float).eps if rank_tol is None else rank_tol
    return int(np.sum(s > rel * s[0])) if s[0] > 0 else 0


def zero_multiplicity(g: Digraph, exact: bool = False, rank_tol: float | None = None) -> int:
    """``N - rank(L)``, either by SVD thresholding or exact integer rank."""
    lap = laplacian(g)
    rank = exact_rank(lap) if exact else numerical_rank(lap, rank_tol)
    return g.num_nodes - rank


def nullspace_basis(
    g: Digraph,
    decomposition: ClusterDecomposition | None = None,
    as_matrix: bool = False,
):
    """Basis of ``Ker L`` built from the block-triangular form of ``L``.

    Vector ``k`` is one on inner subgraph ``k``, zero on the other inner
    subgraphs, and ``-R^{-1} F_k 1`` on the residual vertices, where ``R`` is
    the residual diagonal block and ``F_k`` the residual rows restricted to
    the columns of inner subgraph ``k``. Vectors are returned in original
    vertex order.
    """
    if decomposition is None:
        decomposition = clusters(g)
    lap = permuted_laplacian(g, decomposition).astype(float)
    n = g.num_nodes
    sizes = decomposition.block_sizes
    n_inner = n - sizes[-1]
    residual = lap[n_inner:, n_inner:]
    if sizes[-1]:
        # R is an integer matrix; exact rank avoids a tolerance choice here.
        if exact_rank(residual.astype(np.int64)) < sizes[-1]:
            raise DecompositionError(
                f"residual block on vertices {decomposition.residual} is singular"
            )

    vectors = []
    start = 0
    for size in sizes[:-1]:
        b = np.zeros(n)
        b[start:start + size] = 1.0
        if sizes[-1]:
            coupling = lap[n_inner:, start:start + size]
            b[n_inner:] = -np.linalg.solve(residual, coupling @ np.ones(size))
        start += size
        original = np.zeros(n)
        original[np.array(decomposition.permutation) - 1] = b
        vectors.append(original)
    if as_matrix:
        return np.column_stack(vectors) if vectors else np.zeros((n, 0))
    return vectors
