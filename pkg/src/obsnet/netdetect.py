"""Collective detectability of a network of consensus observers.

Node ``i`` measures ``y_i = C_i x + D_i xi + Dbar_i xi_i`` and receives
``H_i (xhat_j - xhat_i)`` from each in-neighbour ``j``. The network is
collectively detectable when the stacked pair ``([barC; barH], I_N kron A)``
is detectable. Three routes are offered: the PBH test on the stacked pair,
the kernel condition in terms of per-node observability matrices, and the
cluster-wise necessary and sufficient conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .digraph import ClusterDecomposition, Digraph, clusters, laplacian, zero_multiplicity
from .subspaces import (
    DEFAULT_TOL,
    PBHResult,
    SubspaceBasis,
    Tolerances,
    block_product,
    complex_schur,
    intersect,
    null_space,
    observability_matrix,
    pbh_detectable,
    pbh_observable,
    undetectable_subspace,
    unobservable_subspace,
)

__all__ = [
    "NetworkSpecError",
    "ObserverNetworkSystem",
    "StackedMatrices",
    "Lemma3Result",
    "NodeRecord",
    "ClusterRecord",
    "SufficientResult",
    "DetectabilityReport",
    "build_stacked",
    "collective_detectability",
    "lemma3_condition",
    "theorem2_check",
    "theorem3_sufficient",
    "analyze",
]


class NetworkSpecError(ValueError):
    """Inconsistent dimensions or node data in an observer network."""


def _matrix(value, rows: int | None, cols: int | None, name: str) -> np.ndarray:
    m = np.asarray(value, dtype=float)
    if m.ndim == 1 and cols is not None and m.size == 0:
        m = np.zeros((0, cols))
    if m.ndim != 2:
        raise NetworkSpecError(f"{name} must be a matrix, got {m.ndim}-d data")
    if rows is not None and m.shape[0] != rows:
        raise NetworkSpecError(f"{name} has {m.shape[0]} rows, expected {rows}")
    if cols is not None and m.shape[1] != cols:
        raise NetworkSpecError(f"{name} has {m.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(m)):
        raise NetworkSpecError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True, eq=False)
class ObserverNetworkSystem:
    """Plant ``(A, B)``, per-node ``C_i, D_i, Dbar_i, H_i`` and the graph.

    ``D``, ``Dbar`` and ``B`` only matter for simulation. Missing ``D`` or
    ``Dbar`` default to zero matrices with no disturbance columns.
    """

    A: np.ndarray
    C: tuple
    H: tuple
    graph: Digraph
    B: np.ndarray | None = None
    D: tuple | None = None
    Dbar: tuple | None = None

    def __post_init__(self):
        A = _matrix(self.A, None, None, "A")
        if A.shape[0] != A.shape[1] or A.shape[0] == 0:
            raise NetworkSpecError(f"A must be square and non-empty, got {A.shape}")
        n = A.shape[0]
        N = self.graph.num_nodes
        if len(self.C) != N or len(self.H) != N:
            raise NetworkSpecError(f"expected {N} node entries for C and H, got {len(self.C)} and {len(self.H)}")
        B = np.zeros((n, 0)) if self.B is None else _matrix(self.B, n, None, "B")
        m = B.shape[1]
        C = tuple(_matrix(c, None, n, f"nodes[{i}].C") for i, c in enumerate(self.C))
        H = tuple(_matrix(h, None, n, f"nodes[{i}].H") for i, h in enumerate(self.H))
        D = self.D if self.D is not None else [None] * N
        Dbar = self.Dbar if self.Dbar is not None else [None] * N
        if len(D) != N or len(Dbar) != N:
            raise NetworkSpecError(f"expected {N} node entries for D and Dbar")
        D = tuple(
            np.zeros((C[i].shape[0], m)) if d is None else _matrix(d, C[i].shape[0], m, f"nodes[{i}].D")
            for i, d in enumerate(D)
        )
        Dbar = tuple(
            np.zeros((C[i].shape[0], 0)) if d is None else _matrix(d, C[i].shape[0], None, f"nodes[{i}].Dbar")
            for i, d in enumerate(Dbar)
        )
        for name, value in (("A", A), ("B", B), ("C", C), ("H", H), ("D", D), ("Dbar", Dbar)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.graph.num_nodes


@dataclass(frozen=True, eq=False)
class StackedMatrices:
    barA: np.ndarray
    barC: np.ndarray
    barH: np.ndarray

    @property
    def output(self) -> np.ndarray:
        return np.vstack([self.barC, self.barH])


def build_stacked(sys: ObserverNetworkSystem) -> StackedMatrices:
    """Stack the network into ``I kron A``, ``diag(C_i)`` and the interconnection map.

    The interconnection map is assembled entrywise and also as
    ``diag(H_i) (L kron I_n)``; the two must agree exactly.
    """
    n, N = sys.n, sys.N
    adj = sys.graph.adjacency()
    degree = adj.sum(axis=1)
    rows = []
    for i in range(N):
        row = [
            degree[i] * sys.H[i] if j == i else -adj[i, j] * sys.H[i]
            for j in range(N)
        ]
        rows.append(np.hstack(row))
    barH = np.vstack(rows) if rows else np.zeros((0, N * n))
    factored = scipy.linalg.block_diag(*sys.H) @ np.kron(laplacian(sys.graph), np.eye(n))
    if barH.shape != factored.shape or not np.array_equal(barH + 0.0, factored + 0.0):
        raise ArithmeticError("entrywise and factored interconnection maps disagree")
    return StackedMatrices(
        barA=np.kron(np.eye(N), sys.A),
        barC=scipy.linalg.block_diag(*sys.C).reshape(-1, N * n),
        barH=barH,
    )


def collective_detectability(sys: ObserverNetworkSystem, tol: Tolerances = DEFAULT_TOL) -> PBHResult:
    """PBH test of ``([barC; barH], I kron A)``; eigenvalues taken from ``A``."""
    st = build_stacked(sys)
    T, Z = complex_schur(sys.A)
    eye = np.eye(sys.N)
    return pbh_detectable(st.output, st.barA, tol, schur=(np.kron(eye, T), np.kron(eye, Z)))


@dataclass(frozen=True, eq=False)
class Lemma3Result:
    """Kernel condition: ``Ker(diag(O_Hi)(L kron I)) meets prod C_i only at 0``."""

    holds: bool
    kernel: SubspaceBasis
    product: SubspaceBasis
    intersection: SubspaceBasis
    witness: np.ndarray | None = None

    @property
    def margin(self) -> float:
        return self.intersection.margin

    def __bool__(self) -> bool:
        return self.holds


def lemma3_condition(sys: ObserverNetworkSystem, tol: Tolerances = DEFAULT_TOL) -> Lemma3Result:
    n = sys.n
    obs = scipy.linalg.block_diag(*[observability_matrix(h, sys.A) for h in sys.H])
    obs = obs.reshape(-1, sys.N * n)
    M = obs @ np.kron(laplacian(sys.graph), np.eye(n))
    kernel = null_space(M, tol, ncols=sys.N * n)
    product = block_product([undetectable_subspace(c, sys.A, tol) for c in sys.C], tol)
    meet = intersect([kernel, product], tol)
    return Lemma3Result(meet.is_trivial, kernel, product, meet, meet.witness())


@dataclass(frozen=True, eq=False)
class NodeRecord:
    node: int
    condition_ii: bool
    witness: np.ndarray | None = None

    def to_json(self) -> dict:
        return {"node": self.node, "condition_ii": self.condition_ii, "witness": _vec(self.witness)}


@dataclass(frozen=True, eq=False)
class ClusterRecord:
    vertices: tuple[int, ...]
    inner_subgraph: tuple[int, ...]
    condition_i: bool
    nodes: tuple[NodeRecord, ...]
    witness: np.ndarray | None = None

    @property
    def passes(self) -> bool:
        return self.condition_i and all(r.condition_ii for r in self.nodes)

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "inner_subgraph": list(self.inner_subgraph),
            "condition_i": self.condition_i,
            "witness_i": _vec(self.witness),
            "nodes": [r.to_json() for r in self.nodes],
        }


def theorem2_check(
    sys: ObserverNetworkSystem,
    tol: Tolerances = DEFAULT_TOL,
    decomposition: ClusterDecomposition | None = None,
) -> list[ClusterRecord]:
    """Evaluate the two cluster-wise necessary conditions.

    (i) the undetectable subspaces of the cluster members intersect trivially;
    (ii) at every member ``i``, the undetectable subspace of ``(C_i, A)``, the
    unobservable subspace of ``(H_i, A)`` and those of ``(H_j, A)`` for every
    node ``j`` receiving from ``i`` meet only at zero.
    """
    if decomposition is None:
        decomposition = clusters(sys.graph)
    undet = [undetectable_subspace(c, sys.A, tol) for c in sys.C]
    unobs_h = [unobservable_subspace(h, sys.A, tol) for h in sys.H]
    g = sys.graph
    records = []
    for members, inner in zip(decomposition.clusters, decomposition.inner_subgraphs):
        common = intersect([undet[i - 1] for i in members], tol)
        nodes = []
        for i in members:
            parts = [unobs_h[j - 1] for j in g.out_neighbors(i)]
            parts += [unobs_h[i - 1], undet[i - 1]]
            meet = intersect(parts, tol)
            nodes.append(NodeRecord(i, meet.is_trivial, meet.witness()))
        records.append(ClusterRecord(tuple(members), tuple(inner), common.is_trivial, tuple(nodes), common.witness()))
    return records


@dataclass(frozen=True)
class SufficientResult:
    """The cluster-wise sufficient condition and whether it certifies detectability.

    ``applies`` is the condition itself: every ``(H_i, A)`` observable (up to
    exempt zero nodes) and every cluster passing condition (i). It only
    implies detectability when the clusters are pairwise disjoint; a node
    shared by two clusters sees a mixture of their modes, and the
    undetectable parts of different clusters can cancel there. ``certified``
    is the sound verdict.
    """

    applies: bool
    all_clusters_condition_i: bool
    clusters_disjoint: bool
    unobservable_nodes: tuple[int, ...]
    exempt_nodes: tuple[int, ...]

    @property
    def certified(self) -> bool:
        return self.applies and self.clusters_disjoint

    def __bool__(self) -> bool:
        return self.applies

    def to_json(self) -> dict:
        return {
            "applies": self.applies,
            "certified": self.certified,
            "all_clusters_condition_i": self.all_clusters_condition_i,
            "clusters_disjoint": self.clusters_disjoint,
            "unobservable_nodes": list(self.unobservable_nodes),
            "exempt_nodes": list(self.exempt_nodes),
        }


def _exempt_zero_nodes(sys: ObserverNetworkSystem, decomposition: ClusterDecomposition, candidates):
    """Nodes with ``H_i = 0`` that may be ignored by the sufficient condition.

    A zero interconnection matrix behaves like deleting the node's incoming
    edges. That is harmless when the node sits in an inner subgraph and the
    pruned graph keeps the same number of clusters (at most one such node
    per inner subgraph); otherwise the node is not exempt.
    """
    zero = [
        i for i in candidates
        if not np.any(sys.H[i - 1]) and decomposition.cluster_of_inner(i) is not None
    ]
    if not zero:
        return ()
    pruned = sys.graph.without_incoming(zero)
    if len(clusters(pruned).clusters) != decomposition.num_clusters:
        return ()
    return tuple(zero)


def theorem3_sufficient(
    sys: ObserverNetworkSystem,
    tol: Tolerances = DEFAULT_TOL,
    decomposition: ClusterDecomposition | None = None,
    records: list[ClusterRecord] | None = None,
) -> SufficientResult:
    """Every ``(H_i, A)`` observable (up to exempt zero nodes) and every cluster passes (i)."""
    if decomposition is None:
        decomposition = clusters(sys.graph)
    if records is None:
        records = theorem2_check(sys, tol, decomposition)
    unobservable = [i for i in sys.graph.vertices if not pbh_observable(sys.H[i - 1], sys.A, tol)]
    exempt = _exempt_zero_nodes(sys, decomposition, unobservable)
    remaining = tuple(i for i in unobservable if i not in exempt)
    cond_i = all(r.condition_i for r in records)
    members = [v for c in decomposition.clusters for v in c]
    disjoint = len(members) == len(set(members))
    return SufficientResult(cond_i and not remaining, cond_i, disjoint, remaining, tuple(exempt))


def _vec(v) -> list | None:
    return None if v is None else [float(x) for x in v]


def _complex(z) -> dict | None:
    return None if z is None else {"re": float(z.real), "im": float(z.imag)}


@dataclass(frozen=True, eq=False)
class DetectabilityReport:
    collectively_detectable: bool
    lemma3_holds: bool
    clusters: tuple[ClusterRecord, ...]
    sufficient: SufficientResult
    pbh: PBHResult
    lemma3: Lemma3Result
    zero_multiplicity: int
    tol: Tolerances = field(default=DEFAULT_TOL)

    @property
    def sufficient_applies(self) -> bool:
        return self.sufficient.applies

    @property
    def necessary_holds(self) -> bool:
        return all(r.passes for r in self.clusters)

    @property
    def margin(self) -> float:
        return min(self.pbh.margin, self.lemma3.margin)

    def consistency_violations(self) -> list[str]:
        """Implications the theory guarantees; any entry signals a numerical problem."""
        problems = []
        if self.collectively_detectable != self.lemma3_holds:
            problems.append("PBH verdict and kernel condition disagree")
        if self.collectively_detectable and not self.necessary_holds:
            problems.append("detectable network violates a cluster-wise necessary condition")
        if self.sufficient.certified and not self.collectively_detectable:
            problems.append("certified sufficient condition holds but network is not detectable")
        return problems

    @property
    def overlap_gap(self) -> bool:
        """Sufficient condition holds on overlapping clusters, yet the network is not detectable."""
        return self.sufficient_applies and not self.collectively_detectable

    def to_json(self) -> dict:
        return {
            "collectively_detectable": self.collectively_detectable,
            "pbh": {
                "detectable": self.pbh.holds,
                "eigenvalue": _complex(self.pbh.eigenvalue),
                "witness": _vec(self.pbh.witness),
                "margin": _finite(self.pbh.margin),
            },
            "lemma3_holds": self.lemma3_holds,
            "lemma3": {
                "kernel_dim": self.lemma3.kernel.dim,
                "product_dim": self.lemma3.product.dim,
                "intersection_dim": self.lemma3.intersection.dim,
                "witness": _vec(self.lemma3.witness),
                "margin": _finite(self.lemma3.margin),
            },
            "necessary_conditions_hold": self.necessary_holds,
            "clusters": [r.to_json() for r in self.clusters],
            "sufficient": self.sufficient.to_json(),
            "sufficient_applies": self.sufficient_applies,
            "sufficient_certified": self.sufficient.certified,
            "sufficient_overlap_gap": self.overlap_gap,
            "laplacian_zero_multiplicity": self.zero_multiplicity,
            "consistency_violations": self.consistency_violations(),
            "tolerances": self.tol.to_json(),
        }


def _finite(x: float) -> float | None:
    return None if math.isinf(x) else float(x)


def analyze(sys: ObserverNetworkSystem, tol: Tolerances = DEFAULT_TOL) -> DetectabilityReport:
    """Run every detectability route and collect them in one report."""
    decomposition = clusters(sys.graph)
    pbh = collective_detectability(sys, tol)
    lemma3 = lemma3_condition(sys, tol)
    records = theorem2_check(sys, tol, decomposition)
    sufficient = theorem3_sufficient(sys, tol, decomposition, records)
    return DetectabilityReport(
        collectively_detectable=pbh.holds,
        lemma3_holds=lemma3.holds,
        clusters=tuple(records),
        sufficient=sufficient,
        pbh=pbh,
        lemma3=lemma3,
        zero_multiplicity=zero_multiplicity(sys.graph, exact=True),
        tol=tol,
    )
