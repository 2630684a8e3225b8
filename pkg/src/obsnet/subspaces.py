"""Subspaces attached to a linear pair ``(G, A)``.

All subspaces are real and stored as orthonormal column bases. Numerical
rank uses a relative singular-value threshold (``max(rows, cols) * eps`` by
default). Eigenvalues with real part ``>= -re_tol`` count as belonging to the
closed right half-plane.

Computed objects carry a ``margin``: the ratio of the smallest retained
singular value to the threshold. A margin below 10 marks a rank decision
taken close to the tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "Tolerances",
    "SubspaceBasis",
    "PBHResult",
    "observability_matrix",
    "null_space",
    "unobservable_subspace",
    "undetectable_subspace",
    "eigenvalue_clusters",
    "pbh_detectable",
    "pbh_observable",
    "complex_schur",
    "intersect",
    "subspace_sum",
    "block_product",
    "contains",
    "same_subspace",
]

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by every rank and subspace decision.

    rank_tol
        Relative singular-value threshold; ``None`` selects
        ``max(rows, cols) * eps``.
    re_tol
        Guard band below the imaginary axis for the closed right half-plane.
    angle_tol
        Principal-angle threshold for intersections and containment.
    cluster_tol
        Relative distance under which computed eigenvalues are merged into
        one cluster (absorbs the splitting of defective eigenvalues).
    """

    rank_tol: float | None = None
    re_tol: float = 1e-9
    angle_tol: float = 1e-8
    cluster_tol: float = 1e-5

    def rank_threshold(self, shape, sigma_max: float) -> float:
        rel = max(shape) * EPS if self.rank_tol is None else self.rank_tol
        return rel * sigma_max

    def to_json(self) -> dict:
        return {
            "rank_tol": self.rank_tol,
            "rank_rule": "sigma <= rank_tol * sigma_max; rank_tol=null means max(rows, cols) * eps",
            "re_tol": self.re_tol,
            "angle_tol": self.angle_tol,
            "cluster_tol": self.cluster_tol,
        }


DEFAULT_TOL = Tolerances()


def _margin(s: np.ndarray, thresh: float) -> float:
    """Ratio of the smallest retained singular value to ``thresh``."""
    kept = s[s > thresh]
    if thresh <= 0 or kept.size == 0:
        return math.inf
    return float(kept.min() / thresh)


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Orthonormal basis (columns) of a subspace of ``R^ambient_dim``."""

    basis: np.ndarray
    tol: Tolerances = DEFAULT_TOL
    margin: float = field(default=math.inf)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise ValueError("basis must be a 2-D array with one column per vector")
        if b.shape[1] > b.shape[0]:
            raise ValueError("more basis vectors than the ambient dimension")
        object.__setattr__(self, "basis", b)

    @classmethod
    def trivial(cls, n: int, tol: Tolerances = DEFAULT_TOL) -> "SubspaceBasis":
        return cls(np.zeros((n, 0)), tol)

    @classmethod
    def full(cls, n: int, tol: Tolerances = DEFAULT_TOL) -> "SubspaceBasis":
        return cls(np.eye(n), tol)

    @classmethod
    def span(cls, vectors, ambient_dim: int | None = None, tol: Tolerances = DEFAULT_TOL) -> "SubspaceBasis":
        """Orthonormal basis for the span of the given columns."""
        v = np.asarray(vectors, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        n = v.shape[0] if ambient_dim is None else ambient_dim
        if v.size == 0:
            return cls.trivial(n, tol)
        u, s, _ = np.linalg.svd(v, full_matrices=False)
        if s[0] == 0:
            return cls.trivial(n, tol)
        thresh = tol.rank_threshold(v.shape, s[0])
        r = int(np.sum(s > thresh))
        return cls(u[:, :r], tol, _margin(s, thresh))

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_trivial(self) -> bool:
        return self.dim == 0

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def witness(self) -> np.ndarray | None:
        """Unit vector from the subspace, sign-normalised; None if trivial."""
        if self.is_trivial:
            return None
        return _canonical_sign(self.basis[:, 0])

    def __repr__(self) -> str:
        return f"SubspaceBasis(dim={self.dim}, ambient_dim={self.ambient_dim})"


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        return v
    v = v / norm
    k = int(np.argmax(np.abs(v) > np.abs(v).max() * (1 - 1e-9)))
    return -v if v[k] < 0 else v


def null_space(matrix, tol: Tolerances = DEFAULT_TOL, ncols: int | None = None) -> SubspaceBasis:
    """Kernel of a real matrix by SVD thresholding."""
    m = np.asarray(matrix, dtype=float)
    n = m.shape[1] if ncols is None else ncols
    if m.size == 0:
        return SubspaceBasis.full(n, tol)
    _, s, vh = np.linalg.svd(m, full_matrices=True)
    if s[0] == 0:
        return SubspaceBasis.full(n, tol)
    thresh = tol.rank_threshold(m.shape, s[0])
    r = int(np.sum(s > thresh))
    return SubspaceBasis(vh[r:].T.copy(), tol, _margin(s, thresh))


def _check_pair(G, A) -> tuple[np.ndarray, np.ndarray]:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    G = np.asarray(G, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"A must be square and non-empty, got shape {A.shape}")
    n = A.shape[0]
    if G.ndim == 1:
        G = G.reshape(-1, n) if G.size else np.zeros((0, n))
    if G.ndim != 2 or G.shape[1] != n:
        raise ValueError(f"output map has shape {G.shape}, expected (m, {n})")
    return G, A


def observability_matrix(G, A) -> np.ndarray:
    """Stack ``G, GA, ..., GA^(n-1)``."""
    G, A = _check_pair(G, A)
    blocks = [G]
    for _ in range(A.shape[0] - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def unobservable_subspace(G, A, tol: Tolerances = DEFAULT_TOL) -> SubspaceBasis:
    """Joint kernel of ``G A^k`` for ``k < n``."""
    G, A = _check_pair(G, A)
    return null_space(observability_matrix(G, A), tol, ncols=A.shape[0])


def eigenvalue_clusters(eigs, tol: Tolerances = DEFAULT_TOL, scale: float = 1.0):
    """Group nearby eigenvalues; return ``[(mean, multiplicity), ...]``.

    Single-linkage clustering with radius ``cluster_tol * max(1, scale)``.
    The mean of a cluster is far better conditioned than its members when
    the cluster comes from a split defective eigenvalue.
    """
    eigs = np.asarray(eigs, dtype=complex).ravel()
    radius = tol.cluster_tol * max(1.0, scale)
    label = list(range(eigs.size))

    def find(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i in range(eigs.size):
        for j in range(i + 1, eigs.size):
            if abs(eigs[i] - eigs[j]) <= radius:
                label[find(i)] = find(j)
    groups: dict[int, list[complex]] = {}
    for i in range(eigs.size):
        groups.setdefault(find(i), []).append(eigs[i])
    out = []
    for members in groups.values():
        mean = complex(np.mean(members))
        if abs(mean.imag) <= radius:
            mean = complex(mean.real, 0.0)
        out.append((mean, len(members)))
    out.sort(key=lambda p: (p[0].real, p[0].imag))
    return out


def _closed_rhp(lam: complex, tol: Tolerances) -> bool:
    return lam.real >= -tol.re_tol


def undetectable_subspace(G, A, tol: Tolerances = DEFAULT_TOL) -> SubspaceBasis:
    """Unobservable subspace intersected with the closed-RHP spectral subspace of ``A``.

    ``A`` is restricted to the (invariant) unobservable subspace, and an
    ordered real Schur form of the restriction picks out the invariant
    subspace belonging to closed right half-plane eigenvalue clusters.
    """
    G, A = _check_pair(G, A)
    unobs = unobservable_subspace(G, A, tol)
    if unobs.is_trivial:
        return unobs
    V = unobs.basis
    restricted = V.T @ A @ V
    groups = eigenvalue_clusters(np.linalg.eigvals(restricted), tol, np.linalg.norm(A, 2))
    means = np.array([g[0] for g in groups])
    unstable = np.array([_closed_rhp(g[0], tol) for g in groups])
    if not unstable.any():
        return SubspaceBasis.trivial(A.shape[0], tol)
    if unstable.all():
        return unobs

    def select(re, im):
        return bool(unstable[np.argmin(np.abs(means - complex(re, im)))])

    _, Z, sdim = scipy.linalg.schur(restricted, output="real", sort=select)
    return SubspaceBasis(V @ Z[:, :sdim], tol, unobs.margin)


@dataclass(frozen=True, eq=False)
class PBHResult:
    """Outcome of a PBH rank test; truthy when the test passes."""

    holds: bool
    eigenvalue: complex | None = None
    witness: np.ndarray | None = None
    margin: float = math.inf

    def __bool__(self) -> bool:
        return self.holds


def _real_witness(v: np.ndarray) -> np.ndarray:
    re, im = np.real(v), np.imag(v)
    return _canonical_sign(re if np.linalg.norm(re) >= np.linalg.norm(im) else im)


def complex_schur(A) -> tuple[np.ndarray, np.ndarray]:
    """``(T, Z)`` with ``A = Z T Z^H`` and ``T`` upper triangular."""
    return scipy.linalg.schur(np.asarray(A, dtype=float), output="complex")


def _pbh(G, A, tol: Tolerances, schur, unstable_only: bool) -> PBHResult:
    G, A = _check_pair(G, A)
    n = A.shape[0]
    T, Z = complex_schur(A) if schur is None else schur
    # In Schur coordinates T - T_kk I is exactly singular, so a simple
    # eigenvalue needs no accuracy allowance in the rank threshold.
    GZ = G @ Z
    margin = math.inf
    for lam, _ in eigenvalue_clusters(np.diag(T), tol, np.linalg.norm(A, 2)):
        if lam.imag < 0 or (unstable_only and not _closed_rhp(lam, tol)):
            continue
        pencil = np.vstack([T - lam * np.eye(n), GZ])
        _, s, vh = np.linalg.svd(pencil)
        thresh = tol.rank_threshold(pencil.shape, s[0])
        margin = min(margin, _margin(s, thresh))
        if s[n - 1] <= thresh:
            v = Z @ vh[n - 1].conj()
            return PBHResult(False, lam, _real_witness(v), margin)
    return PBHResult(True, None, None, margin)


def pbh_detectable(G, A, tol: Tolerances = DEFAULT_TOL, schur=None) -> PBHResult:
    """``rank [A - lam I; G] = n`` at every closed-RHP eigenvalue of ``A``.

    ``schur`` may supply a complex Schur pair ``(T, Z)`` of ``A`` when one is
    known from structure (for ``I kron A``, the Kronecker lift of that of ``A``).
    """
    return _pbh(G, A, tol, schur, unstable_only=True)


def pbh_observable(G, A, tol: Tolerances = DEFAULT_TOL, schur=None) -> PBHResult:
    """PBH rank test at every eigenvalue of ``A``."""
    return _pbh(G, A, tol, schur, unstable_only=False)


def _check_ambient(subspaces) -> int:
    subspaces = list(subspaces)
    if not subspaces:
        raise ValueError("need at least one subspace")
    dims = {s.ambient_dim for s in subspaces}
    if len(dims) != 1:
        raise ValueError(f"ambient dimensions differ: {sorted(dims)}")
    return dims.pop()


def intersect(subspaces, tol: Tolerances | None = None) -> SubspaceBasis:
    """Intersection, as the joint kernel of stacked complement projectors."""
    subspaces = list(subspaces)
    n = _check_ambient(subspaces)
    tol = subspaces[0].tol if tol is None else tol
    margin = min(s.margin for s in subspaces)
    if any(s.is_trivial for s in subspaces):
        return SubspaceBasis(np.zeros((n, 0)), tol, margin)
    proper = [s for s in subspaces if s.dim < n]
    if not proper:
        return SubspaceBasis(np.eye(n), tol, margin)
    if len(proper) == 1:
        return SubspaceBasis(proper[0].basis, tol, margin)
    stacked = np.vstack([np.eye(n) - s.projector() for s in proper])
    _, s, vh = np.linalg.svd(stacked)
    s_full = np.concatenate([s, np.zeros(n - s.size)]) if s.size < n else s
    r = int(np.sum(s_full > tol.angle_tol))
    return SubspaceBasis(vh[r:].T.copy(), tol, min(margin, _margin(s_full, tol.angle_tol)))


def subspace_sum(subspaces, tol: Tolerances | None = None) -> SubspaceBasis:
    subspaces = list(subspaces)
    n = _check_ambient(subspaces)
    tol = subspaces[0].tol if tol is None else tol
    return SubspaceBasis.span(np.hstack([s.basis for s in subspaces]), n, tol)


def block_product(subspaces, tol: Tolerances | None = None) -> SubspaceBasis:
    """Cartesian product ``X_1 x ... x X_N`` inside ``R^(sum of ambients)``."""
    subspaces = list(subspaces)
    if not subspaces:
        raise ValueError("need at least one subspace")
    tol = subspaces[0].tol if tol is None else tol
    basis = scipy.linalg.block_diag(*[s.basis for s in subspaces])
    return SubspaceBasis(basis, tol, min(s.margin for s in subspaces))


def contains(outer: SubspaceBasis, inner: SubspaceBasis, angle_tol: float | None = None) -> bool:
    """True if every direction of ``inner`` lies in ``outer`` up to the angle tolerance."""
    if outer.ambient_dim != inner.ambient_dim:
        raise ValueError("ambient dimensions differ")
    if inner.is_trivial:
        return True
    tol = outer.tol.angle_tol if angle_tol is None else angle_tol
    residual = inner.basis - outer.basis @ (outer.basis.T @ inner.basis)
    return bool(np.linalg.norm(residual, 2) <= tol)


def same_subspace(x: SubspaceBasis, y: SubspaceBasis, angle_tol: float | None = None) -> bool:
    return x.dim == y.dim and contains(x, y, angle_tol) and contains(y, x, angle_tol)
