"""Point sets, spanner multisets and the ellipsoid semi-norm they induce.

For a multiset ``S = {v_1, ..., v_t}`` with Gram matrix ``W = sum v v^T`` the
ellipsoid ``E(S) = {V a : |a| <= 1}`` has the Minkowski semi-norm

    |x|_E(S) = sqrt(x^T W^+ x)

where ``W^+`` is the Moore-Penrose pseudoinverse. Points outside the column
span of ``W`` are not in any dilate of ``E(S)``; their norm is ``inf``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import VolspanError

# eigenvalues of a Gram matrix below RANK_RTOL * largest are treated as zero
RANK_RTOL = 1e-10
# relative residual outside span(W) above which a query is reported as inf
SPAN_RTOL = 1e-8
# coordinatewise tolerance for duplicate / negation detection
DUP_TOL = 1e-12


def _err(code, msg, **kw):
    return VolspanError(code, msg, module="geometry", **kw)


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _negation_closed(X, tol=DUP_TOL):
    if len(X) == 0:
        return True
    tree = cKDTree(X)
    dist, _ = tree.query(-X, k=1, p=np.inf)
    return bool(np.all(dist <= tol))


@dataclass(frozen=True)
class PointSet:
    """Ordered collection of ``n`` points in ``R^d`` stored as an ``(n, d)`` array.

    ``symmetric_flag`` is detected automatically when not given. Passing
    ``True`` for a set that is not closed under negation raises; passing
    ``False`` skips the detection.
    """
    points: np.ndarray
    symmetric_flag: bool = None

    def __post_init__(self):
        X = np.asarray(self.points, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(0, 1)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise _err("bad_pointset", f"need an (n, d) array with n, d >= 1, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise _err("bad_pointset", "points must be finite")
        closed = False if self.symmetric_flag is False else _negation_closed(X)
        if self.symmetric_flag and not closed:
            raise _err("not_symmetric", "symmetric_flag set but the set is not closed under negation")
        object.__setattr__(self, "points", _frozen(X))
        object.__setattr__(self, "symmetric_flag", closed if self.symmetric_flag is None else bool(self.symmetric_flag))

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def n(self):
        return self.points.shape[0]

    def __len__(self):
        return self.points.shape[0]

    def __getitem__(self, i):
        return self.points[i]

    def subset(self, indices):
        return PointSet(self.points[np.asarray(indices, dtype=int)])


@dataclass(frozen=True)
class SpannerSet:
    """Multiset of vectors (usually indices into a :class:`PointSet`).

    The Gram matrix, its pseudoinverse and the numerical rank are computed
    once from a symmetric eigendecomposition; ``basis`` and ``eigenvalues``
    hold the retained eigenpairs and drive all norm evaluations.
    """
    indices: np.ndarray
    vectors: np.ndarray
    gram: np.ndarray = field(init=False, repr=False)
    gram_pinv: np.ndarray = field(init=False, repr=False)
    rank: int = field(init=False)
    basis: np.ndarray = field(init=False, repr=False)
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        V = np.asarray(self.vectors, dtype=float)
        if V.ndim != 2 or V.shape[0] < 1:
            raise _err("empty_spanner", "a spanner needs at least one vector")
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if idx.shape[0] != V.shape[0]:
            raise _err("bad_index", "indices and vectors differ in length")
        W = V.T @ V
        W = 0.5 * (W + W.T)
        lam, U = np.linalg.eigh(W)
        top = lam[-1] if lam[-1] > 0 else 0.0
        keep = lam > RANK_RTOL * top if top > 0 else np.zeros_like(lam, dtype=bool)
        Ur, lr = U[:, keep], lam[keep]
        with np.errstate(over="ignore", invalid="ignore"):
            # overflows only for subnormal eigenvalues; norms use basis/eigenvalues instead
            pinv = (Ur / lr) @ Ur.T
        object.__setattr__(self, "indices", _frozen(idx, np.int64))
        object.__setattr__(self, "vectors", _frozen(V))
        object.__setattr__(self, "gram", _frozen(W))
        object.__setattr__(self, "gram_pinv", _frozen(0.5 * (pinv + pinv.T)))
        object.__setattr__(self, "rank", int(keep.sum()))
        object.__setattr__(self, "basis", _frozen(Ur))
        object.__setattr__(self, "eigenvalues", _frozen(lr))

    @classmethod
    def from_points(cls, K, indices):
        """Spanner made of ``K[i]`` for each ``i`` in ``indices`` (repeats allowed)."""
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        if idx.size == 0:
            raise _err("empty_spanner", "a spanner needs at least one index")
        if idx.min() < 0 or idx.max() >= len(K):
            raise _err("bad_index", f"index out of range for a set of {len(K)} points")
        return cls(idx, K.points[idx])

    @classmethod
    def from_vectors(cls, vectors):
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(np.arange(V.shape[0]), V)

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def size(self):
        return self.vectors.shape[0]

    def __len__(self):
        return self.vectors.shape[0]

    def multiplicities(self):
        """Distinct indices (sorted) and how often each occurs."""
        return np.unique(self.indices, return_counts=True)


@dataclass(frozen=True)
class EllipsoidNormReport:
    norms: np.ndarray
    max_norm: float
    violating_indices: np.ndarray
    tol: float = 0.0

    @property
    def ok(self):
        return self.violating_indices.size == 0


def ellipsoid_norms(S, X):
    """Vectorised ``|x|_E(S)`` for every row of ``X``; ``inf`` outside span(S)."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != S.dim:
        raise _err("dim_mismatch", f"query has dimension {X.shape[1]}, spanner has {S.dim}")
    Y = X @ S.basis
    sq = np.einsum("ij,ij->i", Y / S.eigenvalues, Y) if S.rank else np.zeros(len(X))
    out = np.sqrt(np.maximum(sq, 0.0))
    resid = np.linalg.norm(X - Y @ S.basis.T, axis=1)
    scale = np.linalg.norm(X, axis=1)
    out[resid > SPAN_RTOL * np.maximum(scale, np.finfo(float).tiny)] = np.inf
    return out[0] if single else out


def ellipsoid_norm(S, x):
    """Semi-norm ``sqrt(x^T W^+ x)`` of a single vector against spanner ``S``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise _err("dim_mismatch", "ellipsoid_norm expects a single vector")
    return float(ellipsoid_norms(S, x))


def is_volumetric_spanner(S, K, tol=1e-6):
    """Check ``K`` lies in ``(1 + tol) E(S)``.

    Returns an :class:`EllipsoidNormReport` listing every point of ``K`` whose
    norm exceeds ``1 + tol``.
    """
    if tol < 0:
        raise _err("bad_tolerance", "tol must be non-negative")
    idx = S.indices
    if idx.size and (idx.min() < 0 or idx.max() >= len(K)):
        raise _err("bad_index", f"spanner index out of range for a set of {len(K)} points")
    norms = ellipsoid_norms(S, K.points)
    bad = np.flatnonzero(norms > 1.0 + tol)
    return EllipsoidNormReport(norms=norms, max_norm=float(norms.max()), violating_indices=bad, tol=tol)


def apply_linear_map(K, T):
    """Image ``{T x : x in K}`` in the same order. ``T`` must be invertible."""
    T = np.asarray(T, dtype=float)
    d = K.dim
    if T.shape != (d, d):
        raise _err("dim_mismatch", f"map has shape {T.shape}, points have dimension {d}")
    s = np.linalg.svd(T, compute_uv=False)
    if s[-1] <= RANK_RTOL * s[0]:
        raise _err("singular_map", "linear map is singular at the rank cutoff", cond=float(s[0] / max(s[-1], 1e-300)))
    return PointSet(K.points @ T.T)


def symmetrize_with_map(K, tol=DUP_TOL):
    """``K`` union ``-K`` without duplicates, plus the provenance of each row.

    Returns ``(X, source, sign)`` with ``X[j] == sign[j] * K[source[j]]``.
    Points of ``K`` come first, in their original order.
    """
    P = K.points
    n = len(P)
    allp = np.vstack([P, -P])
    src = np.concatenate([np.arange(n), np.arange(n)])
    sgn = np.concatenate([np.ones(n), -np.ones(n)])
    tree = cKDTree(allp)
    groups = tree.query_ball_point(allp, r=tol, p=np.inf)
    keep = np.ones(2 * n, dtype=bool)
    for i in range(2 * n):
        if not keep[i]:
            continue
        for j in groups[i]:
            if j > i:
                keep[j] = False
    return allp[keep], src[keep], sgn[keep]


def symmetrize(K):
    """Return ``K`` union ``-K`` with duplicates (within 1e-12) removed."""
    X, _, _ = symmetrize_with_map(K)
    return PointSet(X, symmetric_flag=True)


def span_basis(X, rtol=RANK_RTOL):
    """Orthonormal basis (columns) of the row span of ``X``.

    The rank is that of the Gram matrix ``X^T X`` at the ``RANK_RTOL`` cutoff.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((X.shape[1], 0))
    r = int(np.sum(s ** 2 > rtol * s[0] ** 2))
    return Vt[:r].T
