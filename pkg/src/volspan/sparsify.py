"""Deterministic spectral sparsification and exact volumetric spanners.

``bss_sparsify`` is the two-barrier potential method of Batson, Spielman and
Srivastava: starting from ``A = 0`` it adds ``ceil(c d)`` rank-one terms
``t v v^T``, each time moving a lower barrier ``l`` and an upper barrier ``u``
by fixed amounts while keeping ``l < lambda_min(A)`` and
``lambda_max(A) < u``. Rescaling by the final ``l`` gives

    I <= sum_i s_i v_i v_i^T <= kappa(c) I,
    kappa(c) = (c + 1 + 2 sqrt(c)) / (c + 1 - 2 sqrt(c)).

``exact_volumetric_spanner`` chains John position, John weights and this
pruning step to obtain a spanner of at most ``12 d`` points.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import VolspanError
from .geometry import PointSet, SpannerSet, is_volumetric_spanner, span_basis, symmetrize_with_map
from .mvee import inverse_sqrt, john_weights, to_john_position

# sqrt(c) = 2.4 keeps d * (c + kappa(c)) + 1 below 12 d for every d >= 1
BSS_C = 5.76
ISOTROPY_TOL = 1e-6
WHITEN_TOL = 1e-8
SPECTRUM_SLACK = 1e-6
PIPELINE_EPS = 1e-9


def _err(code, msg, **kw):
    return VolspanError(code, msg, module="sparsify", **kw)


def kappa(c):
    """Condition number bound ``(c + 1 + 2 sqrt c) / (c + 1 - 2 sqrt c)``."""
    r = math.sqrt(c)
    return (r + 1.0) ** 2 / (r - 1.0) ** 2


def size_bound(c):
    """Per-dimension bound ``c + kappa(c)`` on the pruned multiset size."""
    return c + kappa(c)


@dataclass(frozen=True)
class WeightedDecomposition:
    """Unit vectors ``u_i`` (rows) and a distribution ``p`` with ``d sum p_i u_i u_i^T ~ I``."""
    vectors: np.ndarray
    probs: np.ndarray
    tol: float = ISOTROPY_TOL

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        p = np.asarray(self.probs, dtype=float).reshape(-1)
        if p.shape[0] != U.shape[0]:
            raise _err("bad_decomposition", "vectors and probs differ in length")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
            raise _err("bad_decomposition", "probs must be a probability vector")
        norms = np.linalg.norm(U, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise _err("bad_decomposition", "vectors must have unit norm", max_dev=float(np.abs(norms - 1).max()))
        res = self.residual_of(U, p)
        if res > self.tol:
            raise _err("not_isotropic", f"d sum p u u^T deviates from I by {res:.3e}", residual=res)
        object.__setattr__(self, "vectors", U)
        object.__setattr__(self, "probs", p)

    @staticmethod
    def residual_of(U, p):
        d = U.shape[1]
        return float(np.linalg.norm(d * (U.T * p) @ U - np.eye(d), 2))

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def residual(self):
        return self.residual_of(self.vectors, self.probs)


@dataclass(frozen=True)
class SparsifierOutput:
    selected: np.ndarray
    scalars: np.ndarray
    size: int
    min_eig: float


def bss_sparsify(vectors, c=BSS_C):
    """Scalars ``s >= 0`` with at most ``ceil(c d)`` non-zeros and
    ``I <= sum s_i v_i v_i^T <= kappa(c) I`` for isotropic ``v`` (rows).

    Ties between candidate vectors go to the lowest index, so the output is
    a deterministic function of the input.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    m, d = V.shape
    if not (c > 1.0 and c + 1.0 - 2.0 * math.sqrt(c) > 0):
        raise _err("bad_parameter", "c must exceed 1")
    iso = float(np.linalg.norm(V.T @ V - np.eye(d), 2))
    if iso > ISOTROPY_TOL:
        raise _err("not_isotropic", f"sum v v^T deviates from I by {iso:.3e}", residual=iso)

    rc = math.sqrt(c)
    step_l, step_u = 1.0, (rc + 1.0) / (rc - 1.0)
    lo, hi = -d * rc, d * (c + rc) / (rc - 1.0)  # -d/eps_L and d/eps_U
    sq = np.einsum("ij,ij->i", V, V)
    usable = sq > 0
    A = np.zeros((d, d))
    s = np.zeros(m)
    for q in range(math.ceil(c * d)):
        lo2, hi2 = lo + step_l, hi + step_u
        lam, E = np.linalg.eigh(A)
        if lam[0] - lo2 <= 0 or hi - lam[-1] <= 0:
            raise _err("barrier_stuck", f"barrier crossed at step {q}", iteration=q)
        Y2 = (V @ E) ** 2
        du = 1.0 / (hi2 - lam)
        dl = 1.0 / (lam - lo2)
        dphi_u = np.sum(1.0 / (hi - lam)) - du.sum()
        dphi_l = dl.sum() - np.sum(1.0 / (lam - lo))
        upper = Y2 @ (du ** 2) / dphi_u + Y2 @ du
        lower = Y2 @ (dl ** 2) / dphi_l - Y2 @ dl
        score = np.where(usable, lower - upper, -np.inf)
        i = int(np.argmax(score))
        if score[i] < -1e-9 * max(abs(lower[i]), abs(upper[i]), 1.0):
            raise _err("barrier_stuck", f"no admissible vector at step {q}", iteration=q,
                       score=float(score[i]))
        t = 2.0 / (upper[i] + max(lower[i], upper[i]))
        s[i] += t
        A += t * np.outer(V[i], V[i])
        lo, hi = lo2, hi2
    s /= lo
    return s


def spectrum_check(V, s):
    M = (V.T * s) @ V
    lam = np.linalg.eigvalsh(0.5 * (M + M.T))
    return float(lam[0]), float(lam[-1])


def prune_contact_points(decomp, c=BSS_C):
    """Multiset of at most ``12 d`` of the ``u_i`` whose Gram dominates ``I``.

    Each ``u_i`` is taken ``ceil(d s_i p_i)`` times, with ``s`` from
    :func:`bss_sparsify` applied to the whitened vectors
    ``W^{-1/2} sqrt(d p_i) u_i`` where ``W = d sum p_i u_i u_i^T``.
    """
    U, p = decomp.vectors, decomp.probs
    d = U.shape[1]
    W = d * (U.T * p) @ U
    Wm = inverse_sqrt(W)
    Wv = (np.sqrt(d * p)[:, None] * U) @ Wm
    white = float(np.linalg.norm(Wv.T @ Wv - np.eye(d), 2))
    if white > WHITEN_TOL:
        raise _err("whitening_failed", f"whitened residual {white:.3e}", residual=white)
    s = bss_sparsify(Wv, c)
    lo, hi = spectrum_check(Wv, s)
    if lo < 1.0 - SPECTRUM_SLACK or hi > kappa(c) + SPECTRUM_SLACK:
        raise _err("barrier_stuck", f"spectrum [{lo:.6g}, {hi:.6g}] outside [1, kappa]", low=lo, high=hi)
    mult = np.where(s > 0, np.maximum(np.ceil(d * s * p), 1), 0).astype(np.int64)
    selected = np.repeat(np.arange(len(p)), mult)
    size = int(mult.sum())
    if size > 12 * d:
        raise _err("size_exceeded", f"pruned multiset has {size} > 12 d = {12 * d} elements", size=size)
    G = U[selected].T @ U[selected]
    min_eig = float(np.linalg.eigvalsh(0.5 * (G + G.T))[0])
    return SparsifierOutput(selected=selected, scalars=s, size=size, min_eig=min_eig)


def exact_volumetric_spanner(K, tol=1e-6, eps=PIPELINE_EPS, c=BSS_C):
    """Volumetric spanner of ``K`` with at most ``12 d`` elements (a multiset of indices).

    Pipeline: symmetrise, restrict to the linear span, move to John position,
    compute John weights, prune the contact points with :func:`prune_contact_points`
    and map the selection back to indices of ``K``. An element drawn from
    ``-K`` is reported as its mirror in ``K``; ``v v^T`` does not see the sign.
    The result is checked with :func:`is_volumetric_spanner` at ``tol``.
    """
    X, src, _ = symmetrize_with_map(K)
    B = span_basis(X)
    r = B.shape[1]
    if r == 0:
        return SpannerSet.from_points(K, [0])
    Y = X @ B
    Kj, _ = to_john_position(PointSet(Y, symmetric_flag=True), eps)
    cert = john_weights(Kj, tol)
    Z = Kj.points
    norms = np.linalg.norm(Z, axis=1)
    support = np.flatnonzero((cert.weights > 1e-14 * r) & (norms > 0))
    mass = cert.weights[support] * norms[support] ** 2
    decomp = WeightedDecomposition(Z[support] / norms[support, None], mass / mass.sum())
    out = prune_contact_points(decomp, c)
    S = SpannerSet.from_points(K, src[support[out.selected]])
    report = is_volumetric_spanner(S, K, tol)
    if not report.ok:
        raise _err("verification_failed", f"max norm {report.max_norm:.9g} exceeds 1 + {tol}",
                   max_norm=report.max_norm)
    return S
