"""Minimum-volume enclosing ellipsoids of symmetric point sets and John weights.

For a set symmetric about the origin the MVEE is centred at 0 and its shape
matrix is ``A = d * M(u*)`` where ``u*`` maximises ``log det M(u)`` with
``M(u) = sum_i u_i x_i x_i^T`` over the probability simplex (D-optimal design).
We solve the design problem with Frank-Wolfe using Khachiyan's closed-form
step plus away steps (Todd-Yildirim), which converges linearly and leaves
sparse weights supported on the contact points.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import cKDTree

from .errors import VolspanError
from .geometry import PointSet, apply_linear_map, span_basis, symmetrize_with_map

MAX_ITER = 10**6
# a 1e-6 volume gap still leaves O(1e-6) shape error, too coarse for 1e-6 John residuals
JOHN_EPS = 1e-10
_REFRESH = 256  # recompute M^-1 from scratch every so many rank-one updates


def _err(code, msg, **kw):
    return VolspanError(code, msg, module="mvee", **kw)


@dataclass(frozen=True)
class Ellipsoid:
    """Origin-centred ellipsoid ``{y : y^T A^-1 y <= 1}``.

    ``log_volume`` is ``0.5 * log det A``, the log of the volume relative to
    the unit ball. ``design_weights`` are the solver weights on ``points``
    (the symmetrised input) and ``iterations`` the number of solver steps.
    """
    shape: np.ndarray
    log_volume: float
    points: np.ndarray = field(default=None, repr=False)
    design_weights: np.ndarray = field(default=None, repr=False)
    iterations: int = 0
    gap: float = 0.0

    def norms(self, X):
        """``sqrt(y^T A^-1 y)`` for each row ``y`` of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        L = np.linalg.cholesky(self.shape)
        Z = np.linalg.solve(L, X.T)
        return np.sqrt(np.sum(Z * Z, axis=0))


@dataclass(frozen=True)
class JohnCertificate:
    transform: np.ndarray
    weights: np.ndarray
    residual: float
    weight_sum: float
    points: np.ndarray = field(default=None, repr=False)

    def recompute_residual(self):
        X = self.points
        R = (X.T * self.weights) @ X - np.eye(X.shape[1])
        return float(np.linalg.norm(R, 2))


def design_weights(X, tol, max_iter=MAX_ITER):
    """Weights ``u`` on the simplex that approximately maximise ``log det M(u)``.

    Stops once every point has ``g_i = x_i^T M^-1 x_i <= d (1 + tol)`` and
    every supported point has ``g_i >= d (1 - tol)``.

    Returns ``(u, g, iterations)``.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    u = np.full(n, 1.0 / n)
    Minv = np.linalg.inv(X.T @ (X * u[:, None]))
    g = np.einsum("ij,jk,ik->i", X, Minv, X)
    for it in range(1, max_iter + 1):
        j = int(np.argmax(g))
        supp = np.flatnonzero(u > 0)
        k = int(supp[np.argmin(g[supp])])
        up = g[j] / d - 1.0
        down = 1.0 - g[k] / d
        if up <= tol and down <= tol:
            return u, g, it - 1
        if up >= down or u[k] >= 1.0 - 1e-12:
            i = j
            tau = (g[j] - d) / (d * (g[j] - 1.0))
        else:
            i = k
            drop = -u[k] / (1.0 - u[k])
            tau = drop if g[k] <= 1.0 else max((g[k] - d) / (d * (g[k] - 1.0)), drop)
        u *= 1.0 - tau
        u[i] += tau
        if tau < 0 and u[i] < 1e-300:
            u[i] = 0.0
        if it % _REFRESH == 0 or tau >= 1.0 - 1e-9:
            # tau = 1 (possible when d = 1) leaves a single support point
            Minv = np.linalg.inv(X.T @ (X * u[:, None]))
        else:
            # (1 - tau) M + tau x x^T, inverted by Sherman-Morrison
            a = tau / (1.0 - tau)
            w = Minv @ X[i]
            Minv = (Minv - np.outer(w, w) * (a / (1.0 + a * g[i]))) / (1.0 - tau)
        g = np.einsum("ij,jk,ik->i", X, Minv, X)
    raise _err("no_convergence", f"design solver did not converge in {max_iter} iterations",
               gap=float(max(g.max() / d - 1.0, 0.0)))


def _symmetric_points(K):
    if K.symmetric_flag:
        return K.points
    X, _, _ = symmetrize_with_map(K)
    return X


def mvee_approx(K, eps=1e-6):
    """Enclosing ellipsoid of ``K`` with volume within ``(1 + eps)`` of the MVEE.

    ``K`` is symmetrised first when it is not closed under negation. Every
    point of ``K`` satisfies ``y^T A^-1 y <= 1`` up to rounding, since the
    design matrix is scaled by the largest leverage ``max_i g_i``.
    """
    if not 0 < eps < 1:
        raise _err("bad_eps", "eps must lie in (0, 1)")
    X = _symmetric_points(K)
    d = X.shape[1]
    r = span_basis(X).shape[1]
    if r < d:
        raise _err("degenerate_span", f"points span a {r}-dimensional subspace of R^{d}", rank=r)
    # (g_max / d)^(d/2) <= 1 + eps bounds the volume ratio against the dual
    tol = (1.0 + eps) ** (2.0 / d) - 1.0
    u, g, iters = design_weights(X, tol)
    M = X.T @ (X * u[:, None])
    A = g.max() * 0.5 * (M + M.T)
    _, logdet = np.linalg.slogdet(A)
    return Ellipsoid(shape=A, log_volume=0.5 * logdet, points=X, design_weights=u,
                     iterations=iters, gap=float(g.max() / d - 1.0))


def inverse_sqrt(A):
    lam, U = np.linalg.eigh(0.5 * (A + A.T))
    return (U / np.sqrt(lam)) @ U.T


def to_john_position(K, eps=1e-6):
    """Map ``K`` by ``A^{-1/2}`` so its (approximate) MVEE becomes the unit ball.

    The ellipsoid is solved at ``min(eps, JOHN_EPS)`` so that the weights of
    :func:`john_weights` can reach a 1e-6 residual downstream.

    Returns ``(K_john, transform)``.
    """
    E = mvee_approx(K, min(eps, JOHN_EPS))
    T = inverse_sqrt(E.shape)
    return apply_linear_map(K, T), T


def _pair_partners(X, tol=1e-12):
    tree = cKDTree(X)
    dist, j = tree.query(-X, k=1, p=np.inf)
    return np.where(dist <= tol, j, -1)


def _sym_average(c, partner):
    out = c.copy()
    has = partner >= 0
    out[has] = 0.5 * (c[has] + c[partner[has]])
    return out


def _residual(X, c):
    return float(np.linalg.norm((X.T * c) @ X - np.eye(X.shape[1]), 2))


def _nnls_refine(X, support):
    d = X.shape[1]
    iu = np.triu_indices(d)
    scale = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    cols = np.einsum("ni,nj->nij", X[support], X[support])[:, iu[0], iu[1]] * scale
    target = np.eye(d)[iu] * scale
    w, _ = nnls(cols.T, target, maxiter=50 * max(len(support), 1))
    c = np.zeros(len(X))
    c[support] = w
    return c


def john_weights(K_john, tol=1e-6, eps=None):
    """Non-negative ``c`` with ``sum c_i x_i x_i^T = I`` for a set in John position.

    The design weights of the MVEE solver, scaled by ``d``, give the first
    candidate; a non-negative least squares pass on the near-contact points
    polishes the residual when needed. Weights are averaged over each
    ``+-x`` pair so that ``sum c_i x_i = 0``.

    Raises ``decomposition_failed`` when the operator-norm residual stays
    above ``tol``.
    """
    X = K_john.points
    n, d = X.shape
    inner = min(tol, 1e-6) * 1e-3 if eps is None else eps
    u, _, _ = design_weights(X, inner)
    partner = _pair_partners(X)

    def polish(c):
        c = np.maximum(_sym_average(c, partner), 0.0)
        total = c.sum()
        if total > d:
            # trace of the identity caps the total weight at d
            c = c * (d / total)
        return c, _residual(X, c)

    best, best_res = polish(d * u)
    if best_res > tol:
        norms = np.linalg.norm(X, axis=1)
        support = np.flatnonzero(norms >= 1.0 - tol)
        c, res = polish(_nnls_refine(X, support))
        if res < best_res:
            best, best_res = c, res
    if best_res > tol:
        raise _err("decomposition_failed", f"residual {best_res:.3e} exceeds tol {tol:.1e}",
                   residual=best_res)
    return JohnCertificate(transform=np.eye(d), weights=best, residual=best_res,
                           weight_sum=float(best.sum()), points=X)


def john_decomposition(K, eps=1e-9, tol=1e-6):
    """``to_john_position`` followed by ``john_weights``, with the transform recorded."""
    Kj, T = to_john_position(K, eps)
    cert = john_weights(Kj, tol)
    return Kj, JohnCertificate(transform=T, weights=cert.weights, residual=cert.residual,
                               weight_sum=cert.weight_sum, points=cert.points)
