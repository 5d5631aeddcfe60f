"""Stand-alone spanner checker.

Norms are computed as the Euclidean length of the least-norm coefficient
vector ``alpha`` with ``V alpha = x`` (from an SVD of the spanner matrix),
which avoids the Gram-matrix route used during construction.
"""
from dataclasses import dataclass

import numpy as np

from .geometry import RANK_RTOL, SPAN_RTOL


@dataclass(frozen=True)
class VerifyReport:
    norms: np.ndarray
    max_norm: float
    size: int
    violating_indices: np.ndarray
    tol: float

    @property
    def ok(self):
        return self.violating_indices.size == 0

    def to_dict(self):
        return {
            "ok": self.ok,
            "max_norm": float(self.max_norm),
            "size": int(self.size),
            "tol": float(self.tol),
            "violating_indices": [int(i) for i in self.violating_indices],
        }


def least_norm_norms(V, X):
    """``|alpha|_2`` for the least-norm ``alpha`` solving ``V^T alpha = x``.

    ``V`` holds the spanner vectors as rows; rows of ``X`` outside their span
    get ``inf``.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    U, s, Wt = np.linalg.svd(V.T, full_matrices=False)  # V^T = U diag(s) Wt
    keep = s * s > RANK_RTOL * (s[0] * s[0] if s.size else 0.0)  # same cutoff as the Gram eigenvalues
    U, s, Wt = U[:, keep], s[keep], Wt[keep]
    coef = (X @ U) / s  # alpha = Wt^T diag(1/s) U^T x, and |alpha| = |diag(1/s) U^T x|
    out = np.linalg.norm(coef, axis=1)
    resid = np.linalg.norm(X - (X @ U) @ U.T, axis=1)
    scale = np.maximum(np.linalg.norm(X, axis=1), 1e-300)
    out[resid > SPAN_RTOL * scale] = np.inf
    return out


def verify_spanner(indices, points, tol=1e-6):
    """Check ``|x|_E(S) <= 1 + tol`` for every row of ``points``."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    idx = np.asarray(indices, dtype=np.int64)
    norms = least_norm_norms(P[idx], P)
    bad = np.flatnonzero(norms > 1.0 + tol)
    return VerifyReport(norms=norms, max_norm=float(norms.max()), size=int(idx.size),
                        violating_indices=bad, tol=float(tol))
