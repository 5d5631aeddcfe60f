"""C-approximate barycentric spanners from a linear optimisation oracle.

A basis ``b_1, ..., b_d`` of points of ``K`` is C-approximate barycentric
when every ``x`` in ``K`` is ``sum a_i b_i`` with all ``|a_i| <= C``. By
Cramer's rule ``a_i = det(B with column i replaced by x) / det(B)``, and the
replaced determinant is the linear functional ``x -> det(B) (B^-1 x)_i``, so
maximising it over ``K`` takes two oracle calls (for ``+`` and ``-``).

The construction starts from the identity, replaces each column by the point
maximising ``|det|``, then swaps columns while some swap multiplies ``|det|``
by more than ``C``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import VolspanError
from .geometry import SpannerSet

DEGENERATE_RTOL = 1e-12
CALL_KAPPA = 4.0


def _err(code, msg, **kw):
    return VolspanError(code, msg, module="barycentric", **kw)


class LinearOptOracle:
    """``argmax_{x in K} <v, x>`` with a call counter.

    For a finite set the search is exhaustive and ties go to the lowest
    index; ``last_index`` then holds the index of the returned point.
    """

    def __init__(self, K=None, argmax_fn=None, dim=None):
        if (K is None) == (argmax_fn is None):
            raise _err("bad_oracle", "give exactly one of a point set or an argmax function")
        self.K = K
        self._fn = argmax_fn
        self.dim = K.dim if K is not None else int(dim)
        self.call_counter = 0
        self.last_index = None

    def argmax(self, v):
        self.call_counter += 1
        v = np.asarray(v, dtype=float)
        if self.K is not None:
            i = int(np.argmax(self.K.points @ v))
            self.last_index = i
            return self.K.points[i]
        self.last_index = None
        return np.asarray(self._fn(v), dtype=float)


@dataclass(frozen=True)
class BarycentricBasis:
    """``basis`` rows are the ``d`` chosen points; ``indices`` refer to the
    oracle's point set (``-1`` when the oracle is not finite)."""
    basis: np.ndarray
    approx_C: float
    det_value: float
    indices: np.ndarray
    oracle_calls: int
    call_envelope: float
    swap_ratios: list = field(default_factory=list)

    def coefficients(self, X):
        """Rows ``a`` with ``x = sum a_i b_i`` for each row ``x`` of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.linalg.solve(self.basis.T, X.T).T


def call_envelope(d, C, kappa=CALL_KAPPA):
    """``kappa d^2 max(log_C d, 1)``; the max keeps the envelope positive at ``d = 1``."""
    return kappa * d * d * max(math.log(d) / math.log(C), 1.0)


def _best_replacement(oracle, B, i):
    """Point maximising ``|(B^-1 x)_i|`` and that ratio, using two oracle calls."""
    row = np.linalg.solve(B.T, np.eye(len(B))[i])  # row i of B^-1
    best = None
    for sgn in (1.0, -1.0):
        x = oracle.argmax(sgn * row)
        ratio = abs(float(row @ x))
        if best is None or ratio > best[1]:
            best = (x, ratio, oracle.last_index)
    return best


def barycentric_spanner(oracle, d=None, C=2.0):
    """C-approximate barycentric spanner of the set behind ``oracle``.

    Raises ``subspace_degenerate`` with the achieved rank when ``K`` lies in
    a proper subspace.
    """
    d = oracle.dim if d is None else int(d)
    if not C > 1:
        raise _err("bad_parameter", "C must exceed 1")
    B = np.eye(d)  # columns
    idx = np.full(d, -1)
    achieved = 0
    for i in range(d):
        x, ratio, j = _best_replacement(oracle, B, i)
        trial = B.copy()
        trial[:, i] = x
        det = abs(np.linalg.det(trial))
        if det >= DEGENERATE_RTOL * np.prod(np.linalg.norm(trial, axis=0)) and ratio > 0:
            B, idx[i] = trial, -1 if j is None else j
            achieved += 1
    if achieved < d:
        raise _err("subspace_degenerate", f"points span only {achieved} of {d} dimensions",
                   rank=achieved)
    ratios = []
    swapped = True
    while swapped:
        swapped = False
        for i in range(d):
            x, ratio, j = _best_replacement(oracle, B, i)
            if ratio > C * (1 + 1e-12):
                B[:, i] = x
                idx[i] = -1 if j is None else j
                ratios.append(ratio)
                swapped = True
                break
    return BarycentricBasis(basis=B.T.copy(), approx_C=float(C), det_value=abs(float(np.linalg.det(B))),
                            indices=idx, oracle_calls=oracle.call_counter,
                            call_envelope=call_envelope(d, C), swap_ratios=ratios)


def ratio_spanner(oracle, d=None, C=2.0):
    """The barycentric basis as a spanner with ``|x|_E(S) <= C sqrt(d)`` on ``K``."""
    bb = barycentric_spanner(oracle, d, C)
    if oracle.K is not None:
        return SpannerSet.from_points(oracle.K, bb.indices)
    return SpannerSet.from_vectors(bb.basis)
