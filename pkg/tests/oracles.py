"""Independent reference computations used by the tests.

Each routine takes a different numerical route from the library code it
checks (explicit SVD, least squares, plain loops, Monte Carlo).
"""
import itertools
import math

import numpy as np


def svd_pinv_norm(V, x, rtol=1e-10):
    """``sqrt(x^T (V^T V)^+ x)`` through a full SVD of the Gram matrix; ``inf`` off-span."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    x = np.asarray(x, dtype=float)
    G = V.T @ V
    U, s, _ = np.linalg.svd(G)
    keep = s > rtol * s[0]
    Uk = U[:, keep]
    if np.linalg.norm(x - Uk @ (Uk.T @ x)) > 1e-8 * max(np.linalg.norm(x), 1e-300):
        return math.inf
    y = Uk.T @ x
    return float(np.sqrt(np.sum(y * y / s[keep])))


def least_norm_coefficients(V, x):
    """Minimum-norm ``alpha`` with ``sum alpha_i v_i = x`` (rows of ``V``), via lstsq."""
    alpha, *_ = np.linalg.lstsq(np.atleast_2d(V).T, x, rcond=None)
    return alpha


def random_symmetric_set(rng, d, n_half):
    X = rng.standard_normal((n_half, d)) * rng.uniform(0.2, 3.0, size=d)
    return np.vstack([X, -X])


def whitened_vectors(rng, m, d):
    """``m`` rows with ``sum v v^T = I``."""
    G = rng.standard_normal((m, d)) * rng.uniform(0.1, 2.0, size=(m, 1))
    lam, U = np.linalg.eigh(G.T @ G)
    return G @ (U / np.sqrt(lam)) @ U.T


def kappa_direct(c):
    return (c + 1 + 2 * math.sqrt(c)) / (c + 1 - 2 * math.sqrt(c))


def min_spanner_order(X, max_size=3):
    """Smallest multiset size ``k <= max_size`` whose ellipsoid covers all rows, by enumeration."""
    n = len(X)
    for k in range(1, max_size + 1):
        for combo in itertools.combinations_with_replacement(range(n), k):
            V = X[list(combo)]
            if all(svd_pinv_norm(V, x) <= 1 + 1e-9 for x in X):
                return k
    return None


def double_sum_second_moment(X, p, p_hat, L):
    """``E_{x ~ p, x_t ~ p_hat}[(L_hat(x_t)^T x)^2]`` by explicit nested loops."""
    C = sum(ph * np.outer(x, x) for ph, x in zip(p_hat, X))
    Cp = np.linalg.pinv(C)
    total = 0.0
    for ph, xt in zip(p_hat, X):
        L_hat = (L @ xt) * (Cp @ xt)
        for px, x in zip(p, X):
            total += ph * px * (L_hat @ x) ** 2
    return total


def expected_estimator(X, p_hat, L):
    C = sum(ph * np.outer(x, x) for ph, x in zip(p_hat, X))
    Cp = np.linalg.pinv(C)
    return sum(ph * (L @ xt) * (Cp @ xt) for ph, xt in zip(p_hat, X))
