"""Hit-and-run sampling of log-concave densities on convex bodies and
exp-volumetric spanners built from i.i.d. samples.

A body is given by a membership oracle, an interior point and a radius ``R``
with ``body ⊆ R * ball``. Chords are found by bisection on the oracle unless
the body supplies an exact ``chord`` routine (the built-in box, ball, simplex
and halfspace bodies do). On each chord the one-dimensional restriction of
the density is sampled exactly: uniform and log-linear densities by inverse
CDF, anything else by rejection from a three-piece envelope built around the
mode, which is valid for every log-concave function.

All routines run many independent chains at once; each chain is a row of an
``(n_chains, d)`` array.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from . import rng as _rng
from .errors import VolspanError
from .geometry import SpannerSet, ellipsoid_norms

_BISECT_STEPS = 50
_GOLDEN_STEPS = 60
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _err(code, msg, **kw):
    return VolspanError(code, msg, module="sampler", **kw)


@dataclass(frozen=True)
class ConvexBodyOracle:
    """Convex body given by a vectorised membership predicate.

    ``membership`` maps an ``(k, d)`` array to ``k`` booleans. ``chord``, when
    present, maps points ``X`` and unit directions ``D`` to arrays
    ``(t_min, t_max)`` such that ``X + t D`` is inside exactly for ``t`` in
    ``[t_min, t_max]``.
    """
    dim: int
    membership: object
    interior_point: np.ndarray
    bounding_radius: float
    chord: object = field(default=None, repr=False)
    name: str = "custom"

    def __post_init__(self):
        x0 = np.asarray(self.interior_point, dtype=float).reshape(-1)
        if x0.shape[0] != self.dim:
            raise _err("dim_mismatch", "interior point has the wrong dimension")
        object.__setattr__(self, "interior_point", x0)
        if not self.contains(x0):
            raise _err("oracle_inconsistent", "interior point is not a member of the body")
        if np.linalg.norm(x0) > self.bounding_radius:
            raise _err("oracle_inconsistent", "interior point lies outside the bounding radius")

    def contains(self, x):
        return bool(np.asarray(self.membership(np.atleast_2d(x)))[0])

    @classmethod
    def from_predicate(cls, dim, predicate, interior_point, bounding_radius, name="custom"):
        """Wrap a scalar ``vector -> bool`` predicate."""
        def member(X):
            return np.fromiter((bool(predicate(x)) for x in np.atleast_2d(X)), dtype=bool)
        return cls(dim, member, interior_point, bounding_radius, name=name)

    @classmethod
    def box(cls, dim, radius=1.0):
        """The cube ``[-radius, radius]^dim``."""
        r = float(radius)

        def member(X):
            return np.all(np.abs(X) <= r, axis=1)

        def chord(X, D):
            with np.errstate(divide="ignore", invalid="ignore"):
                a = (-r - X) / D
                b = (r - X) / D
            lo = np.where(D != 0, np.minimum(a, b), -np.inf)
            hi = np.where(D != 0, np.maximum(a, b), np.inf)
            return lo.max(axis=1), hi.min(axis=1)

        return cls(dim, member, np.zeros(dim), r * math.sqrt(dim), chord, name="box")

    @classmethod
    def ball(cls, dim, radius=1.0):
        """The Euclidean ball of the given radius."""
        r = float(radius)

        def member(X):
            return np.einsum("ij,ij->i", X, X) <= r * r

        def chord(X, D):
            b = np.einsum("ij,ij->i", X, D)
            c = np.einsum("ij,ij->i", X, X) - r * r
            root = np.sqrt(np.maximum(b * b - c, 0.0))
            return -b - root, -b + root

        return cls(dim, member, np.zeros(dim), r, chord, name="ball")

    @classmethod
    def polytope(cls, A, b, interior_point=None, bounding_radius=None, name="polytope"):
        """Bounded polytope ``{x : A x <= b}``.

        Missing interior point and radius are found by linear programming
        (Chebyshev centre and coordinate extents).
        """
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        m, d = A.shape
        if interior_point is None:
            norms = np.linalg.norm(A, axis=1)
            res = linprog(np.r_[np.zeros(d), -1.0], A_ub=np.c_[A, norms], b_ub=b,
                          bounds=[(None, None)] * d + [(0, None)], method="highs")
            if res.status != 0 or res.x[-1] <= 0:
                raise _err("oracle_inconsistent", "polytope has empty interior or is unbounded")
            interior_point = res.x[:d]
        if bounding_radius is None:
            ext = np.zeros(d)
            for j in range(d):
                for sgn in (1.0, -1.0):
                    cost = np.zeros(d)
                    cost[j] = -sgn
                    res = linprog(cost, A_ub=A, b_ub=b, bounds=[(None, None)] * d, method="highs")
                    if res.status != 0:
                        raise _err("oracle_inconsistent", "polytope is unbounded")
                    ext[j] = max(ext[j], abs(res.x[j]))
            bounding_radius = float(np.linalg.norm(ext)) * (1 + 1e-9) + 1e-12

        def member(X):
            return np.all(X @ A.T <= b + 1e-12 * (1 + np.abs(b)), axis=1)

        def chord(X, D):
            slack = b - X @ A.T
            rate = D @ A.T
            with np.errstate(divide="ignore", invalid="ignore"):
                t = slack / rate
            hi = np.where(rate > 0, t, np.inf).min(axis=1)
            lo = np.where(rate < 0, t, -np.inf).max(axis=1)
            return lo, hi

        return cls(d, member, interior_point, bounding_radius, chord, name=name)

    @classmethod
    def simplex(cls, dim):
        """Standard simplex ``{x >= 0, sum x <= 1}``."""
        A = np.vstack([-np.eye(dim), np.ones((1, dim))])
        b = np.r_[np.zeros(dim), 1.0]
        return cls.polytope(A, b, interior_point=np.full(dim, 1.0 / (dim + 1)),
                            bounding_radius=1.0, name="simplex")


@dataclass(frozen=True)
class LogDensity:
    """Unnormalised log-density, vectorised over rows.

    ``kind`` selects the exact line sampler: ``"uniform"``, ``"linear"``
    (``log p(x) = L^T x`` with ``L = direction``) or ``"custom"``.
    """
    log_pdf_unnormalized: object
    concavity_flag: bool = True
    kind: str = "custom"
    direction: np.ndarray = None

    @classmethod
    def uniform(cls):
        return cls(lambda X: np.zeros(len(np.atleast_2d(X))), True, "uniform")

    @classmethod
    def linear(cls, L):
        """Density proportional to ``exp(L^T x)``."""
        L = np.asarray(L, dtype=float).reshape(-1)
        if not np.any(L):
            return cls.uniform()
        return cls(lambda X: np.atleast_2d(X) @ L, True, "linear", L)

    @classmethod
    def gaussian(cls, mean, precision):
        mean = np.asarray(mean, dtype=float)
        P = np.asarray(precision, dtype=float)

        def logpdf(X):
            Z = np.atleast_2d(X) - mean
            return -0.5 * np.einsum("ij,jk,ik->i", Z, P, Z)

        return cls(logpdf, True, "custom")


@dataclass(frozen=True)
class ExpSpannerParams:
    """Sample count ``T = ceil(c_sample * (d + log(1/eps)^2))``."""
    eps: float
    dim: int
    c_sample: float = 8.0

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise _err("bad_parameter", "eps must lie in (0, 1)")
        if not self.c_sample > 0:
            raise _err("bad_parameter", "c_sample must be positive")

    @property
    def sample_count(self):
        T = math.ceil(self.c_sample * (self.dim + math.log(1.0 / self.eps) ** 2))
        return max(T, self.dim + 1)


def _bisect_chord(body, X, D):
    R = body.bounding_radius
    far = 2.0 * R * (1 + 1e-9) + 1e-12
    out = []
    for sign in (1.0, -1.0):
        if np.any(body.membership(X + sign * far * D)):
            raise _err("oracle_inconsistent", "membership holds beyond twice the bounding radius")
        lo = np.zeros(len(X))
        hi = np.full(len(X), far)
        for _ in range(_BISECT_STEPS):
            mid = 0.5 * (lo + hi)
            inside = np.asarray(body.membership(X + sign * mid[:, None] * D), dtype=bool)
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        out.append(sign * lo)
    return out[1], out[0]


def _chord(body, X, D):
    if body.chord is not None:
        lo, hi = body.chord(X, D)
    else:
        lo, hi = _bisect_chord(body, X, D)
    lo = np.minimum(lo, 0.0)
    hi = np.maximum(hi, 0.0)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise _err("oracle_inconsistent", "chord is unbounded")
    return lo, hi


def _truncated_exp(a, lo, hi, u):
    """Sample ``t`` in ``[lo, hi]`` with density ``∝ exp(a t)``."""
    length = hi - lo
    t = lo + u * length
    big = np.abs(a * length) > 1e-12
    ab, vb = a[big], 1.0 - u[big]
    from_lo = lo[big] + np.log(vb + (1.0 - vb) * np.exp(ab * length[big])) / ab
    from_hi = hi[big] + np.log(vb + (1.0 - vb) * np.exp(-ab * length[big])) / ab
    t[big] = np.where(ab < 0, from_lo, from_hi)
    return np.clip(t, lo, hi)


def _line_logpdf(density, X, D, t):
    return np.asarray(density.log_pdf_unnormalized(X + t[:, None] * D), dtype=float)


def _golden_mode(f, lo, hi):
    a, b = lo.copy(), hi.copy()
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(_GOLDEN_STEPS):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        nc = b - _INVPHI * (b - a)
        nd = a + _INVPHI * (b - a)
        c_new = np.where(left, nc, d)
        d_new = np.where(left, c, nd)
        fc_new = np.where(left, f(nc), fd)
        fd_new = np.where(left, fc, f(nd))
        c, d, fc, fd = c_new, d_new, fc_new, fd_new
    m = 0.5 * (a + b)
    # the mode may sit on an end of the chord
    cand = np.stack([m, lo, hi])
    vals = np.stack([f(m), f(lo), f(hi)])
    k = np.argmax(vals, axis=0)
    idx = np.arange(len(lo))
    return cand[k, idx], vals[k, idx]


def _level_crossing(f, inner, outer, level):
    """Bisection for ``f = level`` between ``inner`` (above) and ``outer`` (below)."""
    a, b = inner.copy(), outer.copy()
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (a + b)
        above = f(mid) >= level
        a = np.where(above, mid, a)
        b = np.where(above, b, mid)
    return a


def _sample_logconcave_line(density, X, D, lo, hi, gen):
    """Exact draw from a log-concave density restricted to each chord.

    Envelope: the mode value on ``[tl, tr]`` (where the log-density drops by 1)
    and, beyond, the secant through the mode and the drop point. Concavity
    keeps the log-density below this envelope, and the acceptance rate is at
    least ``1 / (2e)``.
    """
    n = len(X)
    t_out = np.empty(n)
    todo = np.arange(n)
    Xa, Da, la, ha = X, D, lo, hi
    f = lambda tt: _line_logpdf(density, Xa, Da, tt)
    m, fm = _golden_mode(f, la, ha)
    level = fm - 1.0
    tr = np.where(f(ha) >= level, ha, _level_crossing(f, m, ha, level))
    tl = np.where(f(la) >= level, la, _level_crossing(f, m, la, level))
    lam_r = np.maximum(tr - m, 1e-300)
    lam_l = np.maximum(m - tl, 1e-300)
    w_mid = tr - tl
    w_r = np.where(ha > tr, lam_r * np.exp(-1.0) * -np.expm1(-(ha - tr) / lam_r), 0.0)
    w_l = np.where(tl > la, lam_l * np.exp(-1.0) * -np.expm1(-(tl - la) / lam_l), 0.0)
    total = w_mid + w_r + w_l
    while todo.size:
        k = todo.size
        u_piece = gen.random(k) * total[todo]
        u_pos = gen.random(k)
        u_acc = gen.random(k)
        j = todo
        in_mid = u_piece < w_mid[j]
        in_r = ~in_mid & (u_piece < w_mid[j] + w_r[j])
        t = tl[j] + u_pos * w_mid[j]
        env = fm[j].copy()
        # right tail: envelope fm - 1 - (t - tr) / lam_r on (tr, hi]
        tr_t = _truncated_exp(-1.0 / lam_r[j], tr[j], ha[j], u_pos)
        tl_t = _truncated_exp(1.0 / lam_l[j], la[j], tl[j], u_pos)
        t = np.where(in_mid, t, np.where(in_r, tr_t, tl_t))
        env = np.where(in_mid, env,
                       np.where(in_r, fm[j] - 1.0 - (t - tr[j]) / lam_r[j],
                                fm[j] - 1.0 - (tl[j] - t) / lam_l[j]))
        val = _line_logpdf(density, X[j], D[j], t)
        ok = np.log(np.maximum(u_acc, 1e-300)) <= val - env
        t_out[j[ok]] = t[ok]
        todo = j[~ok]
    return t_out


def _line_sample(density, X, D, lo, hi, gen):
    if density.kind == "uniform":
        return lo + gen.random(len(X)) * (hi - lo)
    if density.kind == "linear":
        return _truncated_exp(D @ density.direction, lo, hi, gen.random(len(X)))
    return _sample_logconcave_line(density, X, D, lo, hi, gen)


def hit_and_run_step(body, density, X, gen):
    """One hit-and-run move for every chain (row) of ``X``."""
    D = gen.standard_normal(X.shape)
    D /= np.linalg.norm(D, axis=1, keepdims=True)
    lo, hi = _chord(body, X, D)
    t = _line_sample(density, X, D, lo, hi, gen)
    return X + t[:, None] * D


def hit_and_run_sample(body, density, n, burn_in=None, seed=0, thin=None, n_chains=None,
                       initial=None):
    """``n`` approximate samples from ``density`` restricted to ``body``.

    Parameters
    ----------
    body : ConvexBodyOracle
    density : LogDensity
    n : int
        Number of samples returned.
    burn_in : int, optional
        Steps per chain before the first kept sample, default ``100 d^2``.
    seed : int
        Root seed; the chain stream is ``(seed, "sampler:hit_and_run")``.
    thin : int, optional
        Steps between kept samples of a chain, default ``d^2``.
    n_chains : int, optional
        Independent chains run side by side, default ``min(n, 1000)``.
    initial : array, optional
        Starting points, one row per chain; default is the interior point.

    Returns
    -------
    ndarray of shape ``(n, d)``, rows ordered by draw round then chain.
    """
    d = body.dim
    if n < 1:
        raise _err("bad_parameter", "n must be at least 1")
    burn_in = 100 * d * d if burn_in is None else int(burn_in)
    thin = d * d if thin is None else int(thin)
    if burn_in < 1 or thin < 1:
        raise _err("bad_parameter", "burn_in and thin must be at least 1")
    if initial is not None:
        X = np.atleast_2d(np.asarray(initial, dtype=float)).copy()
        n_chains = len(X)
    else:
        n_chains = min(n, 1000) if n_chains is None else int(n_chains)
        X = np.tile(body.interior_point, (n_chains, 1))
    if not np.all(body.membership(X)):
        raise _err("oracle_inconsistent", "a starting point is outside the body")
    gen = _rng.stream(seed, "sampler:hit_and_run")
    for _ in range(burn_in):
        X = hit_and_run_step(body, density, X, gen)
    rounds = math.ceil(n / n_chains)
    out = np.empty((rounds, n_chains, d))
    for r in range(rounds):
        if r:
            for _ in range(thin):
                X = hit_and_run_step(body, density, X, gen)
        out[r] = X
    return out.reshape(-1, d)[:n]


def relative_spanner_certificate(S, beta):
    """``True`` when ``lambda_min(W) >= 1/beta - 1e-8``.

    Then ``|x|_E(S)^2 <= beta |x|^2`` for every ``x``.
    """
    lam = np.linalg.eigvalsh(S.gram)
    return bool(lam[0] >= 1.0 / beta - 1e-8)


def exp_volumetric_spanner(body, density, params, seed=0, **sampler_kw):
    """``T = params.sample_count`` hit-and-run samples used as a spanner.

    Each sample comes from its own chain, so the points are independent up to
    the mixing error of the burn-in.
    """
    T = params.sample_count
    sampler_kw.setdefault("n_chains", T)
    pts = hit_and_run_sample(body, density, T, seed=seed, **sampler_kw)
    return SpannerSet.from_vectors(pts)


def whitened_min_eig(S, second_moment):
    """``lambda_min`` of ``(1/T) sum (Sigma^{-1/2} u)(Sigma^{-1/2} u)^T``."""
    lam, U = np.linalg.eigh(np.asarray(second_moment, dtype=float))
    Wm = (U / np.sqrt(lam)) @ U.T
    G = Wm @ S.gram @ Wm / S.size
    return float(np.linalg.eigvalsh(0.5 * (G + G.T))[0])


def tail_rate(S, samples, theta):
    """Fraction of ``samples`` with ``|x|_E(S) >= theta``."""
    return float(np.mean(ellipsoid_norms(S, samples) >= theta))
