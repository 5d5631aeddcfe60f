"""Randomised recursive volumetric spanners for finite point sets.

Each level whitens the active points by ``Sigma = sum x x^T``, samples
``M = C d log2 d`` indices with replacement from

    p_i = 1 / (2 n) + |Sigma^{-1/2} x_i|^2 / (2 r),     r = rank(Sigma),

keeps the sample once it covers at least half of the active points and
recurses on the rest. Small active sets are returned whole.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .errors import VolspanError
from .geometry import PointSet, RANK_RTOL, SpannerSet, ellipsoid_norms

UNCOVERED_SLACK = 1e-12


def _err(code, msg, **kw):
    return VolspanError(code, msg, module="fast", **kw)


def _log_term(d):
    return d * math.log2(max(d, 2))


@dataclass(frozen=True)
class FastSpannerConfig:
    c_sample: float = 10.0
    base_threshold: int = None
    max_retries: int = 64
    rng_seed: int = 0

    def __post_init__(self):
        if not self.c_sample > 0:
            raise _err("bad_config", "c_sample must be positive")
        if self.max_retries < 1:
            raise _err("bad_config", "max_retries must be at least 1")

    def sample_size(self, d):
        return max(1, math.ceil(self.c_sample * _log_term(d)))

    def threshold(self, d):
        if self.base_threshold is not None:
            return int(self.base_threshold)
        return math.ceil(10 * _log_term(d))

    def size_bound(self, n, d):
        return self.c_sample * _log_term(d) * (math.ceil(math.log2(max(n, 1))) + 1) + self.threshold(d)


@dataclass
class LevelStats:
    level: int
    n_active: int
    retries: int
    n_sampled: int
    n_uncovered: int


@dataclass(frozen=True)
class FastSpannerResult:
    spanner: SpannerSet
    levels: list = field(default_factory=list)

    @property
    def depth(self):
        return len(self.levels)


def leverage_probabilities(X):
    """Sampling distribution ``p`` and the leverages ``|Sigma^{+1/2} x_i|^2``.

    Returns ``(p, leverage, rank)``.
    """
    n = X.shape[0]
    lam, U = np.linalg.eigh(X.T @ X)
    keep = lam > RANK_RTOL * max(lam[-1], 0.0)
    r = int(keep.sum())
    if r == 0:
        return np.full(n, 1.0 / n), np.zeros(n), 0
    Y = X @ U[:, keep]
    lev = np.einsum("ij,ij->i", Y / lam[keep], Y)
    p = 1.0 / (2 * n) + lev / (2 * r)
    return p / p.sum(), lev, r


def level_sample(K_active, cfg, level=0, gen=None):
    """One accepted level: ``(S_level, uncovered_positions, retries)``.

    ``uncovered_positions`` index into ``K_active``; a point is uncovered when
    its norm against the sample exceeds ``1 + 1e-12``. Sampling is repeated
    until at least ``ceil(n / 2)`` points are covered, at most
    ``cfg.max_retries`` times.
    """
    X = K_active.points
    n, d = X.shape
    if gen is None:
        gen = _rng.stream(cfg.rng_seed, "fast:level", level)
    p, _, _ = leverage_probabilities(X)
    M = cfg.sample_size(d)
    need = math.ceil(n / 2)
    best = 0
    for attempt in range(1, cfg.max_retries + 1):
        idx = np.sort(gen.choice(n, size=M, replace=True, p=p))
        S = SpannerSet.from_points(K_active, idx)
        norms = ellipsoid_norms(S, X)
        uncovered = np.flatnonzero(norms > 1.0 + UNCOVERED_SLACK)
        covered = n - uncovered.size
        if covered >= need:
            return S, uncovered, attempt
        best = max(best, covered)
    raise _err("coverage_failed", f"level {level}: best sample covered {best} of {n} points "
               f"after {cfg.max_retries} attempts", level=level, n_active=n, best_covered=best)


def fast_spanner_run(K, cfg=None):
    """Run the recursion and keep per-level statistics."""
    cfg = cfg or FastSpannerConfig()
    d = K.dim
    thr = cfg.threshold(d)
    active = np.arange(len(K))
    chosen = []
    levels = []
    level = 0
    while active.size:
        if active.size < thr:
            chosen.append(active)
            levels.append(LevelStats(level, int(active.size), 0, int(active.size), 0))
            break
        sub = PointSet(K.points[active], symmetric_flag=False)
        S, uncovered, tries = level_sample(sub, cfg, level)
        chosen.append(active[S.indices])
        levels.append(LevelStats(level, int(active.size), tries, len(S), int(uncovered.size)))
        active = active[uncovered]
        level += 1
    S = SpannerSet.from_points(K, np.concatenate(chosen))
    return FastSpannerResult(spanner=S, levels=levels)


def fast_spanner(K, cfg=None):
    """Volumetric spanner of ``K`` of size ``O(d log d log n)``."""
    return fast_spanner_run(K, cfg).spanner
