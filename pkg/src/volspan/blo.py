"""GeometricHedge over a finite action set with volumetric-spanner exploration.

Each round the learner

1. draws ``S'`` as ``N`` i.i.d. actions from the current weights ``p_t``;
2. mixes ``p_hat = (1 - gamma) p_t + gamma * uniform(S' + S'')`` where ``S''``
   is a fixed 2-approximate barycentric basis of ``K``;
3. plays ``x_t ~ p_hat``, observes ``l_t = L_t^T x_t`` and forms the
   estimator ``L_hat = l_t C^+ x_t`` with ``C = E_{p_hat}[x x^T]``;
4. updates ``p_{t+1}(x) ∝ p_t(x) exp(-eta L_hat^T x)``.

All inverses are taken on the linear span of ``K``; internally actions are
expressed in an orthonormal basis of that span.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as _rng
from .barycentric import LinearOptOracle, barycentric_spanner
from .errors import VolspanError
from .geometry import PointSet, RANK_RTOL, SpannerSet, span_basis

log = logging.getLogger(__name__)

GAMMA_MAX = 0.5
BOUND_TOL = 1e-12
_CHUNK = 4096


def _err(code, msg, **kw):
    return VolspanError(code, msg, module="blo", **kw)


def _normalize_log(lw):
    # scipy's logsumexp carries heavy per-call overhead for short vectors
    m = lw.max()
    return lw - (m + math.log(np.exp(lw - m).sum()))


# adversaries -------------------------------------------------------------

@dataclass(frozen=True)
class FixedAdversary:
    """Loss vectors given as rows, cycled when shorter than the horizon."""
    vectors: np.ndarray

    def losses(self, T, actions, seed=0):
        V = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        return V[np.arange(T) % len(V)]


@dataclass(frozen=True)
class RandomAdversary:
    """I.i.d. uniform draws from ``[-1, 1]^d``, shrunk so ``max_x |L^T x| <= 1``."""

    def losses(self, T, actions, seed=0):
        gen = _rng.stream(seed, "blo:adversary")
        L = gen.uniform(-1.0, 1.0, size=(T, actions.dim))
        peak = np.abs(L @ actions.points.T).max(axis=1) if T else np.zeros(0)
        return L / np.maximum(peak, 1.0)[:, None]


@dataclass(frozen=True)
class BanditInstance:
    """Finite action set, oblivious loss sequence (``T x d``) and horizon."""
    actions: PointSet
    losses: np.ndarray
    horizon: int
    seed: int = 0

    def __post_init__(self):
        L = np.asarray(self.losses, dtype=float).reshape(-1, self.actions.dim)
        if len(L) != self.horizon:
            raise _err("bad_instance", f"{len(L)} loss vectors for horizon {self.horizon}")
        worst = _max_abs_loss(L, self.actions.points)
        if worst > 1.0 + BOUND_TOL:
            raise _err("unbounded_loss", f"max |L^T x| = {worst:.6g} exceeds 1", max_loss=worst)
        L.setflags(write=False)
        object.__setattr__(self, "losses", L)

    @classmethod
    def from_adversary(cls, actions, adversary, T, seed=0):
        return cls(actions, adversary.losses(T, actions, seed), T, seed)


def _max_abs_loss(L, X):
    worst = 0.0
    for a in range(0, len(L), _CHUNK):
        worst = max(worst, float(np.abs(L[a:a + _CHUNK] @ X.T).max(initial=0.0)))
    return worst


# parameters and state ----------------------------------------------------

def exploration_sample_size(d, T, c_sample=8.0):
    """``N = ceil(c (d + (4 sqrt d + ln 2T)^2))``."""
    return math.ceil(c_sample * (d + (4.0 * math.sqrt(d) + math.log(2.0 * max(T, 1))) ** 2))


@dataclass(frozen=True)
class HedgeParams:
    """``gamma`` and ``eta`` may be ``"auto"`` for the default schedule."""
    gamma: object = "auto"
    eta: object = "auto"
    c_sample: float = 8.0
    seed: int = 0
    diagnostics: bool = False

    def resolve(self, n_actions, d, T):
        """Return ``(gamma, eta, N, s)`` with ``s = N + d``.

        ``eta = sqrt(log|K| / (d T))`` and ``gamma = s * eta`` clamped to
        ``[0, 1/2]``.
        """
        N = exploration_sample_size(d, T, self.c_sample)
        s = N + d
        base = math.sqrt(math.log(max(n_actions, 2)) / (max(d, 1) * max(T, 1)))
        eta = base if self.eta == "auto" else float(self.eta)
        if self.gamma == "auto":
            gamma = s * base
            if gamma > GAMMA_MAX:
                log.warning("gamma = %.4g exceeds %.2g for T = %d; clamped", gamma, GAMMA_MAX, T)
                gamma = GAMMA_MAX
        else:
            gamma = float(self.gamma)
        if not 0.0 <= gamma < 1.0:
            raise _err("bad_parameter", f"gamma = {gamma} outside [0, 1)")
        if not eta > 0:
            raise _err("bad_parameter", f"eta = {eta} must be positive")
        return gamma, eta, N, s


@dataclass(frozen=True)
class HedgeState:
    log_weights: np.ndarray
    round: int
    gamma: float
    eta: float
    spanner_prime_size: int
    cumulative_estimated_loss: np.ndarray

    @classmethod
    def initial(cls, n, gamma, eta, N):
        return cls(np.full(n, -math.log(n)), 0, gamma, eta, N, np.zeros(n))

    @property
    def probs(self):
        return np.exp(_normalize_log(self.log_weights))


@dataclass(frozen=True)
class RoundRecord:
    chosen_index: int
    realized_loss: float
    estimator: np.ndarray
    covariance_logdet: float
    exploration_draw: bool


@dataclass
class RegretTrace:
    """Per-round arrays of one run.

    ``cum_regret[t]`` is the learner's loss over rounds ``0..t`` minus the
    loss of the best fixed action over the same prefix.
    """
    chosen_index: np.ndarray
    losses: np.ndarray
    cum_regret: np.ndarray
    exploration_draw: np.ndarray
    covariance_logdet: np.ndarray
    estimators: np.ndarray
    gamma: float
    eta: float
    N: int
    s: int
    seed: int
    best_action: int
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.chosen_index)

    @property
    def final_regret(self):
        return float(self.cum_regret[-1]) if len(self) else 0.0

    def record(self, t):
        return RoundRecord(int(self.chosen_index[t]), float(self.losses[t]), self.estimators[t],
                           float(self.covariance_logdet[t]), bool(self.exploration_draw[t]))


# single-round operations -------------------------------------------------

def _counts(S, n):
    return np.bincount(np.asarray(S.indices, dtype=np.int64), minlength=n).astype(float)


def _mixture(p, gamma, expl_counts):
    total = expl_counts.sum()
    if total <= 0:
        raise _err("empty_exploration", "exploration spanner is empty")
    return (1.0 - gamma) * p + gamma * expl_counts / total


def build_round_mixture(state, actions, S_prime, S_dprime):
    """``p_hat = (1 - gamma) p_t + gamma / |S_t|`` per occurrence in ``S_t = S' + S''``."""
    n = len(actions)
    counts = np.zeros(n)
    for S in (S_prime, S_dprime):
        if S is not None and S.size:
            counts += _counts(S, n)
    return _mixture(state.probs, state.gamma, counts)


def round_covariance(p_hat, actions):
    """``sum_x p_hat(x) x x^T``."""
    X = actions.points if isinstance(actions, PointSet) else np.asarray(actions, dtype=float)
    C = (X.T * p_hat) @ X
    return 0.5 * (C + C.T)


def _pinv_psd(C):
    lam, U = np.linalg.eigh(C)
    keep = lam > RANK_RTOL * max(lam[-1], 0.0)
    return (U[:, keep] / lam[keep]) @ U[:, keep].T, U[:, keep]


def loss_estimator(C, x_t, ell):
    """``ell * C^+ x_t``; ``x_t`` must lie in the range of ``C``."""
    x_t = np.asarray(x_t, dtype=float)
    Cp, U = _pinv_psd(np.asarray(C, dtype=float))
    off = x_t - U @ (U.T @ x_t)
    if np.linalg.norm(off) > 1e-8 * max(np.linalg.norm(x_t), 1.0):
        raise _err("estimator_span_violation", "played action lies outside the range of C")
    return ell * (Cp @ x_t)


def hedge_update(state, L_hat, actions):
    """Multiplicative update ``p(x) <- p(x) exp(-eta L_hat^T x)`` in log space."""
    X = actions.points if isinstance(actions, PointSet) else np.asarray(actions, dtype=float)
    z = X @ np.asarray(L_hat, dtype=float)
    if not np.all(np.isfinite(z)):
        raise _err("estimator_nan", f"non-finite estimated loss in round {state.round}")
    lw = _normalize_log(state.log_weights - state.eta * z)
    return replace(state, log_weights=lw, round=state.round + 1,
                   cumulative_estimated_loss=state.cumulative_estimated_loss + z)


@dataclass(frozen=True)
class _Geometry:
    """Span coordinates ``Y = X B`` and the fixed barycentric basis counts."""
    B: np.ndarray
    Y: np.ndarray
    dprime: np.ndarray

    @property
    def rank(self):
        return self.B.shape[1]


def _geometry(actions):
    X = actions.points
    B = span_basis(X)
    Y = X @ B
    n = len(X)
    if B.shape[1] == 0:
        return _Geometry(B, Y, np.zeros(n))
    bb = barycentric_spanner(LinearOptOracle(PointSet(Y, symmetric_flag=False)), C=2.0)
    return _Geometry(B, Y, np.bincount(bb.indices, minlength=n).astype(float))


def select_exploration_spanners(state, actions, T, seed=0, c_sample=8.0, gen=None, geometry=None):
    """``S'``: ``N`` i.i.d. draws from ``p_t``; ``S''``: barycentric basis of ``K`` (``C = 2``)."""
    geo = geometry or _geometry(actions)
    gen = gen or _rng.stream(seed, "blo:spanner")
    N = exploration_sample_size(max(geo.rank, 1), T, c_sample)
    counts = gen.multinomial(N, state.probs)
    S1 = SpannerSet.from_points(actions, np.repeat(np.arange(len(actions)), counts))
    if geo.rank == 0:
        return S1, SpannerSet.from_points(actions, [0])
    S2 = SpannerSet.from_points(actions, np.repeat(np.arange(len(actions)), geo.dprime.astype(int)))
    return S1, S2


# diagnostics ----------------------------------------------------------------

TAIL_THETAS = (1.0, 2.0, 3.0)


def _round_diagnostics(Y, p, p_hat, Cinv, L_span, L_hat_y, i, counts, gamma, eta):
    """Exact per-round checks of the estimator identities (span coordinates).

    Returns ``(unbiased_residual, second_moment, magnitude_ratio, tail_mass)``.
    """
    ell_all = Y @ L_span
    # sum over x_t of p_hat(x_t) * l(x_t) C^-1 x_t against the projected loss
    mean_est = Cinv @ (Y.T @ (p_hat * ell_all))
    resid = float(np.linalg.norm(mean_est - L_span)) / max(1.0, float(np.linalg.norm(L_span)))
    G = Y @ Cinv @ Y.T  # G[x, x_t] = x^T C^-1 x_t
    second = float(np.sum(p_hat * ell_all ** 2 * (p @ G ** 2)))
    ratio = np.nan
    if gamma > 0:
        size = counts.sum()
        W = (Y.T * counts) @ Y
        Wn = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", Y, np.linalg.pinv(W), Y), 0.0))
        z = np.abs(Y @ L_hat_y)
        bound = size * Wn * Wn[i] / gamma
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(bound > 0, z / bound, np.where(z > 0, np.inf, 0.0))
        ratio = float(r.max())
    z = np.abs(eta * (Y @ L_hat_y))
    tail = np.array([float(p[z > th].sum()) for th in TAIL_THETAS])
    return resid, second, ratio, tail


# runs -----------------------------------------------------------------------

def prefix_regret(instance, losses_played):
    """``cum_regret[t]`` against the best fixed action of each prefix, plus the final best index."""
    X = instance.actions.points
    T = len(losses_played)
    out = np.empty(T)
    run = np.zeros(len(X))
    cum_played = np.cumsum(losses_played)
    for a in range(0, T, _CHUNK):
        block = np.cumsum(instance.losses[a:a + _CHUNK] @ X.T, axis=0) + run
        out[a:a + _CHUNK] = cum_played[a:a + _CHUNK] - block.min(axis=1)
        run = block[-1]
    best = int(np.argmin(run)) if T else 0
    return out, best


def _run(instance, params, uniform_exploration=False):
    K = instance.actions
    T = instance.horizon
    n = len(K)
    geo = _geometry(K)
    r = geo.rank
    d_eff = max(r, 1)
    gamma, eta, N, s = params.resolve(n, d_eff, T)
    if uniform_exploration:
        base_counts = np.ones(n)
    gen_sp = _rng.stream(params.seed, "blo:spanner")
    gen_act = _rng.stream(params.seed, "blo:action")
    L_span = instance.losses @ geo.B  # loss in span coordinates
    Y = geo.Y
    state = HedgeState.initial(n, gamma, eta, N)
    chosen = np.zeros(T, dtype=np.int64)
    played = np.zeros(T)
    explore = np.zeros(T, dtype=bool)
    logdet = np.zeros(T)
    est = np.zeros((T, K.dim))
    diag = None
    if params.diagnostics:
        diag = {"unbiased_residual": np.zeros(T), "second_moment": np.zeros(T),
                "magnitude_ratio": np.zeros(T), "tail_mass": np.zeros((T, len(TAIL_THETAS))),
                "rank": r}
    for t in range(T):
        p = np.exp(state.log_weights)
        if uniform_exploration:
            counts = base_counts
        else:
            counts = gen_sp.multinomial(N, p) + geo.dprime
        p_hat = _mixture(p, gamma, counts)
        u, v = gen_act.random(2)
        src = counts / counts.sum() if u < gamma else p
        i = min(int(np.searchsorted(np.cumsum(src), v * src.sum(), side="right")), n - 1)
        while src[i] <= 0:  # rounding at the top of the cumulative sum
            i -= 1
        ell = float(instance.losses[t] @ K.points[i])
        if r:
            C = (Y.T * p_hat) @ Y
            sign, ld = np.linalg.slogdet(C)
            Cinv = np.linalg.inv(C)
            L_hat_y = ell * (Cinv @ Y[i])
            z = Y @ L_hat_y
            est[t] = geo.B @ L_hat_y
        else:
            ld, z, L_hat_y, Cinv = -np.inf, np.zeros(n), np.zeros(0), np.zeros((0, 0))
        if not np.all(np.isfinite(z)):
            raise _err("estimator_nan", f"non-finite estimated loss in round {t}")
        if diag is not None and r:
            res, sec, mag, tail = _round_diagnostics(Y, p, p_hat, Cinv, L_span[t], L_hat_y, i,
                                                     counts, gamma, eta)
            diag["unbiased_residual"][t] = res
            diag["second_moment"][t] = sec
            diag["magnitude_ratio"][t] = mag
            diag["tail_mass"][t] = tail
        state = replace(state, log_weights=_normalize_log(state.log_weights - eta * z), round=t + 1,
                        cumulative_estimated_loss=state.cumulative_estimated_loss + z)
        chosen[t], played[t], explore[t], logdet[t] = i, ell, u < gamma, ld
    cum_regret, best = prefix_regret(instance, played)
    return RegretTrace(chosen, played, cum_regret, explore, logdet, est, gamma, eta, N, s,
                       params.seed, best, diag or {})


def run_geometric_hedge(instance, params=None):
    """GeometricHedge with spanner exploration; see the module docstring."""
    return _run(instance, params or HedgeParams())


def baseline_uniform_exploration(instance, params=None):
    """Same learner with exploration spread uniformly over all of ``K``."""
    return _run(instance, params or HedgeParams(), uniform_exploration=True)


def regret_bound(trace, n_actions, d):
    """``(s + d) sqrt(T log|K| / d)``."""
    T = len(trace)
    return (trace.s + d) * math.sqrt(T * math.log(max(n_actions, 2)) / max(d, 1))


def _run_one(args):
    instance, params, baseline = args
    return (baseline_uniform_exploration if baseline else run_geometric_hedge)(instance, params)


def run_seeds(instance, params, seeds, workers=1, baseline=False):
    """One trace per learner seed; runs are independent, so ``workers`` only
    changes wall-clock time, never the traces."""
    jobs = [(instance, replace(params, seed=int(s)), baseline) for s in seeds]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))
