"""Exact one-sided Buehler bounds in the trinomial model.

Outcomes ``x = (x1, x2, x3)`` of size ``m`` are ranked by a designated
statistic ``T``.  The lower bound for ``p1 - p2`` at an observed ``k`` is the
infimum of ``p1 - p2`` over all ``p`` under which ``T(X) >= T(k)`` still has
probability above ``1 - beta``.  A bound built this way covers with
probability at least ``beta`` for every ``p``, whatever ``T`` is; ``T`` only
decides how sharp it is.

Parametrisation used for the nuisance search::

    p1 = (eta + delta) / 2,  p2 = (eta - delta) / 2,  p3 = 1 - eta,
    |delta| <= eta <= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.stats import norm

from .errors import ResourceError, ValidationError
from .model import log_factorials, n_trinomial_outcomes, trinomial_outcome_array, TrinomialCounts

ENGINE_ID = "nogold-buehler/1"
STATISTIC_ID = "wald-cc-lower/1"
RATIO_STATISTIC_ID = "ratio-via-diff/1"

SCAN_STEP = 0.02
# log(0) stand-in that keeps 0 * log(0) == 0 and never produces nan
_LOG_ZERO = -1e300
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
# elements per vectorised tail evaluation block
_BLOCK = 1 << 21


@dataclass(frozen=True)
class BoundConfig:
    beta: float = 0.95
    delta_tol: float = 1e-4
    nuisance_grid: int = 201
    refine_iters: int = 40
    max_outcomes: int = 2_000_000

    def __post_init__(self):
        if not (0.0 <= self.beta <= 1.0) or math.isnan(self.beta):
            raise ValidationError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.delta_tol > 0:
            raise ValidationError("delta_tol must be positive")
        if self.nuisance_grid < 3:
            raise ValidationError("nuisance_grid must be at least 3")
        if self.refine_iters < 0:
            raise ValidationError("refine_iters must be nonnegative")

    @property
    def threshold(self) -> float:
        return 1.0 - self.beta


@dataclass(frozen=True)
class BoundResult:
    value: float
    side: str
    level: float
    method: str
    iterations: int = 0
    max_tail_prob: float = float("nan")
    notes: tuple[str, ...] = field(default_factory=tuple)

    def __float__(self):
        return self.value


def _as_counts(k) -> TrinomialCounts:
    return k if isinstance(k, TrinomialCounts) else TrinomialCounts(*k)


def _check_budget(m: int, config: BoundConfig):
    need = n_trinomial_outcomes(m)
    if need > config.max_outcomes:
        raise ResourceError(
            f"m={m} needs {need} outcomes, budget is {config.max_outcomes}", required=need
        )


# -- designated statistic ---------------------------------------------------

def wald_lower_scores(k1, k2, m, beta: float) -> np.ndarray:
    """Continuity-adjusted Wald lower limit for p1 - p2, vectorised over outcomes."""
    k1 = np.asarray(k1, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    m = np.asarray(m, dtype=float)
    a, b = k1 + 0.5, k2 + 0.5
    mt = m + 1.0
    d_hat = (a - b) / mt
    se = np.sqrt(a + b - (a - b) ** 2 / mt) / mt
    z = norm.ppf(beta)
    with np.errstate(invalid="ignore"):
        raw = d_hat - z * se
    out = np.clip(raw, -1.0, 1.0)
    return np.where(m == 0, -1.0, out)


def approx_lower_diff(k, beta: float) -> float:
    """Ordering score of one outcome (fast approximate lower limit for p1 - p2)."""
    k = _as_counts(k)
    return float(wald_lower_scores(k.k1, k.k2, k.m, beta))


# -- ordering tables --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OrderingTable:
    """All outcomes of size m, sorted so that every tail is a prefix.

    With ``descending=True`` the tail of ``t`` is ``{T >= t}``, otherwise
    ``{T <= t}``.  Ties keep lexicographic outcome order.
    """

    m: int
    scores: np.ndarray      # sorted
    counts: np.ndarray      # (N, 3) floats, same order
    log_coef: np.ndarray    # log multinomial coefficients, same order
    descending: bool
    index: dict

    @classmethod
    def build(cls, m: int, raw_scores: np.ndarray, descending: bool) -> "OrderingTable":
        outcomes = trinomial_outcome_array(m)
        key = -raw_scores if descending else raw_scores
        order = np.argsort(key, kind="stable")
        counts = outcomes[order]
        lf = log_factorials(m)
        log_coef = lf[m] - lf[counts].sum(axis=1)
        index = {tuple(int(c) for c in row): i for i, row in enumerate(counts)}
        return cls(m, raw_scores[order], counts.astype(float), log_coef, descending, index)

    def score_of(self, k: TrinomialCounts) -> float:
        return float(self.scores[self.index[(k.k1, k.k2, k.k3)]])

    def tail_size(self, t_obs: float) -> int:
        if self.descending:
            return int(np.searchsorted(-self.scores, -t_obs, side="right"))
        return int(np.searchsorted(self.scores, t_obs, side="right"))

    def tail_probs(self, probs: np.ndarray, size: int) -> np.ndarray:
        """Tail mass of the first ``size`` outcomes for each row of ``probs`` (P, 3)."""
        probs = np.atleast_2d(probs)
        if size == 0:
            return np.zeros(len(probs))
        if size == len(self.scores):
            return np.ones(len(probs))
        with np.errstate(divide="ignore"):
            logp = np.log(np.clip(probs, 0.0, 1.0))
        logp[np.isneginf(logp)] = _LOG_ZERO
        counts = self.counts[:size]
        coef = self.log_coef[:size]
        rows = max(1, _BLOCK // size)
        out = np.empty(len(probs))
        for start in range(0, len(probs), rows):
            block = logp[start:start + rows] @ counts.T
            block += coef
            np.exp(block, out=block)
            out[start:start + rows] = block.sum(axis=1)
        return np.minimum(out, 1.0)


@lru_cache(maxsize=256)
def diff_ordering_table(m: int, beta: float) -> OrderingTable:
    outcomes = trinomial_outcome_array(m)
    scores = wald_lower_scores(outcomes[:, 0], outcomes[:, 1], m, beta)
    return OrderingTable.build(m, scores, descending=True)


def _diff_probs(delta, eta) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    p1 = np.clip((eta + delta) / 2.0, 0.0, 1.0)
    p2 = np.clip((eta - delta) / 2.0, 0.0, 1.0)
    p3 = np.clip(1.0 - eta, 0.0, 1.0)
    return np.stack([p1, p2, p3], axis=-1)


def tail_prob(m: int, delta: float, eta: float, t_obs: float, ordering_table: OrderingTable) -> float:
    """P(T(X) >= t_obs) for X ~ M(m, p(delta, eta))."""
    if ordering_table.m != m:
        raise ValidationError("ordering table was built for a different m")
    if not (abs(delta) <= eta + 1e-15 and eta <= 1.0 + 1e-15):
        raise ValidationError(f"(delta, eta)=({delta}, {eta}) is not a trinomial parameter")
    size = ordering_table.tail_size(t_obs)
    return float(ordering_table.tail_probs(_diff_probs(delta, eta)[None, :], size)[0])


# -- nuisance maximisation --------------------------------------------------

def _golden_max(f, a: np.ndarray, b: np.ndarray, iters: int, best: np.ndarray) -> np.ndarray:
    """Vectorised golden-section ascent on [a, b]; returns max(best, values seen)."""
    if iters <= 0:
        return best
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    best = np.maximum(best, np.maximum(fc, fd))
    for _ in range(iters):
        left = fc >= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        c, d = (
            np.where(left, b - _INV_PHI * (b - a), d),
            np.where(left, c, a + _INV_PHI * (b - a)),
        )
        fx = f(np.where(left, c, d))
        best = np.maximum(best, fx)
        fc, fd = np.where(left, fx, fd), np.where(left, fc, fx)
    return best


def _grid_then_refine(evaluate, lo: np.ndarray, hi: np.ndarray, config: BoundConfig) -> np.ndarray:
    """max over x in [lo_i, hi_i] of evaluate(i, x), for each row i.

    ``evaluate`` takes an array of row indices and a same-shaped array of
    abscissae and returns the objective there.
    """
    g = config.nuisance_grid
    frac = np.linspace(0.0, 1.0, g)
    xs = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    rows = np.repeat(np.arange(len(lo)), g)
    vals = evaluate(rows, xs.ravel()).reshape(len(lo), g)
    i = np.argmax(vals, axis=1)
    best = vals[np.arange(len(lo)), i]
    a = xs[np.arange(len(lo)), np.maximum(i - 1, 0)]
    b = xs[np.arange(len(lo)), np.minimum(i + 1, g - 1)]
    idx = np.arange(len(lo))
    return _golden_max(lambda x: evaluate(idx, x), a, b, config.refine_iters, best)


def _profile_diff(table: OrderingTable, size: int, deltas, config: BoundConfig) -> np.ndarray:
    """M(delta) = max over eta of the tail mass, for each delta."""
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))

    def evaluate(rows, eta):
        return table.tail_probs(_diff_probs(deltas[rows], eta), size)

    lo = np.abs(deltas)
    return _grid_then_refine(evaluate, lo, np.ones_like(lo), config)


def _smallest_qualifying(profile, lo_end: float, hi_end: float, threshold: float, config: BoundConfig):
    """Smallest parameter in [lo_end, hi_end] whose profile value exceeds ``threshold``.

    Coarse scan upward, then bisection inside the first qualifying cell.  The
    returned value is the lower bracket end, i.e. never above the crossing.
    Returns ``(value, evaluations, found)``.
    """
    n_steps = int(round((hi_end - lo_end) / SCAN_STEP))
    grid = lo_end + SCAN_STEP * np.arange(n_steps + 1)
    grid[-1] = hi_end
    evals = 0
    chunk = 8
    first = None
    for start in range(0, len(grid), chunk):
        vals = profile(grid[start:start + chunk])
        evals += len(vals)
        hits = np.nonzero(vals > threshold)[0]
        if len(hits):
            first = start + int(hits[0])
            break
    if first is None:
        return lo_end, evals, False
    if first == 0:
        return float(grid[0]), evals, True
    lo, hi = float(grid[first - 1]), float(grid[first])
    while hi - lo > config.delta_tol:
        mid = 0.5 * (lo + hi)
        evals += 1
        if profile(np.array([mid]))[0] > threshold:
            hi = mid
        else:
            lo = mid
    return lo, evals, True


# -- public bounds ----------------------------------------------------------

def buehler_lower_diff(k, config: BoundConfig | None = None) -> BoundResult:
    """Exact lower ``beta``-confidence bound for p1 - p2 from trinomial counts ``k``."""
    config = config or BoundConfig()
    k = _as_counts(k)
    return _lower_diff_cached(k.k1, k.k2, k.k3, config)


@lru_cache(maxsize=65536)
def _lower_diff_cached(k1: int, k2: int, k3: int, config: BoundConfig) -> BoundResult:
    m = k1 + k2 + k3
    _check_budget(m, config)
    threshold = config.threshold
    table = diff_ordering_table(m, config.beta)
    k = TrinomialCounts(k1, k2, k3)
    size = table.tail_size(table.score_of(k))

    def profile(deltas):
        return _profile_diff(table, size, deltas, config)

    value, evals, found = _smallest_qualifying(profile, -1.0, 1.0, threshold, config)
    notes = () if found else ("no parameter exceeds the tail threshold; returning -1",)
    value = min(max(value, -1.0), 1.0)
    return BoundResult(
        value=value,
        side="lower",
        level=config.beta,
        method=STATISTIC_ID,
        iterations=evals,
        max_tail_prob=float(profile(np.array([value]))[0]),
        notes=notes,
    )


def buehler_upper_diff(k, config: BoundConfig | None = None) -> BoundResult:
    """Upper bound for p1 - p2, by reflecting the lower bound: u0(k1,k2,k3) = -l(k2,k1,k3)."""
    config = config or BoundConfig()
    low = buehler_lower_diff(_as_counts(k).swapped(), config)
    return BoundResult(
        value=-low.value,
        side="upper",
        level=config.beta,
        method=STATISTIC_ID,
        iterations=low.iterations,
        max_tail_prob=low.max_tail_prob,
        notes=low.notes,
    )


def upper_ratio_via_diff(k, config: BoundConfig | None = None) -> BoundResult:
    """Upper bound for (1 - p2)/(1 - p1) capped at 1, via ratio <= 1 + p1 - p2."""
    config = config or BoundConfig()
    up = buehler_upper_diff(k, config)
    return BoundResult(
        value=min(max(1.0 + up.value, 0.0), 1.0),
        side="upper",
        level=config.beta,
        method=RATIO_STATISTIC_ID,
        iterations=up.iterations,
        max_tail_prob=up.max_tail_prob,
        notes=up.notes,
    )


# -- direct ratio bound ------------------------------------------------------

def ratio_parameter(p) -> np.ndarray:
    """(1 - p2)/(1 - p1) capped at 1; equal to 1 wherever p2 <= p1."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    p1, p2 = p[:, 0], p[:, 1]
    denom = np.where(p1 < 1.0, 1.0 - p1, 1.0)
    return np.where(p2 <= p1, 1.0, np.minimum((1.0 - p2) / denom, 1.0))


@lru_cache(maxsize=64)
def ratio_ordering_table(m: int, config: BoundConfig) -> OrderingTable:
    outcomes = trinomial_outcome_array(m)
    scores = np.array([upper_ratio_via_diff(tuple(row), config).value for row in outcomes])
    return OrderingTable.build(m, scores, descending=False)


def _ratio_segment_probs(r, s) -> np.ndarray:
    """Points with ratio exactly r < 1: p1 = s r/(1+r), p2 = 1 - r(1 - p1)."""
    r = np.asarray(r, dtype=float)
    p1 = np.asarray(s, dtype=float) * r / (1.0 + r)
    p2 = 1.0 - r * (1.0 - p1)
    p3 = r - p1 * (1.0 + r)
    return np.clip(np.stack([p1, p2, p3], axis=-1), 0.0, 1.0)


def _ratio_one_max(table: OrderingTable, size: int, config: BoundConfig) -> float:
    """Max tail mass over the region p2 <= p1, where the ratio equals 1."""
    g = config.nuisance_grid
    u = np.linspace(0.0, 1.0, g)
    p1 = np.repeat(u, g)
    p2 = np.tile(u, g) * np.minimum(p1, 1.0 - p1)
    vals = table.tail_probs(np.stack([p1, p2, 1.0 - p1 - p2], axis=-1), size)
    i = int(np.argmax(vals))
    best = vals[i:i + 1]
    x1, x2 = float(p1[i]), float(p2[i])
    step = 1.0 / (g - 1)

    def point(a, b):
        return np.clip(np.stack([a, b, 1.0 - a - b], axis=-1), 0.0, 1.0)

    for _ in range(2):
        cap = min(x1, 1.0 - x1)
        best = _golden_max(
            lambda x: table.tail_probs(point(np.full_like(x, x1), np.clip(x, 0.0, cap)), size),
            np.array([max(x2 - step, 0.0)]), np.array([min(x2 + step, cap)]),
            config.refine_iters, best,
        )
        best = _golden_max(
            lambda x: table.tail_probs(point(np.clip(x, x2, 1.0 - x2), np.full_like(x, x2)), size),
            np.array([max(x1 - step, x2)]), np.array([min(x1 + step, 1.0 - x2)]),
            config.refine_iters, best,
        )
    return float(best[0])


def buehler_upper_ratio(k, config: BoundConfig | None = None) -> BoundResult:
    """Direct Buehler upper bound for (1 - p2)/(1 - p1) capped at 1.

    The designated statistic is :func:`upper_ratio_via_diff`, so the result
    never exceeds it; should numerical search ever produce a larger value the
    statistic itself is returned.
    """
    config = config or BoundConfig()
    k = _as_counts(k)
    return _upper_ratio_cached(k.k1, k.k2, k.k3, config)


@lru_cache(maxsize=4096)
def _upper_ratio_cached(k1: int, k2: int, k3: int, config: BoundConfig) -> BoundResult:
    k = TrinomialCounts(k1, k2, k3)
    _check_budget(k.m, config)
    threshold = config.threshold
    table = ratio_ordering_table(k.m, config)
    size = table.tail_size(table.score_of(k))
    via_diff = upper_ratio_via_diff(k, config).value

    def profile(neg_r):
        r = -np.asarray(neg_r, dtype=float)
        out = np.empty(len(r))
        at_one = r >= 1.0
        if at_one.any():
            out[at_one] = _ratio_one_max(table, size, config)
        if (~at_one).any():
            rr = r[~at_one]

            def evaluate(rows, s):
                return table.tail_probs(_ratio_segment_probs(rr[rows], s), size)

            out[~at_one] = _grid_then_refine(evaluate, np.zeros(len(rr)), np.ones(len(rr)), config)
        return out

    # the largest qualifying r is minus the smallest qualifying -r
    neg, evals, found = _smallest_qualifying(profile, -1.0, 0.0, threshold, config)
    value = -neg if found else 1.0
    notes = [] if found else ["no parameter exceeds the tail threshold; returning 1"]
    if value > via_diff:
        notes.append(f"search gave {value!r} above the designated statistic; using the statistic")
        value = via_diff
    return BoundResult(
        value=min(max(value, 0.0), 1.0),
        side="upper",
        level=config.beta,
        method="buehler-ratio/" + RATIO_STATISTIC_ID,
        iterations=evals,
        max_tail_prob=float(profile(np.array([-value]))[0]),
        notes=tuple(notes),
    )


def clear_caches() -> None:
    """Drop memoised bounds and ordering tables (for timing and determinism checks)."""
    for fn in (_lower_diff_cached, _upper_ratio_cached, diff_ordering_table, ratio_ordering_table):
        fn.cache_clear()
