"""Probability primitives for the two-test latent class model.

Cells of a paired 2x2 table are always ordered ``(00, 01, 10, 11)`` where the
first bit is the result of test 1 and the second bit the result of test 2.
Latent states are ``0`` (negative) and ``1`` (positive).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import ValidationError

SIMPLEX_TOL = 1e-12

CELLS = ("00", "01", "10", "11")


def _as_simplex(values: Sequence[float], name: str, size: int) -> tuple[float, ...]:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (size,):
        raise ValidationError(f"{name} must have {size} entries, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    if np.any(arr < -SIMPLEX_TOL):
        raise ValidationError(f"{name} has a negative entry: {arr.tolist()}")
    total = float(arr.sum())
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise ValidationError(f"{name} sums to {total!r}, not 1")
    arr = np.clip(arr, 0.0, None)
    arr = arr / arr.sum()
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class LatentParams:
    """theta = (pi, chi): prevalence plus a Markov kernel from state to result pair.

    ``transition[i][j]`` is the probability of the result pair ``CELLS[j]`` for
    an item in latent state ``i``.
    """

    prevalence: tuple[float, float]
    transition: tuple[tuple[float, float, float, float], tuple[float, float, float, float]]

    def __post_init__(self):
        object.__setattr__(self, "prevalence", _as_simplex(self.prevalence, "prevalence", 2))
        if len(self.transition) != 2:
            raise ValidationError("transition needs one row per latent state")
        rows = tuple(
            _as_simplex(row, f"transition[{i}]", 4) for i, row in enumerate(self.transition)
        )
        object.__setattr__(self, "transition", rows)

    @classmethod
    def from_prevalence(cls, pr: float, chi0: Sequence[float], chi1: Sequence[float]) -> "LatentParams":
        return cls((1.0 - pr, pr), (tuple(chi0), tuple(chi1)))

    @property
    def pr(self) -> float:
        return self.prevalence[1]

    @property
    def chi(self) -> np.ndarray:
        return np.array(self.transition)

    def is_restricted(self) -> bool:
        """Whether test 1 is at most as specific as test 2."""
        return characteristics(self, 1).sp <= characteristics(self, 2).sp


@dataclass(frozen=True)
class TestCharacteristics:
    sp: float
    se: float

    def __post_init__(self):
        for name in ("sp", "se"):
            v = getattr(self, name)
            if not (-SIMPLEX_TOL <= v <= 1 + SIMPLEX_TOL):
                raise ValidationError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class JointDensity:
    """Density q of the observable result pair."""

    q: tuple[float, float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "q", _as_simplex(self.q, "q", 4))

    @classmethod
    def from_counts(cls, counts: "PairedCounts") -> "JointDensity":
        return cls(tuple(c / counts.n for c in counts.cells))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.q, dtype=dtype)

    q00 = property(lambda self: self.q[0])
    q01 = property(lambda self: self.q[1])
    q10 = property(lambda self: self.q[2])
    q11 = property(lambda self: self.q[3])

    @property
    def row_marginal(self) -> tuple[float, float]:
        """(q_{0+}, q_{1+}): distribution of the test 1 result."""
        return (self.q[0] + self.q[1], self.q[2] + self.q[3])

    @property
    def col_marginal(self) -> tuple[float, float]:
        """(q_{+0}, q_{+1}): distribution of the test 2 result."""
        return (self.q[0] + self.q[2], self.q[1] + self.q[3])


def _check_count(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < 0:
        raise ValidationError(f"{name} must be nonnegative, got {value}")
    return int(value)


@dataclass(frozen=True)
class PairedCounts:
    """Observed paired 2x2 table; ``k01`` counts test 1 negative, test 2 positive."""

    k00: int
    k01: int
    k10: int
    k11: int

    def __post_init__(self):
        for name in ("k00", "k01", "k10", "k11"):
            object.__setattr__(self, name, _check_count(name, getattr(self, name)))
        if self.n < 1:
            raise ValidationError("table must contain at least one observation")

    @property
    def cells(self) -> tuple[int, int, int, int]:
        return (self.k00, self.k01, self.k10, self.k11)

    @property
    def n(self) -> int:
        return self.k00 + self.k01 + self.k10 + self.k11

    def gain_trinomial(self) -> "TrinomialCounts":
        """Collapse used for the sensitivity gain: (k01, k10, k00 + k11)."""
        return TrinomialCounts(self.k01, self.k10, self.k00 + self.k11)

    def se1_trinomial(self) -> "TrinomialCounts":
        """Table with the 00 corner dropped: (k10, k01, k11)."""
        return TrinomialCounts(self.k10, self.k01, self.k11)


@dataclass(frozen=True)
class TrinomialCounts:
    k1: int
    k2: int
    k3: int

    def __post_init__(self):
        for name in ("k1", "k2", "k3"):
            object.__setattr__(self, name, _check_count(name, getattr(self, name)))

    @property
    def m(self) -> int:
        return self.k1 + self.k2 + self.k3

    def __iter__(self):
        return iter((self.k1, self.k2, self.k3))

    def swapped(self) -> "TrinomialCounts":
        """Exchange the first two cells."""
        return TrinomialCounts(self.k2, self.k1, self.k3)


def mu(theta: LatentParams) -> JointDensity:
    """Marginal density of the result pair: q_j = sum_i pi_i chi_{j|i}."""
    if not isinstance(theta, LatentParams):
        raise ValidationError("mu expects LatentParams")
    pi0, pi1 = theta.prevalence
    c0, c1 = theta.transition
    return JointDensity(tuple(pi0 * a + pi1 * b for a, b in zip(c0, c1)))


def characteristics(theta: LatentParams, test_index: int) -> TestCharacteristics:
    """Specificity and sensitivity of test 1 or test 2.

    Test 1 sums each conditional row over the second result bit, test 2 over
    the first.
    """
    c0, c1 = theta.transition
    if test_index == 1:
        sp = c0[0] + c0[1]
        se = c1[2] + c1[3]
    elif test_index == 2:
        sp = c0[0] + c0[2]
        se = c1[1] + c1[3]
    else:
        raise ValidationError(f"test_index must be 1 or 2, got {test_index}")
    return TestCharacteristics(min(max(sp, 0.0), 1.0), min(max(se, 0.0), 1.0))


_lf_lock = threading.Lock()
_lf_table = np.zeros(1)


def log_factorials(n: int) -> np.ndarray:
    """log(i!) for i = 0..n, from a table grown to the largest n requested."""
    global _lf_table
    if n >= len(_lf_table):
        with _lf_lock:
            if n >= len(_lf_table):
                size = max(n + 1, 2 * len(_lf_table))
                table = gammaln(np.arange(size, dtype=float) + 1.0)
                table.setflags(write=False)
                _lf_table = table
    return _lf_table[: n + 1]


def _multinomial_logpmf(n: int, probs, counts) -> float:
    counts = [int(c) for c in counts]
    if sum(counts) != n:
        raise ValidationError(f"counts sum to {sum(counts)}, expected {n}")
    if any(c < 0 for c in counts):
        raise ValidationError("counts must be nonnegative")
    lf = log_factorials(n)
    out = lf[n] - sum(lf[c] for c in counts)
    for c, p in zip(counts, probs):
        out += xlogy(c, p)
    return float(out)


def multinomial_logpmf(n: int, q: JointDensity, k: PairedCounts) -> float:
    """Log mass of the 2x2 table ``k`` under M(n, q); -inf if a zero cell is hit."""
    if isinstance(q, JointDensity):
        q = q.q
    cells = k.cells if isinstance(k, PairedCounts) else tuple(k)
    return _multinomial_logpmf(n, q, cells)


def trinomial_logpmf(m: int, p: Sequence[float], j) -> float:
    return _multinomial_logpmf(m, p, tuple(j))


def binomial_logpmf(n: int, prob: float, x: int) -> float:
    if not 0 <= x <= n:
        raise ValidationError(f"x={x} outside 0..{n}")
    return _multinomial_logpmf(n, (prob, 1.0 - prob), (x, n - x))


@lru_cache(maxsize=64)
def trinomial_outcome_array(m: int) -> np.ndarray:
    """All (k1, k2, k3) with k1 + k2 + k3 = m as an int array, lexicographic order."""
    if m < 0:
        raise ValidationError("m must be nonnegative")
    k1, k2 = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    keep = k1 + k2 <= m
    k1, k2 = k1[keep], k2[keep]
    out = np.stack([k1, k2, m - k1 - k2], axis=1)
    out.setflags(write=False)
    return out


def enumerate_trinomial_outcomes(m: int) -> list[TrinomialCounts]:
    return [TrinomialCounts(*map(int, row)) for row in trinomial_outcome_array(m)]


@lru_cache(maxsize=32)
def table_outcome_array(n: int) -> np.ndarray:
    """All 2x2 tables of size n as rows (k00, k01, k10, k11)."""
    rows = [
        (a, b, c, n - a - b - c)
        for a in range(n + 1)
        for b in range(n + 1 - a)
        for c in range(n + 1 - a - b)
    ]
    out = np.array(rows, dtype=int).reshape(-1, 4)
    out.setflags(write=False)
    return out


def multinomial_logpmf_matrix(probs: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Log masses for every (probability row, count row) pair.

    ``probs`` has shape (P, c), ``counts`` shape (K, c) with a common total;
    the result has shape (P, K).
    """
    probs = np.atleast_2d(np.asarray(probs, dtype=float))
    counts = np.atleast_2d(np.asarray(counts))
    n = int(counts[0].sum())
    lf = log_factorials(n)
    logc = lf[n] - lf[counts].sum(axis=1)
    return logc[None, :] + xlogy(counts[None, :, :], probs[:, None, :]).sum(axis=2)


def n_trinomial_outcomes(m: int) -> int:
    return (m + 1) * (m + 2) // 2

