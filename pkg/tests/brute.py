"""Slow reference implementations used only by the tests.

Nothing here imports the bound engine: the ordering statistic, the
trinomial masses and the parameter search are all recomputed from scratch on
dense grids.
"""

import math
from statistics import NormalDist

import numpy as np


def wald_cc_lower(k1, k2, k3, beta):
    m = k1 + k2 + k3
    if m == 0:
        return -1.0
    a, b, mt = k1 + 0.5, k2 + 0.5, m + 1.0
    d = (a - b) / mt
    se = math.sqrt(a + b - (a - b) ** 2 / mt) / mt
    return min(max(d - NormalDist().inv_cdf(beta) * se, -1.0), 1.0)


def outcomes(m):
    return [(i, j, m - i - j) for i in range(m + 1) for j in range(m + 1 - i)]


def pmf(k, p1, p2, p3):
    """Trinomial mass of outcome k at (arrays of) probabilities."""
    m = sum(k)
    coef = math.factorial(m) / (math.factorial(k[0]) * math.factorial(k[1]) * math.factorial(k[2]))
    return coef * p1 ** k[0] * p2 ** k[1] * p3 ** k[2]


def lower_diff_grid(m, beta, step=1e-3, tie_tol=1e-12):
    """l(k) for every outcome of size m, by search over a (delta, eta) grid.

    Returns a dict outcome -> smallest grid delta whose eta-maximised tail mass
    P(T >= T(k)) exceeds 1 - beta.
    """
    outs = outcomes(m)
    score = {k: wald_cc_lower(*k, beta) for k in outs}
    n = int(round(1 / step))
    deltas = np.linspace(-1.0, 1.0, 2 * n + 1)
    etas = np.linspace(0.0, 1.0, n + 1)
    D, E = np.meshgrid(deltas, etas, indexing="ij")
    valid = E >= np.abs(D) - 1e-15
    p1, p2, p3 = (E + D) / 2, (E - D) / 2, 1 - E
    p1, p2, p3 = (np.clip(x, 0.0, 1.0) for x in (p1, p2, p3))
    masses = {k: pmf(k, p1, p2, p3) for k in outs}
    result = {}
    for k in outs:
        tail = sum(masses[x] for x in outs if score[x] >= score[k] - tie_tol)
        prof = np.where(valid, tail, -np.inf).max(axis=1)
        hits = np.nonzero(prof > 1 - beta)[0]
        result[k] = float(deltas[hits[0]]) if len(hits) else -1.0
    return result


def upper_ratio_grid(m, beta, statistic, step=1e-3):
    """Direct upper bound for min(1, (1 - p2)/(1 - p1)) on a dense simplex grid.

    ``statistic`` maps an outcome to its ordering score; small scores are
    extreme.  Returns a dict outcome -> largest ratio among grid points whose
    tail mass P(T' <= T'(k)) exceeds 1 - beta.
    """
    outs = outcomes(m)
    score = {k: statistic(k) for k in outs}
    n = int(round(1 / step))
    i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    keep = i + j <= n
    p1, p2 = i[keep] / n, j[keep] / n
    p3 = np.clip(1 - p1 - p2, 0.0, 1.0)
    ratio = np.where(p2 <= p1, 1.0, np.minimum((1 - p2) / np.where(p1 < 1, 1 - p1, 1.0), 1.0))
    masses = {k: pmf(k, p1, p2, p3) for k in outs}
    result = {}
    for k in outs:
        tail = sum(masses[x] for x in outs if score[x] <= score[k] + 1e-12)
        ok = tail > 1 - beta
        result[k] = float(ratio[ok].max()) if ok.any() else 1.0
    return result


def coverage_at(n, q, bound_of, target):
    """P_q(bound(X) <= target) for X ~ M(n, q) over 2x2 tables, by enumeration."""
    total = 0.0
    for a in range(n + 1):
        for b in range(n + 1 - a):
            for c in range(n + 1 - a - b):
                d = n - a - b - c
                k = (a, b, c, d)
                coef = math.factorial(n) / math.prod(math.factorial(x) for x in k)
                mass = coef * math.prod(qi ** ki for qi, ki in zip(q, k))
                if bound_of(k) <= target:
                    total += mass
    return total
