"""Feasible sets of prevalence and test accuracies compatible with a density q.

Every predicate takes ``q`` (a :class:`JointDensity` or an array whose last axis
holds the cells ``00, 01, 10, 11``) and a point whose fields may be floats or
broadcastable numpy arrays.  Scalar inputs give a Python ``bool``; array inputs
give a boolean array.

All comparisons allow an absolute slack of ``TOL`` on both sides.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InfeasiblePointError
from .model import JointDensity, LatentParams, characteristics

TOL = 1e-9


class FeasibleQuintuple(NamedTuple):
    pr: float
    sp1: float
    se1: float
    sp2: float
    se2: float


class SensTriple(NamedTuple):
    pr: float
    se1: float
    se2: float


class GainPair(NamedTuple):
    pr: float
    dse: float


def quintuple(theta: LatentParams) -> FeasibleQuintuple:
    t1 = characteristics(theta, 1)
    t2 = characteristics(theta, 2)
    return FeasibleQuintuple(theta.pr, t1.sp, t1.se, t2.sp, t2.se)


def _cells(q):
    arr = np.asarray(q.q if isinstance(q, JointDensity) else q, dtype=float)
    return arr[..., 0], arr[..., 1], arr[..., 2], arr[..., 3]


def _out(mask):
    mask = np.asarray(mask)
    return bool(mask) if mask.ndim == 0 else mask


def _in_range(x, lo, hi):
    return (x >= lo - TOL) & (x <= hi + TOL)


def _unit(*xs):
    ok = True
    for x in xs:
        ok = ok & _in_range(x, 0.0, 1.0)
    return ok


def _eq(a, b):
    return np.abs(a - b) <= TOL


def _pos(x):
    return np.maximum(x, 0.0)


# Single inequality systems, shared by the predicates below.

def _gain_range(q, pr, se1, se2):
    _, q01, q10, _ = _cells(q)
    return _in_range(pr * (se2 - se1), -q10, q01)


def _sum_range(q, pr, se1, se2):
    q00, _, _, q11 = _cells(q)
    return _in_range(pr * (se1 + se2 - 1.0), -q00, q11)


def _se1_mass_range(q, pr, se1):
    q00, q01, q10, q11 = _cells(q)
    return _in_range(pr * se1, pr - (q00 + q01), q10 + q11)


def _se2_mass_range(q, pr, se2):
    q00, q01, q10, q11 = _cells(q)
    return _in_range(pr * se2, pr - (q00 + q10), q01 + q11)


def _gain_range_le(q, pr, se1, se2):
    _, q01, q10, _ = _cells(q)
    return _in_range(pr * (se2 - se1), q01 - q10, q01)


def in_A(q, pt: FeasibleQuintuple):
    """Quintuple (Pr, Sp1, Se1, Sp2, Se2) attainable by some theta with mu(theta) = q."""
    q00, q01, q10, q11 = _cells(q)
    pr, sp1, se1, sp2, se2 = pt
    ok = _unit(pr, sp1, se1, sp2, se2)
    ok &= _eq((1 - pr) * (1 - sp1) + pr * se1, q10 + q11)
    ok &= _eq((1 - pr) * (1 - sp2) + pr * se2, q01 + q11)
    upper = (1 - pr) * np.minimum(sp1, sp2) + pr * (1 - np.maximum(se1, se2))
    lower = (1 - pr) * _pos(sp1 + sp2 - 1) + pr * _pos(1 - se1 - se2)
    ok &= (upper >= q00 - TOL) & (lower <= q00 + TOL)
    return _out(ok)


def in_A_alt(q, pt: FeasibleQuintuple):
    """Same set as :func:`in_A`, through the difference/sum form of the system."""
    q00, q01, q10, q11 = _cells(q)
    pr, sp1, se1, sp2, se2 = pt
    ok = _unit(pr, sp1, se1, sp2, se2)
    ok &= _eq(pr * (se2 - se1), (1 - pr) * (sp2 - sp1) + q01 - q10)
    ok &= _eq(pr * (se1 + se2 - 1), (1 - pr) * (sp1 + sp2 - 1) + q11 - q00)
    ok &= _gain_range(q, pr, se1, se2) & _sum_range(q, pr, se1, se2)
    return _out(ok)


def in_B(q, t: SensTriple):
    pr, se1, se2 = t
    ok = _unit(pr, se1, se2)
    ok &= _gain_range(q, pr, se1, se2) & _sum_range(q, pr, se1, se2)
    ok &= _se1_mass_range(q, pr, se1) & _se2_mass_range(q, pr, se2)
    return _out(ok)


def _gain_window(q, pr):
    _, q01, q10, _ = _cells(q)
    lo = np.maximum(-q10, q01 - q10 + pr - 1)
    hi = np.minimum(q01, q01 - q10 + 1 - pr)
    return lo, hi


def in_C(q, g: GainPair):
    pr, dse = g
    lo, hi = _gain_window(q, pr)
    ok = _unit(pr) & _in_range(dse, -1.0, 1.0) & _in_range(pr * dse, lo, hi)
    return _out(ok)


def in_D(q, pr, se1):
    return _out(_unit(pr, se1) & _se1_mass_range(q, pr, se1))


def in_E(q, pr, se2):
    return _out(_unit(pr, se2) & _se2_mass_range(q, pr, se2))


def in_B_le(q, t: SensTriple):
    pr, se1, se2 = t
    ok = _unit(pr, se1, se2)
    ok &= _sum_range(q, pr, se1, se2) & _se1_mass_range(q, pr, se1) & _se2_mass_range(q, pr, se2)
    ok &= _gain_range_le(q, pr, se1, se2)
    return _out(ok)


def _gain_window_le(q, pr):
    _, q01, q10, _ = _cells(q)
    return q01 - q10, np.minimum(q01, q01 - q10 + 1 - pr)


def in_C_le(q, g: GainPair):
    pr, dse = g
    lo, hi = _gain_window_le(q, pr)
    ok = _unit(pr) & _in_range(dse, -1.0, 1.0) & _in_range(pr * dse, lo, hi)
    return _out(ok)


def necessary_D_le(q, pr, se1):
    """Necessary (not sufficient) condition for (Pr, Se1) under Sp1 <= Sp2."""
    q00, q01, q10, q11 = _cells(q)
    hi = np.minimum(q10 + q11, pr + q10 - q01)
    return _out(_unit(pr, se1) & _in_range(pr * se1, pr - (q00 + q01), hi))


def se1_upper_from_q(q):
    """Largest Se1 compatible with q when test 1 is the less specific test.

    Returns ``q_{1+}/q_{+1}`` capped at 1, with the ratio read as 1 when
    ``q_{00} = 1``.
    """
    _, q01, q10, q11 = _cells(q)
    row1, col1 = q10 + q11, q01 + q11
    safe = np.where(col1 > 0, col1, 1.0)
    out = np.where(row1 >= col1, 1.0, row1 / safe)
    return float(out) if out.ndim == 0 else out


def extremes(q, set_name: str, pr: float | None = None) -> dict[str, tuple[float, float]]:
    """Closed intervals implied by each inequality of a set's system at fixed Pr.

    Keys name the constrained expression.  ``E_le`` needs no prevalence.
    """
    q00, q01, q10, q11 = (float(x) for x in _cells(q))
    if set_name == "E_le":
        return {"Se1": (0.0, float(se1_upper_from_q(q)))}
    if pr is None:
        raise ValueError(f"set {set_name} needs a prevalence value")
    r1, c1 = q10 + q11, q01 + q11
    d10 = ("Pr*Se1", (max(pr - (q00 + q01), 0.0), min(r1, pr)))
    d11 = ("Pr*Se2", (max(pr - (q00 + q10), 0.0), min(c1, pr)))
    d7 = ("Pr*(Se2-Se1)", (-q10, q01))
    d8 = ("Pr*(Se1+Se2-1)", (-q00, q11))
    d12 = ("Pr*(Se2-Se1)", (q01 - q10, q01))
    systems = {
        "A": [d7, d8, d10, d11],
        "B": [d7, d8, d10, d11],
        "B_le": [d8, d10, d11, d12],
        "C": [("Pr*dSe", tuple(float(x) for x in _gain_window(q, pr)))],
        "C_le": [("Pr*dSe", tuple(float(x) for x in _gain_window_le(q, pr)))],
        "D": [d10],
        "E": [d11],
        "D_le": [("Pr*Se1", (max(pr - (q00 + q01), 0.0), min(r1, pr + q10 - q01, pr)))],
    }
    if set_name not in systems:
        raise ValueError(f"unknown set {set_name!r}")
    return dict(systems[set_name])


def construct_theta(q, pt: FeasibleQuintuple, check: bool = True) -> LatentParams:
    """Build theta with mu(theta) = q whose accuracies and prevalence are ``pt``.

    The 00 cells of both conditional rows are placed at the same relative
    position ``t`` inside their admissible intervals, with ``t`` solving the
    q00 equation; the other six cells then follow from the marginals.
    ``check=False`` skips the feasibility test, for points known to be
    feasible only up to a looser tolerance.
    """
    if check and not in_A(q, pt):
        raise InfeasiblePointError(f"{pt} is not feasible for q={tuple(np.asarray(_cells(q)).tolist())}")
    q00 = float(_cells(q)[0])
    pr, sp1, se1, sp2, se2 = (min(max(float(x), 0.0), 1.0) for x in pt)

    lo0, hi0 = max(sp1 + sp2 - 1, 0.0), min(sp1, sp2)
    lo1, hi1 = max(1 - se1 - se2, 0.0), min(1 - se1, 1 - se2)
    f0 = (1 - pr) * lo0 + pr * lo1
    f1 = (1 - pr) * hi0 + pr * hi1
    t = 0.5 if f1 - f0 <= 0 else min(max((q00 - f0) / (f1 - f0), 0.0), 1.0)
    # a row with zero weight is unconstrained by q; park it mid-interval
    t0 = 0.5 if pr == 1.0 else t
    t1 = 0.5 if pr == 0.0 else t
    c00_0 = lo0 + t0 * (hi0 - lo0)
    c00_1 = lo1 + t1 * (hi1 - lo1)

    row0 = [c00_0, sp1 - c00_0, sp2 - c00_0, 1 - sp1 - sp2 + c00_0]
    row1 = [c00_1, 1 - se1 - c00_1, 1 - se2 - c00_1, se1 + se2 - 1 + c00_1]
    rows = []
    for row in (row0, row1):
        arr = np.clip(np.array(row), 0.0, None)
        rows.append(tuple(arr / arr.sum()))
    return LatentParams((1 - pr, pr), tuple(rows))


def lift_from_test1(q, pr: float, se1: float) -> LatentParams:
    """Extend a feasible (Pr, Se1) for test 1 alone to a full theta.

    Sp1 is solved from the test 1 marginal (0/0 read as 0 when Pr = 1); each
    conditional row is then split over the test 2 bit in proportion to q, with
    0/0 read as 1/2.
    """
    q00, q01, q10, q11 = (float(x) for x in _cells(q))
    row1 = q10 + q11
    sp1 = 1.0 if pr == 1.0 else 1.0 - (row1 - pr * se1) / (1.0 - pr)
    psi = ((sp1, 1 - sp1), (1 - se1, se1))
    qj = (q00, q01, q10, q11)
    margin = (q00 + q01, q10 + q11)
    rows = []
    for i in range(2):
        row = []
        for j, qcell in enumerate(qj):
            first = j // 2
            share = 0.5 if margin[first] == 0 else qcell / margin[first]
            row.append(share * psi[i][first])
        arr = np.clip(np.array(row), 0.0, None)
        rows.append(tuple(arr / arr.sum()))
    return LatentParams((1 - pr, pr), tuple(rows))


def sample_theta_arrays(rng: np.random.Generator, count: int, restricted: bool = False):
    """Draw ``count`` parameters: uniform prevalence, Dirichlet(1,1,1,1) rows.

    Returns ``(pi1, chi)`` with shapes ``(count,)`` and ``(count, 2, 4)``.
    The restricted model is reached by rejecting draws with Sp1 > Sp2.
    """
    pis, chis, have = [], [], 0
    while have < count:
        batch = max(2 * (count - have), 16)
        pi1 = rng.uniform(size=batch)
        chi = rng.dirichlet(np.ones(4), size=(batch, 2))
        if restricted:
            sp1 = chi[:, 0, 0] + chi[:, 0, 1]
            sp2 = chi[:, 0, 0] + chi[:, 0, 2]
            keep = sp1 <= sp2
            pi1, chi = pi1[keep], chi[keep]
        pis.append(pi1)
        chis.append(chi)
        have += len(pi1)
    return np.concatenate(pis)[:count], np.concatenate(chis)[:count]


def mu_arrays(pi1: np.ndarray, chi: np.ndarray) -> np.ndarray:
    return (1 - pi1)[:, None] * chi[:, 0, :] + pi1[:, None] * chi[:, 1, :]


def quintuple_arrays(pi1: np.ndarray, chi: np.ndarray) -> FeasibleQuintuple:
    c0, c1 = chi[:, 0, :], chi[:, 1, :]
    return FeasibleQuintuple(
        pi1,
        c0[:, 0] + c0[:, 1],
        c1[:, 2] + c1[:, 3],
        c0[:, 0] + c0[:, 2],
        c1[:, 1] + c1[:, 3],
    )


def oracle_sample_arrays(seed: int, count: int, restricted: bool = False):
    """Vectorised form of :func:`oracle_sample`: ``(q, quintuple, chi)`` arrays."""
    rng = np.random.default_rng(seed)
    pi1, chi = sample_theta_arrays(rng, count, restricted)
    return mu_arrays(pi1, chi), quintuple_arrays(pi1, chi), chi


def oracle_sample(seed: int, count: int, restricted: bool = False):
    """Sampled (mu(theta), quintuple(theta)) pairs over the full or restricted model."""
    if count < 1:
        raise ValueError("count must be at least 1")
    qs, pts, _ = oracle_sample_arrays(seed, count, restricted)
    return [
        (JointDensity(tuple(qs[i])), FeasibleQuintuple(*(float(c[i]) for c in pts)))
        for i in range(count)
    ]


__all__ = [
    "TOL",
    "FeasibleQuintuple",
    "SensTriple",
    "GainPair",
    "quintuple",
    "in_A",
    "in_A_alt",
    "in_B",
    "in_C",
    "in_D",
    "in_E",
    "in_B_le",
    "in_C_le",
    "necessary_D_le",
    "se1_upper_from_q",
    "extremes",
    "construct_theta",
    "lift_from_test1",
    "oracle_sample",
    "oracle_sample_arrays",
]
