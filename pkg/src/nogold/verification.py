"""Independent checks: exact coverage by enumeration, Monte Carlo coverage under
the restricted latent class model, and a numerical audit of the feasible-set
predicates.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import geometry as geo
from .bounds import BoundConfig, buehler_lower_diff, buehler_upper_ratio, ratio_parameter, upper_ratio_via_diff
from .errors import ResourceError
from .geometry import FeasibleQuintuple, GainPair, SensTriple
from .model import (
    JointDensity,
    PairedCounts,
    mu,
    multinomial_logpmf_matrix,
    table_outcome_array,
    trinomial_outcome_array,
)

MAX_EXACT_N = 12
RESIDUAL_TOL = 1e-6


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("NOGOLD_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    workers = _workers()
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def simplex_lattice(resolution: int, dim: int) -> np.ndarray:
    """Integer compositions of ``resolution - 1`` into ``dim`` parts.

    Divided by ``resolution - 1`` these are the simplex points with
    ``resolution`` levels per axis, boundary included.
    """
    total = resolution - 1
    if dim == 1:
        return np.array([[total]])
    rows = []
    for first in range(total + 1):
        for rest in simplex_lattice(total - first + 1, dim - 1):
            rows.append((first, *rest))
    return np.array(rows, dtype=int)


# -- exact coverage ---------------------------------------------------------

@dataclass(frozen=True)
class CoverageResult:
    min_coverage: float
    argmin: tuple
    n_outcomes: int
    n_grid: int


def exact_coverage_diff(n: int, beta: float, q_grid_resolution: int = 21,
                        config: BoundConfig | None = None) -> CoverageResult:
    """Minimum over a simplex grid of P_q(gain bound <= q01 - q10), computed exactly."""
    if n > MAX_EXACT_N:
        tables = (n + 1) * (n + 2) * (n + 3) // 6
        raise ResourceError(f"exact enumeration is limited to n <= {MAX_EXACT_N}", required=tables)
    config = config or BoundConfig(beta=beta)
    tables = table_outcome_array(n)
    trinomials = sorted({(int(t[1]), int(t[2]), int(t[0] + t[3])) for t in tables})
    values = dict(zip(trinomials, _map(lambda k: buehler_lower_diff(k, config).value, trinomials)))
    bound = np.array([values[(int(t[1]), int(t[2]), int(t[0] + t[3]))] for t in tables])

    lattice = simplex_lattice(q_grid_resolution, 4)
    q = lattice / (q_grid_resolution - 1)
    target = (lattice[:, 1] - lattice[:, 2]) / (q_grid_resolution - 1)
    pmf = np.exp(multinomial_logpmf_matrix(q, tables))
    covered = bound[None, :] <= target[:, None]
    coverage = (pmf * covered).sum(axis=1)
    i = int(np.argmin(coverage))
    return CoverageResult(float(coverage[i]), tuple(float(x) for x in q[i]), len(tables), len(q))


def exact_coverage_ratio(m: int, beta: float, grid_resolution: int = 21, direct: bool = False,
                         config: BoundConfig | None = None) -> CoverageResult:
    """Minimum over a trinomial grid of P_p(u(X) >= (1-p2)/(1-p1) capped at 1)."""
    if m > 4 * MAX_EXACT_N:
        raise ResourceError(f"ratio coverage enumeration is limited to m <= {4 * MAX_EXACT_N}")
    config = config or BoundConfig(beta=beta)
    fn = buehler_upper_ratio if direct else upper_ratio_via_diff
    outcomes = trinomial_outcome_array(m)
    bound = np.array(_map(lambda k: fn(tuple(int(c) for c in k), config).value, outcomes))
    p = simplex_lattice(grid_resolution, 3) / (grid_resolution - 1)
    target = ratio_parameter(p)
    pmf = np.exp(multinomial_logpmf_matrix(p, outcomes))
    coverage = (pmf * (bound[None, :] >= target[:, None] - 1e-12)).sum(axis=1)
    i = int(np.argmin(coverage))
    return CoverageResult(float(coverage[i]), tuple(float(x) for x in p[i]), len(outcomes), len(p))


# -- Monte Carlo coverage under the restricted model -----------------------

@dataclass(frozen=True)
class MCCoverage:
    coverage_gain: float
    se_gain: float
    coverage_se1: float
    se_se1: float
    reps: int


def mc_coverage_restricted(n: int, beta: float, reps: int, seed: int,
                           config: BoundConfig | None = None) -> MCCoverage:
    """Empirical coverage of the gain bound and the Se1 bound for random restricted theta."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    config = config or BoundConfig(beta=beta)
    rng = np.random.default_rng(seed)
    pi1, chi = geo.sample_theta_arrays(rng, reps, restricted=True)
    q = geo.mu_arrays(pi1, chi)
    pts = geo.quintuple_arrays(pi1, chi)
    q = q / q.sum(axis=1, keepdims=True)
    tables = rng.multinomial(n, q)

    hit_gain = np.empty(reps, dtype=bool)
    hit_se1 = np.empty(reps, dtype=bool)
    for i, row in enumerate(tables):
        k = PairedCounts(*(int(c) for c in row))
        gain = buehler_lower_diff(k.gain_trinomial(), config).value
        upper = upper_ratio_via_diff(k.se1_trinomial(), config).value
        hit_gain[i] = gain <= pts.pr[i] * (pts.se2[i] - pts.se1[i])
        hit_se1[i] = pts.se1[i] <= upper
    c1, c2 = hit_gain.mean(), hit_se1.mean()
    return MCCoverage(
        float(c1), float(np.sqrt(c1 * (1 - c1) / reps)),
        float(c2), float(np.sqrt(c2 * (1 - c2) / reps)),
        reps,
    )


# -- feasible-set audit -----------------------------------------------------

PREDICATES = {
    "in_A": geo.in_A,
    "in_A_alt": geo.in_A_alt,
    "in_B": geo.in_B,
    "in_C": geo.in_C,
    "in_D": geo.in_D,
    "in_E": geo.in_E,
    "in_B_le": geo.in_B_le,
    "in_C_le": geo.in_C_le,
    "necessary_D_le": geo.necessary_D_le,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    checked: int
    failures: int = 0
    skipped: bool = False
    counterexample: dict | None = None
    detail: str = ""


@dataclass
class SuiteReport:
    seed: int
    samples: int
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.skipped)

    @property
    def skipped(self) -> bool:
        return all(c.skipped for c in self.checks)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "samples": self.samples, "passed": self.passed,
                "skipped": self.skipped, "checks": [asdict(c) for c in self.checks]}


def _record(name: str, ok: np.ndarray, example: Callable[[int], dict], detail: str = "") -> CheckResult:
    ok = np.asarray(ok, dtype=bool)
    bad = np.nonzero(~ok)[0]
    return CheckResult(
        name=name,
        passed=len(bad) == 0,
        checked=int(ok.size),
        failures=int(len(bad)),
        counterexample=example(int(bad[0])) if len(bad) else None,
        detail=detail,
    )


def _rows(*arrays):
    def pick(i):
        return {name: np.asarray(a)[i].tolist() for name, a in arrays}
    return pick


def _forward_checks(preds, seed: int, count: int) -> list[CheckResult]:
    out = []
    for restricted in (False, True):
        model = "restricted" if restricted else "full"
        q, pt, _ = geo.oracle_sample_arrays(seed + int(restricted), count, restricted)
        gain = GainPair(pt.pr, pt.se2 - pt.se1)
        triple = SensTriple(pt.pr, pt.se1, pt.se2)
        example = _rows(("q", q), ("pt", np.stack(pt, axis=1)))
        checks = {
            "A": preds["in_A"](q, pt),
            "A_alt": preds["in_A_alt"](q, pt),
            "B": preds["in_B"](q, triple),
            "C": preds["in_C"](q, gain),
            "D": preds["in_D"](q, pt.pr, pt.se1),
            "E": preds["in_E"](q, pt.pr, pt.se2),
        }
        if restricted:
            checks.update({
                "B_le": preds["in_B_le"](q, triple),
                "C_le": preds["in_C_le"](q, gain),
                "D_le(necessary)": preds["necessary_D_le"](q, pt.pr, pt.se1),
                "E_le(se1 bound)": pt.se1 <= geo.se1_upper_from_q(q) + geo.TOL,
            })
        for name, ok in checks.items():
            out.append(_record(f"forward/{model}/{name}", ok, example))
        if restricted:
            corner = GainPair(np.ones(len(q)), q[:, 1] - q[:, 2])
            out.append(_record("nonempty/C_le contains (1, q01-q10)", preds["in_C_le"](q, corner),
                               _rows(("q", q))))
    return out


def _equivalence_check(preds, rng: np.random.Generator, count: int) -> CheckResult:
    third = max(1, count // 3)
    q = rng.dirichlet(np.ones(4), size=count)
    pr, se1, se2 = rng.uniform(size=(3, count))
    sp1, sp2 = rng.uniform(size=(2, count))
    # a third with both marginal equations solved, so the inequalities decide
    solve = slice(third, 2 * third)
    with np.errstate(divide="ignore", invalid="ignore"):
        sp1[solve] = 1 - (q[solve, 2] + q[solve, 3] - pr[solve] * se1[solve]) / (1 - pr[solve])
        sp2[solve] = 1 - (q[solve, 1] + q[solve, 3] - pr[solve] * se2[solve]) / (1 - pr[solve])
    # and a third taken straight from mu(theta)
    oq, opt, _ = geo.oracle_sample_arrays(int(rng.integers(2**31)), third)
    q[:third] = oq
    pr[:third], sp1[:third], se1[:third], sp2[:third], se2[:third] = opt
    pt = FeasibleQuintuple(pr, sp1, se1, sp2, se2)
    a, b = np.asarray(preds["in_A"](q, pt)), np.asarray(preds["in_A_alt"](q, pt))
    return _record("equivalence/A vs A_alt", a == b, _rows(("q", q), ("pt", np.stack(pt, axis=1))),
                   detail=f"{int(a.sum())} of {count} points feasible")


def completion_residual(q, pr, se1, se2, restricted: bool):
    """Total violation of the quintuple system after solving Sp1, Sp2 from the margins.

    Returns ``(residual, sp1, sp2)``.  At Pr = 1 the specificities are free and
    set to 1/2.
    """
    q = np.asarray(q, dtype=float)
    q00, q01, q10, q11 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    interior = pr < 1.0
    denom = np.where(interior, 1.0 - pr, 1.0)
    sp1 = np.where(interior, 1.0 - (q10 + q11 - pr * se1) / denom, 0.5)
    sp2 = np.where(interior, 1.0 - (q01 + q11 - pr * se2) / denom, 0.5)

    def box(x):
        return np.maximum(-x, 0.0) + np.maximum(x - 1.0, 0.0)

    res = box(se1) + box(se2) + box(sp1) + box(sp2)
    res += np.abs((1 - pr) * (1 - sp1) + pr * se1 - (q10 + q11))
    res += np.abs((1 - pr) * (1 - sp2) + pr * se2 - (q01 + q11))
    upper = (1 - pr) * np.minimum(sp1, sp2) + pr * (1 - np.maximum(se1, se2))
    lower = (1 - pr) * np.maximum(sp1 + sp2 - 1, 0) + pr * np.maximum(1 - se1 - se2, 0)
    res += np.maximum(q00 - upper, 0.0) + np.maximum(lower - q00, 0.0)
    if restricted:
        res += np.maximum(sp1 - sp2, 0.0)
    return res, sp1, sp2


def _search_min(f, lo: np.ndarray, hi: np.ndarray, step: float = 0.01, iters: int = 80):
    """Per-row minimiser of a convex 1-d function: grid at ``step``, then ternary refinement."""
    n_grid = int(round(1 / step)) + 1
    frac = np.linspace(0.0, 1.0, n_grid)
    xs = lo[:, None] + (hi - lo)[:, None] * frac[None, :]
    vals = f(np.repeat(np.arange(len(lo)), n_grid), xs.ravel()).reshape(xs.shape)
    i = np.argmin(vals, axis=1)
    rows = np.arange(len(lo))
    a = xs[rows, np.maximum(i - 1, 0)]
    b = xs[rows, np.minimum(i + 1, n_grid - 1)]
    for _ in range(iters):
        m1 = a + (b - a) / 3
        m2 = b - (b - a) / 3
        go_left = f(rows, m1) <= f(rows, m2)
        a, b = np.where(go_left, a, m1), np.where(go_left, m2, b)
    x = 0.5 * (a + b)
    return x, f(rows, x)


def _draw_members(pred, rng, count: int, kind: str, max_rounds: int = 200):
    """Random q and random points of one set, by rejection from a box."""
    got_q, got_pts, have = [], [], 0
    for _ in range(max_rounds):
        if have >= count:
            break
        batch = 4 * count
        q = rng.dirichlet(np.ones(4), size=batch)
        u = rng.uniform(size=(3, batch))
        if kind == "A":
            pr, se1, se2 = u
            with np.errstate(divide="ignore", invalid="ignore"):
                sp1 = 1 - (q[:, 2] + q[:, 3] - pr * se1) / (1 - pr)
                sp2 = 1 - (q[:, 1] + q[:, 3] - pr * se2) / (1 - pr)
            pt = FeasibleQuintuple(pr, sp1, se1, sp2, se2)
            ok = pred(q, pt)
        elif kind in ("B", "B_le"):
            pt = SensTriple(*u)
            ok = pred(q, pt)
        elif kind in ("C", "C_le"):
            pt = GainPair(u[0], 2 * u[1] - 1)
            ok = pred(q, pt)
        else:
            pt = (u[0], u[1])
            ok = pred(q, *pt)
        ok = np.asarray(ok, dtype=bool)
        got_q.append(q[ok])
        got_pts.append(np.stack([np.asarray(c)[ok] for c in pt], axis=1))
        have += int(ok.sum())
    return np.concatenate(got_q)[:count], np.concatenate(got_pts)[:count]


def _complete(kind: str, q: np.ndarray, pts: np.ndarray, restricted: bool):
    """Find (Se1, Se2) completing each point of ``kind`` to a full quintuple."""
    n = len(q)
    if kind == "A":
        pr, sp1, se1, sp2, se2 = pts.T
        res, _, _ = completion_residual(q, pr, se1, se2, restricted)
        return pr, se1, se2, res
    if kind in ("B", "B_le"):
        pr, se1, se2 = pts.T
        res, _, _ = completion_residual(q, pr, se1, se2, restricted)
        return pr, se1, se2, res
    pr = pts[:, 0]
    if kind in ("C", "C_le"):
        dse = pts[:, 1]

        def f(rows, x):
            return completion_residual(q[rows], pr[rows], x, x + dse[rows], restricted)[0]

        se1, res = _search_min(f, np.maximum(0.0, -dse), np.minimum(1.0, 1.0 - dse))
        return pr, se1, se1 + dse, res
    fixed = pts[:, 1]
    if kind == "D":
        def f(rows, x):
            return completion_residual(q[rows], pr[rows], fixed[rows], x, restricted)[0]

        se2, res = _search_min(f, np.zeros(n), np.ones(n))
        return pr, fixed, se2, res

    def f(rows, x):
        return completion_residual(q[rows], pr[rows], x, fixed[rows], restricted)[0]

    se1, res = _search_min(f, np.zeros(n), np.ones(n))
    return pr, se1, fixed, res


def _reverse_checks(preds, rng: np.random.Generator, count: int) -> list[CheckResult]:
    out = []
    pred_for = {"A": "in_A", "B": "in_B", "C": "in_C", "D": "in_D", "E": "in_E",
                "B_le": "in_B_le", "C_le": "in_C_le"}
    for kind, pname in pred_for.items():
        restricted = kind.endswith("_le")
        q, pts = _draw_members(preds[pname], rng, count, kind)
        if len(q) < count:
            out.append(CheckResult(f"reverse/{kind}", False, len(q), detail="could not draw enough members"))
            continue
        pr, se1, se2, res = _complete(kind, q, pts, restricted)
        _, sp1, sp2 = completion_residual(q, pr, se1, se2, restricted)
        worst = np.zeros(len(q))
        for i in range(len(q)):
            if res[i] >= RESIDUAL_TOL:
                worst[i] = np.inf
                continue
            pt = FeasibleQuintuple(*(min(max(float(v), 0.0), 1.0) for v in (pr[i], sp1[i], se1[i], sp2[i], se2[i])))
            theta = geo.construct_theta(q[i], pt, check=False)
            q_err = np.max(np.abs(np.array(mu(theta).q) - q[i]))
            spec_err = np.max(np.abs(np.array(geo.quintuple(theta)) - np.array(pt)))
            order_err = max(geo.quintuple(theta).sp1 - geo.quintuple(theta).sp2, 0.0) if restricted else 0.0
            worst[i] = max(q_err, spec_err, order_err)
        out.append(_record(f"reverse/{kind}", worst < RESIDUAL_TOL,
                           _rows(("q", q), ("point", pts), ("residual", worst)),
                           detail=f"max residual {float(np.max(worst)):.3g}"))
        if kind == "D":
            errs = np.array([
                max(np.max(np.abs(np.array(mu(th).q) - q[i])), abs(geo.quintuple(th).se1 - pts[i, 1]))
                for i, th in enumerate(geo.lift_from_test1(q[i], pts[i, 0], pts[i, 1]) for i in range(len(q)))
            ])
            out.append(_record("reverse/D via marginal lift", errs < RESIDUAL_TOL,
                               _rows(("q", q), ("point", pts), ("residual", errs)),
                               detail=f"max residual {float(np.max(errs)):.3g}"))
    return out


def _roundtrip_check(seed: int, count: int) -> CheckResult:
    q, pts, _ = geo.oracle_sample_arrays(seed, count)
    errs = np.empty(count)
    for i in range(count):
        pt = FeasibleQuintuple(*(float(c[i]) for c in pts))
        theta = geo.construct_theta(JointDensity(tuple(q[i])), pt)
        errs[i] = max(np.max(np.abs(np.array(mu(theta).q) - q[i])),
                      np.max(np.abs(np.array(geo.quintuple(theta)) - np.array(pt))))
    return _record("construct_theta round trip", errs < 1e-9, _rows(("q", q), ("residual", errs)),
                   detail=f"max residual {float(np.max(errs)):.3g}")


def lemma_suite(seed: int, samples_per_lemma: int,
                predicates: dict[str, Callable] | None = None) -> SuiteReport:
    """Numerical audit of the feasible-set predicates.

    ``samples_per_lemma`` parameters are drawn per model for the forward
    direction; the equivalence check uses a tenth of that, reverse
    attainability and the reconstruction round trip a hundredth.
    ``predicates`` replaces entries of :data:`PREDICATES` (mutation testing).
    """
    report = SuiteReport(seed, samples_per_lemma)
    if samples_per_lemma < 1:
        report.checks.append(CheckResult("all", True, 0, skipped=True, detail="no samples requested"))
        return report
    preds = dict(PREDICATES)
    preds.update(predicates or {})
    rng = np.random.default_rng(seed)
    small = max(1, samples_per_lemma // 100)
    report.checks += _forward_checks(preds, seed, samples_per_lemma)
    report.checks.append(_equivalence_check(preds, rng, max(1, samples_per_lemma // 10)))
    report.checks += _reverse_checks(preds, rng, small)
    report.checks.append(_roundtrip_check(seed + 2, small))
    return report
