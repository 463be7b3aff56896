"""Command line front end.

    nogold bound --k00 210 --k01 20 --k10 4 --k11 22 --prevalence-max 0.15
    nogold feasible --from-counts 210,20,4,22 --set E_le --extremes
    nogold coverage --n 6 --beta 0.8 --grid 21
    nogold oracle --seed 7 --samples 10000

Exit status: 0 on success, 1 when a coverage or oracle check fails, 2 on
invalid input, 3 when a computation exceeds its resource budget.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from . import geometry as geo
from .bounds import ENGINE_ID, RATIO_STATISTIC_ID, STATISTIC_ID, BoundConfig
from .errors import ResourceError, ValidationError
from .inference import AnalysisOptions, analyze, ceil_display, floor_display
from .model import JointDensity, PairedCounts
from .verification import MAX_EXACT_N, exact_coverage_diff, lemma_suite, mc_coverage_restricted

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3
CELLS = ("k00", "k01", "k10", "k11")

POINT_FIELDS = {
    "A": ("pr", "sp1", "se1", "sp2", "se2"),
    "B": ("pr", "se1", "se2"),
    "B_le": ("pr", "se1", "se2"),
    "C": ("pr", "dse"),
    "C_le": ("pr", "dse"),
    "D": ("pr", "se1"),
    "D_le": ("pr", "se1"),
    "E": ("pr", "se2"),
    "E_le": ("se1",),
}


def dumps(obj) -> str:
    """Canonical JSON: re-serialising the parsed text gives the same bytes."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)


def _fmt(x: float) -> str:
    return f"{x:.4f}"


# -- input ------------------------------------------------------------------

def _read_table_file(path: str) -> dict:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: expected a JSON object")
        return data
    rows = [r for r in csv.reader(text.splitlines()) if any(c.strip() for c in r)]
    if len(rows) == 2:
        header = [c.strip() for c in rows[0]]
        if sorted(header) != sorted(CELLS):
            raise ValidationError(f"{path}: CSV header must name {', '.join(CELLS)}")
        values = [c.strip() for c in rows[1]]
    elif len(rows) == 1:
        header, values = list(CELLS), [c.strip() for c in rows[0]]
    else:
        raise ValidationError(f"{path}: CSV must hold a header line and one row of counts")
    if len(values) != len(header):
        raise ValidationError(f"{path}: CSV row has {len(values)} fields, expected {len(header)}")
    return dict(zip(header, values))


def _parse_count(name: str, value) -> int:
    if isinstance(value, bool):
        raise ValidationError(f"{name}: expected a count, got {value!r}")
    if isinstance(value, int):
        out = value
    elif isinstance(value, float) and value.is_integer():
        out = int(value)
    else:
        try:
            out = int(str(value).strip())
        except ValueError:
            raise ValidationError(f"{name}: expected a count, got {value!r}") from None
    if out < 0:
        raise ValidationError(f"{name}: counts must be nonnegative, got {out}")
    return out


def table_from_args(args) -> PairedCounts:
    if args.input:
        raw = _read_table_file(args.input)
        extra = set(raw) - set(CELLS)
        if extra:
            raise ValidationError(f"unknown field {sorted(extra)[0]}")
    else:
        raw = {c: getattr(args, c) for c in CELLS if getattr(args, c) is not None}
    for c in CELLS:
        if c not in raw:
            raise ValidationError(f"missing cell {c}")
    return PairedCounts(*(_parse_count(c, raw[c]) for c in CELLS))


def _floats(text: str, name: str, count: int | None = None) -> list[float]:
    try:
        values = [float(x) for x in text.split(",")]
    except ValueError:
        raise ValidationError(f"{name}: expected comma separated numbers, got {text!r}") from None
    if count is not None and len(values) != count:
        raise ValidationError(f"{name}: expected {count} values, got {len(values)}")
    return values


def density_from_args(args) -> JointDensity:
    if args.from_counts:
        cells = _floats(args.from_counts, "--from-counts", 4)
        return JointDensity.from_counts(PairedCounts(*(_parse_count(c, v) for c, v in zip(CELLS, cells))))
    q = [getattr(args, f"q{c}") for c in ("00", "01", "10", "11")]
    for c, v in zip(("q00", "q01", "q10", "q11"), q):
        if v is None:
            raise ValidationError(f"missing {c} (or give --from-counts)")
    return JointDensity(tuple(q))


# -- subcommands ------------------------------------------------------------

def cmd_bound(args) -> int:
    k = table_from_args(args)
    options = AnalysisOptions(
        beta=args.beta,
        prevalence_max=args.prevalence_max,
        include_direct_ratio_bound=args.direct_ratio,
    )
    report = analyze(k, options)
    if args.format == "json":
        print(dumps(report.to_dict()))
        return EXIT_OK

    shown = report.display
    print(f"table      k00={k.k00} k01={k.k01} k10={k.k10} k11={k.k11}  (n={k.n})")
    print(f"level      {report.beta}")
    print(f"pi1 (Se2 - Se1) >= {_fmt(shown['gain_product_lower'])}")
    if report.gain_lower_at_cap is not None:
        print(f"Se2 - Se1 >= {_fmt(shown['gain_lower_at_cap'])}   given pi1 <= {report.prevalence_max}")
        print(f"Se1 <= {_fmt(shown['se1_lower_implied'])}   implied by the gain bound")
    print(f"Se1 <= {_fmt(shown['se1_upper'])}   for any prevalence")
    if report.se1_upper_direct is not None:
        print(f"Se1 <= {_fmt(shown['se1_upper_direct'])}   direct ratio bound")
    if report.full_model_note:
        print(f"without Sp1 <= Sp2: {report.full_model_note['text']}  ({report.full_model_note['condition']})")
    print(f"engine {ENGINE_ID}, statistic {STATISTIC_ID}")
    return EXIT_OK


def cmd_feasible(args) -> int:
    q = density_from_args(args)
    name = args.set
    out: dict = {"q": list(q.q), "set": name}
    if args.extremes:
        needs_pr = name != "E_le"
        if needs_pr and args.pr is None:
            raise ValidationError(f"--extremes for set {name} needs --pr")
        if args.pr is not None and not 0.0 <= args.pr <= 1.0:
            raise ValidationError(f"--pr must lie in [0, 1], got {args.pr}")
        ranges = geo.extremes(q, name, args.pr if needs_pr else None)
        out["pr"] = args.pr if needs_pr else None
        out["extremes"] = {
            key: {"lower": lo, "upper": hi, "display": [floor_display(lo), ceil_display(hi)]}
            for key, (lo, hi) in ranges.items()
        }
        if name == "E_le":
            out["se1_upper_from_q"] = ranges["Se1"][1]
        if args.format == "json":
            print(dumps(out))
        else:
            pr_text = "" if not needs_pr else f" at Pr={args.pr}"
            print(f"set {name}{pr_text}")
            for key, (lo, hi) in ranges.items():
                print(f"  {_fmt(floor_display(lo))} <= {key} <= {_fmt(ceil_display(hi))}   [{lo!r}, {hi!r}]")
        return EXIT_OK

    if args.point is None:
        raise ValidationError("give --point or --extremes")
    fields = POINT_FIELDS[name]
    point = _floats(args.point, "--point", len(fields))
    if name == "A":
        member = geo.in_A(q, geo.FeasibleQuintuple(*point))
    elif name in ("B", "B_le"):
        member = (geo.in_B if name == "B" else geo.in_B_le)(q, geo.SensTriple(*point))
    elif name in ("C", "C_le"):
        member = (geo.in_C if name == "C" else geo.in_C_le)(q, geo.GainPair(*point))
    elif name == "D":
        member = geo.in_D(q, *point)
    elif name == "E":
        member = geo.in_E(q, *point)
    elif name == "D_le":
        member = geo.necessary_D_le(q, *point)
    else:
        member = 0.0 <= point[0] <= geo.se1_upper_from_q(q) + geo.TOL
    out["point"] = dict(zip(fields, point))
    out["member"] = bool(member)
    if name == "D_le":
        out["note"] = "only a necessary condition is checked for D_le"
    if args.format == "json":
        print(dumps(out))
    else:
        verdict = "member" if member else "not a member"
        print(f"{verdict} of {name}: " + ", ".join(f"{f}={v}" for f, v in zip(fields, point)))
        if "note" in out:
            print(out["note"])
    return EXIT_OK


def cmd_coverage(args) -> int:
    if not 0.0 < args.beta < 1.0:
        raise ValidationError(f"--beta must lie in (0, 1), got {args.beta}")
    if args.n < 1:
        raise ValidationError("--n must be positive")
    if args.reps is None:
        if args.n > MAX_EXACT_N:
            raise ResourceError(f"exact coverage is limited to n <= {MAX_EXACT_N}")
        res = exact_coverage_diff(args.n, args.beta, args.grid)
        passed = res.min_coverage >= args.beta
        out = {"mode": "exact", "n": args.n, "beta": args.beta, "grid": args.grid,
               "min_coverage": res.min_coverage, "argmin_q": list(res.argmin),
               "outcomes": res.n_outcomes, "grid_points": res.n_grid, "passed": passed}
        lines = [f"exact coverage n={args.n} beta={args.beta} grid={args.grid}",
                 f"  min coverage {res.min_coverage:.6f} at q={tuple(round(x, 4) for x in res.argmin)}"]
    else:
        res = mc_coverage_restricted(args.n, args.beta, args.reps, args.seed)
        ok_gain = res.coverage_gain >= args.beta - 3 * res.se_gain
        ok_se1 = res.coverage_se1 >= args.beta - 3 * res.se_se1
        passed = ok_gain and ok_se1
        out = {"mode": "monte_carlo", "n": args.n, "beta": args.beta, "reps": args.reps,
               "seed": args.seed, "coverage_gain": res.coverage_gain, "se_gain": res.se_gain,
               "coverage_se1": res.coverage_se1, "se_se1": res.se_se1, "passed": passed}
        lines = [f"Monte Carlo coverage n={args.n} beta={args.beta} reps={args.reps} seed={args.seed}",
                 f"  gain bound {res.coverage_gain:.4f} (se {res.se_gain:.4f})",
                 f"  Se1 bound  {res.coverage_se1:.4f} (se {res.se_se1:.4f})"]
    if args.format == "json":
        print(dumps(out))
    else:
        print("\n".join(lines))
        print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_oracle(args) -> int:
    if args.samples < 0:
        raise ValidationError("--samples must be nonnegative")
    report = lemma_suite(args.seed, args.samples)
    if args.format == "json":
        print(dumps(report.to_dict()))
    else:
        for c in report.checks:
            status = "SKIP" if c.skipped else ("PASS" if c.passed else "FAIL")
            extra = f"  {c.detail}" if c.detail else ""
            print(f"{status} {c.name} ({c.checked} checked, {c.failures} failed){extra}")
            if c.counterexample:
                print(f"     counterexample: {c.counterexample}")
        print("PASS" if report.passed else "FAIL")
    return EXIT_OK if report.passed else EXIT_FAIL


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    version = (f"nogold {__version__} (engine {ENGINE_ID}, statistic {STATISTIC_ID}, "
               f"ratio statistic {RATIO_STATISTIC_ID})")
    parser = argparse.ArgumentParser(prog="nogold", description=__doc__.splitlines()[0],
                                     formatter_class=argparse.RawTextHelpFormatter)
    parser.add_argument("--version", action="version", version=version)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("text", "json"), default="text")

    p = sub.add_parser("bound", help="confidence bounds from a paired 2x2 table")
    for c in CELLS:
        p.add_argument(f"--{c}", type=int)
    p.add_argument("--input", help="JSON object or two-line CSV with k00,k01,k10,k11")
    p.add_argument("--beta", type=float, default=BoundConfig().beta)
    p.add_argument("--prevalence-max", type=float)
    p.add_argument("--direct-ratio", action="store_true", help="also compute the direct Se1 ratio bound")
    common(p)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("feasible", help="membership in, or extremes of, a feasible set")
    for c in ("00", "01", "10", "11"):
        p.add_argument(f"--q{c}", type=float)
    p.add_argument("--from-counts", help="k00,k01,k10,k11")
    p.add_argument("--set", required=True, choices=tuple(POINT_FIELDS))
    p.add_argument("--point", help="comma separated coordinates of the point to test")
    p.add_argument("--extremes", action="store_true")
    p.add_argument("--pr", type=float, help="prevalence at which to report extremes")
    common(p)
    p.set_defaults(func=cmd_feasible)

    p = sub.add_parser("coverage", help="exact or Monte Carlo coverage check")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, default=BoundConfig().beta)
    p.add_argument("--grid", type=int, default=21)
    p.add_argument("--reps", type=int, help="switch to Monte Carlo under the restricted model")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("oracle", help="numerical audit of the feasible-set predicates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=10000)
    common(p)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValidationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
