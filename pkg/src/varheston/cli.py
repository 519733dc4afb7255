"""Command-line front end: ``varheston {solve,sweep,verify}``.

Exit codes: 0 ok, 2 invalid input, 3 non-convergence, 4 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .charfn import QuadratureError, RiccatiBlowUp
from .model import ValidationError
from .pricing import DerivativeParams
from .scenario import AXES, Scenario, SweepSpec, apply_env
from .solver import ConvergenceError, SolveResult, solve_nls0
from .verify import run_checks

log = logging.getLogger("varheston")

EXIT_OK, EXIT_INVALID, EXIT_NOCONV, EXIT_VERIFY = 0, 2, 3, 4

RESULT_FIELDS = ("binding", "eps_u", "pi_u", "pi_c", "y", "k_v", "k_eps", "lambda_eps",
                 "resid_budget", "resid_vega", "resid_third", "iterations")
SWEEP_FIELDS = ("index", "axis", "value", "status") + RESULT_FIELDS + ("error",)
CHECK_FIELDS = ("check", "passed", "measured", "tolerance", "detail")
NUMERIC_FAILURES = (ConvergenceError, QuadratureError, RiccatiBlowUp)


def result_row(res: SolveResult) -> dict:
    p = res.params
    return {"binding": res.binding, "eps_u": res.eps_u, "pi_u": res.pi_u, "pi_c": res.pi_c,
            "y": p.y, "k_v": p.k_v, "k_eps": p.k_eps, "lambda_eps": res.lambda_eps,
            "resid_budget": res.residuals[0], "resid_vega": res.residuals[1], "resid_third": res.residuals[2],
            "iterations": res.iterations}


def _full(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return _full(v)


def write_csv(path, fields, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([_full(row.get(f)) for f in fields])
    Path(path).write_text(buf.getvalue())


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_output(path, fields, rows, payload) -> None:
    if str(path).lower().endswith(".json"):
        write_json(path, payload)
    else:
        write_csv(path, fields, rows)


def print_table(fields, rows, stream=None) -> None:
    stream = stream or sys.stdout
    cells = [[_short(r.get(f)) for f in fields] for r in rows]
    widths = [max(len(f), *(len(c[i]) for c in cells)) if cells else len(f) for i, f in enumerate(fields)]
    print("  ".join(f.ljust(w) for f, w in zip(fields, widths)).rstrip(), file=stream)
    for c in cells:
        print("  ".join(x.ljust(w) for x, w in zip(c, widths)).rstrip(), file=stream)


def load_scenario(args) -> Scenario:
    sc = apply_env(Scenario.load(args.scenario))
    mc = sc.mc
    if args.seed is not None:
        mc = replace(mc, seed=args.seed)
    if args.paths is not None:
        mc = replace(mc, n_paths=args.paths)
    return sc.replace(mc=mc)


# solve ------------------------------------------------------------------------

def cmd_solve(args) -> int:
    sc = load_scenario(args)
    res = solve_nls0(sc.pricer(), sc.problem, sc.numerics.solver_config())
    row = result_row(res)
    if not args.quiet:
        print("verdict: " + ("binding" if res.binding else "non-binding"))
        fields = RESULT_FIELDS if res.binding else ("binding", "eps_u", "pi_u", "pi_c")
        print_table(("quantity", "value"), [{"quantity": f, "value": row[f]} for f in fields])
    if args.out:
        write_output(args.out, RESULT_FIELDS, [row], {"scenario": sc.to_dict(), "result": row})
    return EXIT_OK


# sweep ------------------------------------------------------------------------

def _solve_point(job):
    sc, guess = job
    cfg = sc.numerics.solver_config()
    try:
        pricer = sc.pricer()
        if guess is not None:
            try:
                return "ok", solve_nls0(pricer, sc.problem, cfg, guess=guess), ""
            except NUMERIC_FAILURES:
                log.info("warm start failed, retrying from the default guess")
        return "ok", solve_nls0(pricer, sc.problem, cfg), ""
    except ValidationError as exc:
        return "invalid", None, str(exc)
    except NUMERIC_FAILURES as exc:
        return "failed", None, str(exc)


def _warm(prev: SolveResult | None, sc: Scenario) -> DerivativeParams | None:
    if prev is None or not prev.binding:
        return None
    p, spec = prev.params, sc.problem
    s = p.k_v / p.k_eps
    e = p.k_eps / p.K
    return DerivativeParams(p.y / prev.params.K * spec.K, s * e * spec.K, e * spec.K, spec.K)


def run_sweep(sc: Scenario, sweep: SweepSpec, jobs: int = 1) -> list[dict]:
    """One row per grid point, in grid order.

    A single worker warm-starts each point from the previous binding solution;
    several workers start every point from the default guess.
    """
    points = []
    for x in sweep.grid:
        try:
            points.append((sweep.apply(sc, x), None))
        except ValidationError as exc:
            points.append((None, str(exc)))
    outcomes: list = [None] * len(points)
    if jobs > 1:
        todo = [(i, (s, None)) for i, (s, err) in enumerate(points) if s is not None]
        with ProcessPoolExecutor(jobs) as ex:
            for (i, _), out in zip(todo, ex.map(_solve_point, [j for _, j in todo])):
                outcomes[i] = out
    else:
        prev = None
        for i, (s, _) in enumerate(points):
            if s is None:
                continue
            outcomes[i] = _solve_point((s, _warm(prev, s)))
            if outcomes[i][1] is not None:
                prev = outcomes[i][1]
    rows = []
    for i, (x, (s, err), out) in enumerate(zip(sweep.grid, points, outcomes)):
        row = {"index": i, "axis": sweep.axis, "value": x}
        if s is None:
            row.update(status="invalid", error=err)
        else:
            status, res, msg = out
            row.update(status=status, error=msg)
            if res is not None:
                row.update(result_row(res))
        rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    sc = load_scenario(args)
    sweep = SweepSpec.parse(args.axis, args.grid)
    if args.jobs < 1:
        raise ValidationError("jobs", f"need at least one worker, got {args.jobs}")
    rows = run_sweep(sc, sweep, args.jobs)
    if not args.quiet:
        print_table(("value", "status", "pi_u", "pi_c", "y", "k_v", "k_eps", "lambda_eps", "eps_u"), rows)
        for r in rows:
            if r["status"] != "ok":
                print(f"point {r['index']} ({sweep.axis}={r['value']:g}): {r['error']}", file=sys.stderr)
    if args.out:
        write_output(args.out, SWEEP_FIELDS, rows,
                     {"scenario": sc.to_dict(), "axis": sweep.axis, "grid": list(sweep.grid), "rows": rows})
    return EXIT_OK if any(r["status"] == "ok" for r in rows) else EXIT_NOCONV


# verify -----------------------------------------------------------------------

def cmd_verify(args) -> int:
    sc = load_scenario(args)
    checks = run_checks(sc)
    rows = [{"check": c.name, "passed": c.passed, "measured": c.measured, "tolerance": c.tolerance,
             "detail": c.detail} for c in checks]
    if not args.quiet:
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: measured {c.measured:.6g}, "
                  f"tolerance {c.tolerance:.6g}" + (f"  ({c.detail})" if c.detail else ""))
    if args.out:
        write_output(args.out, CHECK_FIELDS, rows, {"scenario": sc.to_dict(), "checks": rows})
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY


# entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="base", help="scenario file or bundled name (default: base)")
    common.add_argument("--out", help="write results to this CSV or .json file")
    common.add_argument("--seed", type=int, help="override the Monte Carlo seed")
    common.add_argument("--paths", type=int, help="override the number of Monte Carlo paths")
    common.add_argument("--quiet", action="store_true", help="suppress tables on stdout")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")

    ap = argparse.ArgumentParser(prog="varheston", description="VaR-constrained power utility in the Heston model")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve the t = 0 system for one scenario")
    sw = sub.add_parser("sweep", parents=[common], help="solve along a one-dimensional parameter grid")
    sw.add_argument("--axis", required=True, choices=AXES)
    sw.add_argument("--grid", required=True, help="comma-separated ascending values")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes (default 1, warm-started)")
    sub.add_parser("verify", parents=[common], help="Monte Carlo and finite-difference cross-checks")
    return ap


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: invalid input, {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NUMERIC_FAILURES as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
