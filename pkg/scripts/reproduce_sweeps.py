"""Run the standard parameter sweeps and write one CSV per sweep.

    python scripts/reproduce_sweeps.py --out results/ [--jobs 4] [--only horizon,rra]
"""

import argparse
import time
from pathlib import Path

from varheston.cli import SWEEP_FIELDS, run_sweep, write_csv
from varheston.scenario import Scenario, SweepSpec

SWEEPS = {
    "horizon": ("base", "horizon", (0.5, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0)),
    "rra": ("base", "rra", (1.5, 2.0, 3.0, 4.0, 5.0)),
    "epsilon": ("base", "epsilon", (0.01, 0.02, 0.05, 0.08, 0.1)),
    "turbulent_rho": ("turbulent", "rho", (-0.8, -0.7571, -0.6, -0.4, -0.2)),
    "turbulent_scale": ("turbulent", "kappa_sigma_scale", (0.5, 0.75, 1.0, 1.25)),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--only", help="comma-separated subset of " + ", ".join(SWEEPS))
    args = ap.parse_args()
    names = args.only.split(",") if args.only else list(SWEEPS)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in names:
        scenario, axis, grid = SWEEPS[name]
        t0 = time.perf_counter()
        rows = run_sweep(Scenario.load(scenario), SweepSpec(axis, grid), args.jobs)
        write_csv(out / f"{name}.csv", SWEEP_FIELDS, rows)
        print(f"{name}: {len(rows)} points in {time.perf_counter() - t0:.0f} s")
        for r in rows:
            if r["status"] == "ok":
                print(f"  {axis}={r['value']:<8g} pi_u={r['pi_u']:.4f} pi_c={r['pi_c']:.4f} eps_u={r['eps_u']:.4f}")
            else:
                print(f"  {axis}={r['value']:<8g} {r['status']}: {r['error']}")


if __name__ == "__main__":
    main()
