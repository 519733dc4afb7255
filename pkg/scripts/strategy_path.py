"""Optimal stock fraction at t = 0 under the constraint versus the unconstrained one,
together with the shortfall probabilities, for one scenario.

    python scripts/strategy_path.py [--scenario base] [--paths 200000]
"""

import argparse
from dataclasses import replace

import numpy as np

from varheston.charfn import Measure
from varheston.mc import estimate_tail_prob, simulate
from varheston.pricing import payoff_D
from varheston.scenario import Scenario
from varheston.solver import solve_nls0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="base")
    ap.add_argument("--paths", type=int, default=200_000)
    args = ap.parse_args()
    sc = Scenario.load(args.scenario)
    m, spec = sc.market, sc.problem
    res = solve_nls0(sc.pricer(), spec, sc.numerics.solver_config())
    print(f"binding={res.binding}  pi_u={res.pi_u:.4f}  pi_c={res.pi_c:.4f}  eps_u={res.eps_u:.4f}")
    if not res.binding:
        return
    p = res.params
    print(f"y={p.y:.3f}  k_v={p.k_v:.3f}  k_eps={p.k_eps:.3f}  lambda={res.lambda_eps:.4g}")

    # real-world terminal wealth with and without the constraint, from the same paths
    cfg = replace(sc.mc, n_paths=args.paths).sim_config(Measure.P)
    batch = simulate(m, spec.gamma, spec.T, cfg, 0.0, spec.x0, m.v0, sc.numerics.lambda_v)
    free = batch.terminal_wealth
    cons = payoff_D(batch.rebase(p.y).terminal_wealth, p)
    pr, se = estimate_tail_prob(batch, spec.K)
    print(f"P(X_T < K): unconstrained {pr:.4f} +/- {se:.4f}, constrained {np.mean(cons < spec.K):.4f}")
    for q in (0.01, 0.05, 0.1, 0.5, 0.9):
        print(f"  quantile {q:>4}: unconstrained {np.quantile(free, q):8.3f}  constrained {np.quantile(cons, q):8.3f}")


if __name__ == "__main__":
    main()
