"""Cross-checks of the Fourier stack against Monte Carlo, finite differences and exact identities."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import trapezoid

from .charfn import Measure
from .mc import estimate_price, estimate_tail_prob, simulate
from .pricing import DerivativeParams, payoff_D
from .scenario import Scenario
from .solver import solve_nls0


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: str = ""


def _abs(name, value, tol, detail=""):
    return Check(name, float(value), float(tol), bool(abs(value) <= tol), detail)


def _mc(name, fourier, mc, se, n_se=3.0):
    diff = fourier - mc
    return Check(name, float(diff), float(n_se * se), bool(abs(diff) <= n_se * se),
                 f"fourier={fourier:.6g} mc={mc:.6g} se={se:.3g}")


def run_checks(scenario: Scenario, n_paths: int | None = None, seed: int | None = None,
               fd_y: float = 1e-5, fd_v: float = 1e-5) -> list[Check]:
    """Run the full verification suite at t = 0 and return one ``Check`` per item."""
    mcs = scenario.mc
    if n_paths is not None:
        mcs = replace(mcs, n_paths=n_paths)
    if seed is not None:
        mcs = replace(mcs, seed=seed)
    m, spec = scenario.market, scenario.problem
    pricer = scenario.pricer()
    cf = pricer.cf
    x0, v0, T, r = spec.x0, m.v0, spec.T, m.r
    pricer.prefetch(0.0)
    out: list[Check] = []

    # characteristic function and density
    for meas in Measure:
        out.append(_abs(f"phi(0)=1 [{meas.value}]", abs(cf.char_fn(meas, 0.0, 0.0, math.log(x0), v0) - 1.0), 0.0))
        mag = np.abs(cf.table(meas, T).phi(math.log(x0), v0))
        out.append(_abs(f"|phi|<=1 on grid [{meas.value}]", max(mag.max() - 1.0, 0.0), 1e-12))
        z = np.linspace(math.log(x0) - 3.0, math.log(x0) + 3.0, 4001)
        dens = cf.density(meas, z, 0.0, x0, v0, clamp=False)
        out.append(_abs(f"density integrates to 1 [{meas.value}]", trapezoid(dens, z) - 1.0, 1e-4))
        out.append(_abs(f"density ripple [{meas.value}]", max(-dens.min(), 0.0), 1e-6))
    fwd = cf.char_fn(Measure.Q, -1j, 0.0, math.log(x0), v0).real
    out.append(_abs("Q-martingale (Fourier)", fwd / (x0 * math.exp(r * T)) - 1.0, 1e-5))

    # dampening invariance
    ref_put = pricer.put_price(spec.K, 0.0, x0, v0)
    for a in (1.5, 3.0):
        out.append(_abs(f"put dampening {a:g} vs {pricer.damp.alpha_put:g}",
                        pricer.put_price(spec.K, 0.0, x0, v0, alpha=a) / ref_put - 1.0, 1e-6))
    ref_dig = pricer.digital_put_price(spec.K, 0.0, x0, v0)
    for a in (0.25, 0.75):
        out.append(_abs(f"digital dampening {a:g} vs {pricer.damp.alpha_digital:g}",
                        pricer.digital_put_price(spec.K, 0.0, x0, v0, alpha=a) / ref_dig - 1.0, 1e-6))

    # the solve supplies the point for the Greeks and the payoff checks
    res = solve_nls0(pricer, spec, scenario.numerics.solver_config())
    p = res.params if res.binding else DerivativeParams(x0, 0.7 * spec.K, 0.87 * spec.K, spec.K)
    price, delta, vega = pricer.aggregate(p, 0.0, v0)
    up = replace(p, y=p.y * (1 + fd_y))
    dn = replace(p, y=p.y * (1 - fd_y))
    fd_delta = (pricer.h_B(up, 0.0, v0) - pricer.h_B(dn, 0.0, v0)) / (up.y - dn.y)
    out.append(_abs("delta vs central FD", delta - fd_delta, 1e-6))
    fd_vega = (pricer.h_B(p, 0.0, v0 + fd_v) - pricer.h_B(p, 0.0, v0 - fd_v)) / (2 * fd_v)
    out.append(_abs("vega vs central FD", vega - fd_vega, 1e-4 * x0))
    if res.binding:
        out.append(_abs("vega neutrality at the solution", vega, 1e-3 * x0))
        out.append(_abs("VaR equation at the solution", pricer.h_VaR(p, 0.0, v0) - spec.epsilon, 5e-4))

    # Monte Carlo
    tau = T
    bq = simulate(m, spec.gamma, T, mcs.sim_config(Measure.Q), 0.0, x0, v0, scenario.numerics.lambda_v)
    bp = simulate(m, spec.gamma, T, mcs.sim_config(Measure.P, seed_offset=1), 0.0, x0, v0,
                  scenario.numerics.lambda_v)
    mean, se = estimate_price(bq, lambda y: y, r, tau)
    out.append(_mc("Q-martingale (MC)", x0, mean, se))
    K = spec.K
    mean, se = estimate_price(bq, lambda y: np.maximum(K - y, 0.0), r, tau)
    out.append(_mc("put price vs MC", ref_put, mean, se))
    mean, se = estimate_price(bq, lambda y: (y < K).astype(float), r, tau)
    out.append(_mc("digital price vs MC", ref_dig, mean, se))
    eps_u = pricer.digital_put_price(K, 0.0, x0, v0, Measure.P)
    pr, se = estimate_tail_prob(bp, K)
    out.append(_mc("VaR probability vs MC", eps_u, pr, se))
    bq_y = bq.rebase(p.y)
    mean, se = estimate_price(bq_y, lambda y: payoff_D(y, p), r, tau)
    out.append(_mc("budget of D vs MC", price, mean, se))
    pr, se = estimate_tail_prob(bp.rebase(p.y), p.k_eps)
    out.append(_mc("P(D < K) vs MC", pricer.h_VaR(p, 0.0, v0), pr, se))
    return out
