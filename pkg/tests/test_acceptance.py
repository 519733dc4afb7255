"""Acceptance criteria, each at its stated tolerance.

Every test records a one-line verdict that the terminal summary prints as
``[PASS]`` or ``[FAIL]``; run ``pytest tests/test_acceptance.py -v`` to see them.
"""

import math
import time
import timeit

import numpy as np
import pytest

from varheston.charfn import FrequencyGrid, Measure, integrate_riccati
from varheston.cli import main
from varheston.mc import SimConfig, estimate_price, simulate
from varheston.model import MarketModel, check_kraft_condition, q_measure_params, unconstrained_strategy
from varheston.pricing import FourierPricer
from varheston.scenario import Scenario
from varheston.solver import check_binding, solve_nls0
from varheston.verify import run_checks

from conftest import BASE_MARKET as M, BASE_SPEC as S, solve_point

RESULTS = {}


def record(key, checks):
    """checks: list of (label, ok, text); stores one line and returns overall success."""
    ok = all(c[1] for c in checks)
    RESULTS[key] = (ok, "; ".join(f"{label} {text}{'' if good else ' [miss]'}" for label, good, text in checks))
    return ok


def near(label, value, target, tol, fmt="{:.4f}"):
    ok = abs(value - target) <= tol
    return label, ok, f"{fmt.format(value)} vs {fmt.format(target)} +/- {tol:g}"


def test_01_unconstrained_strategy():
    pi = unconstrained_strategy(0.0, M, S.gamma, S.T)
    runtime = min(timeit.repeat(lambda: unconstrained_strategy(0.0, M, S.gamma, S.T), number=100, repeat=5)) / 100
    ok = record("01", [near("pi_u(0)", pi, 0.3371, 2e-4),
                       ("runtime", runtime < 1e-3, f"{runtime * 1e6:.1f} us < 1 ms")])
    assert ok, RESULTS["01"]


def test_02_constrained_solve():
    sc = Scenario.load("base")
    start = time.perf_counter()
    res = solve_nls0(sc.pricer(), sc.problem, sc.numerics.solver_config())
    elapsed = time.perf_counter() - start
    p = res.params
    ok = record("02", [near("pi_c(0)", res.pi_c, 0.3172, 3e-3),
                       near("y0", p.y, 99.5, 0.3, "{:.3f}"),
                       near("k_v", p.k_v, 68.55, 0.3, "{:.3f}"),
                       near("k_eps", p.k_eps, 87.96, 0.3, "{:.3f}"),
                       ("runtime", elapsed < 60.0, f"{elapsed:.1f} s < 60 s")])
    assert ok, RESULTS["02"]


def test_03_unconstrained_shortfall(base_pricer):
    _, eps_u = check_binding(base_pricer, S)
    ok = record("03", [near("eps_u", eps_u, 0.12, 0.005)])
    assert ok, RESULTS["03"]


def test_04_measure_change_constants():
    kt, tt = q_measure_params(0.0, M, S.gamma, S.T, lambda_v=0.0238)
    ok = record("04", [near("kappa_tilde", kt, 3.5, 5e-5, "{:.5f}"), near("theta_tilde", tt, 0.03, 5e-5, "{:.5f}")])
    assert ok, RESULTS["04"]


def test_05_horizon_sweep():
    r1, r5, r10 = (solve_point("horizon", T) for T in (1.0, 5.0, 10.0))
    gap = abs(r10.pi_c - r10.pi_u)
    ok = record("05", [near("T=1 pi_c", r1.pi_c, 0.28, 0.01), near("T=5 pi_c", r5.pi_c, 0.33, 0.01),
                       ("T=10 |pi_c-pi_u|", gap < 0.01, f"{gap:.4f} < 0.01")])
    assert ok, RESULTS["05"]


def test_06_risk_aversion_sweep():
    r = solve_point("rra", 2.0)
    ok = record("06", [near("RRA=2 pi_c", r.pi_c, 0.44, 0.01), near("RRA=2 pi_u", r.pi_u, 0.50, 0.01)])
    assert ok, RESULTS["06"]


def test_07_turbulent_market():
    checks = [near("rho=-0.4", solve_point("rho", -0.4, "turbulent").pi_c, 0.427, 0.01),
              near("rho=-0.6", solve_point("rho", -0.6, "turbulent").pi_c, 0.44, 0.01),
              near("delta=1", solve_point("kappa_sigma_scale", 1.0, "turbulent").pi_c, 0.452, 0.01),
              near("delta=0.75", solve_point("kappa_sigma_scale", 0.75, "turbulent").pi_c, 0.447, 0.01)]
    ok = record("07", checks)
    assert ok, RESULTS["07"]


@pytest.fixture(scope="module")
def base_checks(base_scenario):
    return {c.name: c for c in run_checks(base_scenario, n_paths=1_000_000)}


def test_08_property_suite(base_checks):
    names = ["phi(0)=1 [P]", "phi(0)=1 [Q]", "|phi|<=1 on grid [P]", "|phi|<=1 on grid [Q]",
             "density integrates to 1 [P]", "density integrates to 1 [Q]", "Q-martingale (Fourier)",
             "Q-martingale (MC)", "delta vs central FD", "vega vs central FD", "put dampening 1.5 vs 2",
             "put dampening 3 vs 2", "digital dampening 0.25 vs 0.5", "digital dampening 0.75 vs 0.5",
             "vega neutrality at the solution", "VaR equation at the solution"]
    checks = [(n, base_checks[n].passed, f"{base_checks[n].measured:.3g}") for n in names]
    u = np.linspace(0.0, 200.0, 64) - 3j  # put contour at alpha = 2
    drift = 0.0
    for meas in Measure:
        A1, B1 = integrate_riccati(meas, u, S.T, M, S.gamma, S.T / 10_000)
        A2, B2 = integrate_riccati(meas, u, S.T, M, S.gamma, S.T / 20_000)
        drift = max(drift, np.abs(A1 - A2).max(), np.abs(B1 - B2).max())
    checks.append(("RK4 halving", drift < 1e-8, f"{drift:.2g}"))
    ok = record("08", checks)
    assert ok, RESULTS["08"]


def random_points(seed=2024, n=10):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        kappa, sigma = rng.uniform(1.0, 5.0), rng.uniform(0.1, 0.5)
        theta = rng.uniform(0.55 * sigma**2 / kappa, 0.08)
        if not kappa * theta > 0.525 * sigma**2:
            continue
        m = MarketModel(0.03, rng.uniform(0.5, 1.5), kappa, theta, sigma, rng.uniform(-0.8, 0.0),
                        rng.uniform(0.02, 0.08))
        gamma = float(rng.choice([-1.0, -2.0, -4.0]))
        if not check_kraft_condition(m, gamma):
            continue
        out.append((m, gamma, rng.uniform(1.0, 1.5), rng.uniform(85.0, 115.0)))
    return out


def test_09_oracle_equivalence(base_checks):
    checks = []
    for i, (m, gamma, T, strike) in enumerate(random_points()):
        pricer = FourierPricer(m, gamma, T, grid=FrequencyGrid(8192, 400.0))
        b = simulate(m, gamma, T, SimConfig(n_paths=1_000_000, seed=9000 + i, measure=Measure.Q), 0.0, 100.0, m.v0)
        mp, sp = estimate_price(b, lambda y: np.maximum(strike - y, 0.0), m.r, T)
        md, sd = estimate_price(b, lambda y: (y < strike).astype(float), m.r, T)
        fp = pricer.put_price(strike, 0.0, 100.0, m.v0)
        fd = pricer.digital_put_price(strike, 0.0, 100.0, m.v0)
        checks.append((f"put#{i}", abs(fp - mp) < 3 * sp, f"{(fp - mp) / sp:+.2f}se"))
        checks.append((f"dig#{i}", abs(fd - md) < 3 * sd, f"{(fd - md) / sd:+.2f}se"))
    c = base_checks["budget of D vs MC"]
    checks.append(("budget", c.passed, c.detail))
    ok = record("09", checks)
    assert ok, RESULTS["09"]


def test_10_determinism(tmp_path, capsys):
    paths = {k: tmp_path / f"{k}.csv" for k in ("s1", "s2", "w1", "w2")}
    for k in ("s1", "s2"):
        assert main(["solve", "--scenario", "base", "--seed", "7", "--out", str(paths[k]), "--quiet"]) == 0
    for k in ("w1", "w2"):
        assert main(["sweep", "--scenario", "base", "--axis", "epsilon", "--grid", "0.01,0.02", "--seed", "7",
                     "--out", str(paths[k]), "--quiet"]) == 0
    same_solve = paths["s1"].read_bytes() == paths["s2"].read_bytes()
    same_sweep = paths["w1"].read_bytes() == paths["w2"].read_bytes()
    ok = record("10", [("solve csv", same_solve, "identical" if same_solve else "differs"),
                       ("sweep csv", same_sweep, "identical" if same_sweep else "differs")])
    assert ok, RESULTS["10"]


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
