import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from varheston.charfn import Measure
from varheston.mc import PathBatch, SimConfig, estimate_price, estimate_tail_prob, simulate
from varheston.model import MarketModel, ValidationError

from conftest import BASE_MARKET as M, BASE_SPEC as S


def test_config_validation():
    with pytest.raises(ValidationError) as exc:
        SimConfig(n_paths=0)
    assert exc.value.invariant == "n_paths"
    with pytest.raises(ValidationError):
        SimConfig(n_steps=0)
    with pytest.raises(ValidationError):
        SimConfig(scheme="milstein")
    assert SimConfig(steps_per_year=500).steps_for(1.5) == 750
    assert SimConfig(n_steps=7).steps_for(3.0) == 7


def test_degenerate_variance_is_deterministic():
    m = MarketModel(0.03, 1.0, 3.6129, 0.0291, 1e-12, -0.4, 0.05)
    cfg = SimConfig(n_paths=2000, seed=1, n_steps=3000)
    b = simulate(m, -2.0, 3.0, cfg, 0.0, 100.0, m.v0)
    assert np.var(b.terminal_variances) < 1e-20
    mean_v = m.theta + (m.v0 - m.theta) * math.exp(-m.kappa * 3.0)
    assert b.terminal_variances[0] == pytest.approx(mean_v, rel=1e-3)


@settings(max_examples=5, deadline=None)
@given(st.floats(-0.9, 0.0), st.floats(0.01, 0.08), st.floats(50.0, 150.0), st.integers(0, 2**32))
def test_q_martingale(rho, v, y, seed):
    m = MarketModel(0.03, 1.0, 3.0, 0.04, 0.3, rho, v)
    b = simulate(m, -2.0, 2.0, SimConfig(n_paths=20_000, seed=seed, measure=Measure.Q, steps_per_year=100),
                 0.0, y, v)
    mean, se = estimate_price(b, lambda w: w, m.r, 2.0)
    assert abs(mean - y) < 3 * se


def test_base_shortfall_probability(base_pricer):
    from varheston.solver import check_binding
    _, eps_u = check_binding(base_pricer, S)
    b = simulate(M, S.gamma, S.T, SimConfig(n_paths=1_000_000, seed=4242), 0.0, S.x0, M.v0)
    p, se = estimate_tail_prob(b, S.K)
    assert abs(p - eps_u) < 3 * se
    assert p == pytest.approx(0.12, abs=0.005)


def test_estimators_degenerate_inputs():
    b = simulate(M, S.gamma, S.T, SimConfig(n_paths=1000, seed=2, n_steps=10), 0.0, 100.0, M.v0)
    mean, se = estimate_price(b, lambda w: 7.0, M.r, S.T)
    assert mean == pytest.approx(7.0 * math.exp(-M.r * S.T), rel=1e-15)
    assert se == 0.0
    assert estimate_tail_prob(b, 0.0) == (0.0, 0.0)
    assert estimate_tail_prob(b, math.inf) == (1.0, 0.0)
    q = simulate(M, S.gamma, S.T, SimConfig(n_paths=10, seed=2, n_steps=10, measure=Measure.Q), 0.0, 100.0, M.v0)
    with pytest.raises(ValidationError):
        estimate_tail_prob(q, 90.0)


def test_determinism_and_worker_independence():
    cfg = SimConfig(n_paths=5000, seed=123, n_steps=50, block_size=1024)
    a = simulate(M, S.gamma, S.T, cfg, 0.0, 100.0, M.v0)
    b = simulate(M, S.gamma, S.T, cfg, 0.0, 100.0, M.v0)
    c = simulate(M, S.gamma, S.T, cfg, 0.0, 100.0, M.v0, n_workers=2)
    for other in (b, c):
        assert np.array_equal(a.terminal_logs, other.terminal_logs)
        assert np.array_equal(a.terminal_variances, other.terminal_variances)
    d = simulate(M, S.gamma, S.T, SimConfig(n_paths=5000, seed=124, n_steps=50, block_size=1024), 0.0, 100.0, M.v0)
    assert not np.array_equal(a.terminal_logs, d.terminal_logs)


def test_blocks_use_distinct_streams():
    cfg = SimConfig(n_paths=2048, seed=5, n_steps=5, block_size=1024)
    b = simulate(M, S.gamma, S.T, cfg, 0.0, 100.0, M.v0)
    assert not np.array_equal(b.terminal_logs[:1024], b.terminal_logs[1024:])


def test_step_refinement():
    put = lambda w: np.maximum(100.0 - w, 0.0)
    est = []
    for n in (375, 750):
        b = simulate(M, S.gamma, S.T, SimConfig(n_paths=200_000, seed=31, n_steps=n, measure=Measure.Q),
                     0.0, 99.5, M.v0)
        est.append(estimate_price(b, put, M.r, S.T))
    (m1, s1), (m2, s2) = est
    assert abs(m1 - m2) < 2 * math.hypot(s1, s2)


def test_drift_difference_between_measures():
    # Z_T - ln y - r tau + int pi^2 v / 2 has mean E[int pi lambda v] under P and zero under Q
    for meas in Measure:
        b = simulate(M, S.gamma, S.T, SimConfig(n_paths=200_000, seed=8, measure=meas, steps_per_year=200),
                     0.0, 100.0, M.v0)
        excess = b.terminal_logs - b.ln_y - M.r * b.tau + 0.5 * b.int_pi2_v
        target = b.int_pilam_v if meas is Measure.P else np.zeros_like(excess)
        d = excess - target
        assert abs(d.mean()) < 3 * d.std(ddof=1) / math.sqrt(d.size)


def test_rebase_shifts_logs():
    b = simulate(M, S.gamma, S.T, SimConfig(n_paths=100, seed=3, n_steps=10), 0.0, 1.0, M.v0)
    r = b.rebase(80.0)
    np.testing.assert_allclose(r.terminal_logs, b.terminal_logs + math.log(80.0), rtol=0, atol=1e-14)
    np.testing.assert_array_equal(r.terminal_variances, b.terminal_variances)


def test_csv_dump(tmp_path):
    b = simulate(M, S.gamma, S.T, SimConfig(n_paths=10, seed=3, n_steps=10), 0.0, 100.0, M.v0)
    path = tmp_path / "paths.csv"
    b.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "Z_T,v_T" and len(lines) == 11
    assert float(lines[1].split(",")[0]) == b.terminal_logs[0]


def test_rejects_bad_state():
    with pytest.raises(ValidationError):
        simulate(M, S.gamma, S.T, SimConfig(n_paths=10), 3.0, 100.0, M.v0)
    with pytest.raises(ValidationError):
        simulate(M, S.gamma, S.T, SimConfig(n_paths=10), 0.0, -1.0, M.v0)
