import pytest

from varheston.model import MarketModel, ProblemSpec
from varheston.scenario import Scenario
from varheston.solver import solve_nls0

BASE_MARKET = MarketModel(r=0.03, lambda_bar=1.0, kappa=3.6129, theta=0.0291, sigma=0.3, rho=-0.4, v0=0.03)
BASE_SPEC = ProblemSpec(gamma=-2.0, T=3.0, x0=100.0, K=100.0, epsilon=0.01)


@pytest.fixture(scope="session")
def base_scenario():
    return Scenario.load("base")


@pytest.fixture(scope="session")
def base_pricer(base_scenario):
    pricer = base_scenario.pricer()
    pricer.prefetch(0.0)
    return pricer


@pytest.fixture(scope="session")
def base_solution(base_pricer, base_scenario):
    return solve_nls0(base_pricer, base_scenario.problem, base_scenario.numerics.solver_config())


@pytest.fixture(scope="session")
def base_q_batch():
    """A million risk-neutral paths of the base case from y = 1 (rebase to any start value)."""
    from varheston.charfn import Measure
    from varheston.mc import SimConfig, simulate
    return simulate(BASE_MARKET, BASE_SPEC.gamma, BASE_SPEC.T,
                    SimConfig(n_paths=1_000_000, seed=20240101, measure=Measure.Q), 0.0, 1.0, BASE_MARKET.v0)


_SOLVES = {}


def solve_point(axis=None, value=None, scenario="base"):
    """Cached NLS0 solve of a bundled scenario, optionally moved along one sweep axis."""
    from varheston.scenario import SweepSpec
    key = (scenario, axis, value)
    if key not in _SOLVES:
        sc = Scenario.load(scenario)
        if axis is not None:
            sc = SweepSpec(axis, (value,)).apply(sc, value)
        _SOLVES[key] = solve_nls0(sc.pricer(), sc.problem, sc.numerics.solver_config())
    return _SOLVES[key]


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        ok, line = results[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {line}")
