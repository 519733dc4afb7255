"""Solve for the synthetic-derivative parameters and the constrained strategy.

At t = 0 the unknowns (y, k_v, k_eps) satisfy budget, vega neutrality and the
VaR equation; at t > 0 the VaR equation is replaced by consistency with the
Lagrange multiplier fixed at t = 0.  Unknowns are searched as
(y / x, k_v / k_eps, k_eps / K) so that 0 <= k_v <= k_eps <= K is a plain box.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, least_squares

from .charfn import Measure
from .model import AffineClosedForm, ProblemSpec, ValidationError, unconstrained_strategy
from .pricing import DerivativeParams, FourierPricer, MarketState

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, params: DerivativeParams | None = None, residuals=None,
                 iterations: int = 0):
        super().__init__(message)
        self.params = params
        self.residuals = residuals
        self.iterations = iterations


class InfeasibleError(ConvergenceError):
    """Best iterate sits on the boundary of the admissible box with a large residual."""


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances; budget and vega are relative to the wealth being matched."""

    tol_budget: float = 1e-4
    tol_vega: float = 1e-4
    tol_prob: float = 1e-5
    tol_lagrange: float = 1e-5
    max_iter: int = 200

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValidationError("max_iter", "need at least one iteration")
        for name in ("tol_budget", "tol_vega", "tol_prob", "tol_lagrange"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, "tolerance must be positive")


@dataclass
class SolveResult:
    t: float
    params: DerivativeParams
    lambda_eps: float
    pi_u: float
    pi_c: float
    residuals: tuple[float, float, float]
    binding: bool
    iterations: int
    eps_u: float | None = None
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ThirdEquationInputs:
    a: float
    b: float
    f_P: float
    f_Q: float
    K: float
    k_v: float
    y: float
    gamma: float
    r: float
    tau: float
    v: float


DENSITY_FLOOR = 1e-12


def lagrange_multiplier(q: ThirdEquationInputs) -> float:
    """Multiplier implied by the density ratio at ln k_eps; zero when k_v = K."""
    if not q.f_P > DENSITY_FLOOR:
        raise ValidationError("f_P", f"real-world density {q.f_P:.3g} is below the floor {DENSITY_FLOOR:g}")
    lead = q.y ** (q.gamma - 1.0) * math.exp(q.a + q.b * q.v - q.r * q.tau) * (q.K - q.k_v) * q.f_Q / q.f_P
    return lead - (q.K**q.gamma - q.k_v**q.gamma) / q.gamma


def third_equation(pricer: FourierPricer, spec: ProblemSpec, p: DerivativeParams, t: float, v: float) -> float:
    if p.k_v == p.K:
        return 0.0
    tau = pricer.cf.tau(t)
    closed = AffineClosedForm.from_model(pricer.model, pricer.gamma)
    z = math.log(p.k_eps)
    inputs = ThirdEquationInputs(
        a=float(closed.a(tau)), b=float(closed.b(tau)),
        f_P=pricer.cf.density(Measure.P, z, t, p.y, v), f_Q=pricer.cf.density(Measure.Q, z, t, p.y, v),
        K=spec.K, k_v=p.k_v, y=p.y, gamma=spec.gamma, r=pricer.model.r, tau=tau, v=v)
    return lagrange_multiplier(inputs)


def _params(theta, x: float, K: float) -> DerivativeParams:
    y, s, e = (float(c) for c in theta)
    k_eps = min(max(e, 0.0), 1.0) * K
    k_v = min(max(s, 0.0), 1.0) * k_eps
    return DerivativeParams(y * x, k_v, k_eps, K)


def _theta(p: DerivativeParams, x: float) -> np.ndarray:
    s = p.k_v / p.k_eps if p.k_eps > 0 else 0.0
    return np.array([p.y / x, s, p.k_eps / p.K])


def identity_params(x: float, K: float) -> DerivativeParams:
    return DerivativeParams(x, K, K, K)


def check_binding(pricer: FourierPricer, spec: ProblemSpec) -> tuple[bool, float]:
    """Probability eps_u that the unconstrained optimum ends below K, and whether it exceeds epsilon."""
    eps_u = pricer.digital_put_price(spec.K, 0.0, spec.x0, pricer.model.v0, Measure.P)
    return eps_u > spec.epsilon, float(eps_u)


def var_quantile(pricer: FourierPricer, level: float, t: float, y: float, v: float, upper: float) -> float:
    """Strike k with P(Y*(T) < k) = level, searched on (0, upper]."""
    f = lambda k: pricer.digital_put_price(k, t, y, v, Measure.P) - level
    lo = upper * 1e-6
    if f(upper) <= 0:
        return upper
    if f(lo) >= 0:
        return lo
    return brentq(f, lo, upper, xtol=1e-10 * upper)


def constrained_strategy(pricer: FourierPricer, result: SolveResult, state: MarketState) -> float:
    """pi_c = pi_u * y * D_y / D at the solved parameters."""
    pi_u = unconstrained_strategy(state.t, pricer.model, pricer.gamma, pricer.T)
    if result.params.is_identity:
        return pi_u
    price, delta, _ = pricer.aggregate(result.params, state.t, state.v)
    return pi_u * result.params.y * delta / price


def _finish(pricer, spec, *, t, v, x, p, resid, binding, iterations, lam, eps_u=None, **extra) -> SolveResult:
    res = SolveResult(t, p, lam, unconstrained_strategy(t, pricer.model, pricer.gamma, pricer.T), 0.0,
                      tuple(float(r) for r in resid), binding, iterations, eps_u, extra)
    res.pi_c = constrained_strategy(pricer, res, MarketState(t, x, v))
    return res


def _least_squares(fun, theta0, config: SolverConfig, scale):
    lb = np.array([1e-8, 0.0, 1e-8])
    ub = np.array([np.inf, 1.0, 1.0])
    theta0 = np.clip(theta0, lb, np.where(np.isfinite(ub), ub, theta0))
    sol = least_squares(lambda th: fun(th) / scale, theta0, bounds=(lb, ub), method="trf",
                        xtol=1e-13, ftol=1e-13, gtol=1e-13, max_nfev=config.max_iter)
    on_edge = bool(np.any(np.isclose(sol.x, lb, atol=1e-9)) or np.any(np.isclose(sol.x[1:], 1.0, atol=1e-9)))
    return sol, on_edge


def _check(resid, limits, p, iterations, on_edge, what):
    if all(abs(r) < lim for r, lim in zip(resid, limits)):
        return
    cls = InfeasibleError if on_edge else ConvergenceError
    raise cls(f"{what} did not converge: residuals {tuple(float(r) for r in resid)} exceed {limits}",
              p, tuple(resid), iterations)


def nls0_residuals(pricer: FourierPricer, spec: ProblemSpec, p: DerivativeParams) -> np.ndarray:
    v0 = pricer.model.v0
    price, _, vega = pricer.aggregate(p, 0.0, v0)
    return np.array([price - spec.x0, vega, pricer.h_VaR(p, 0.0, v0) - spec.epsilon])


def initial_guess(pricer: FourierPricer, spec: ProblemSpec) -> DerivativeParams:
    k_eps = var_quantile(pricer, spec.epsilon, 0.0, spec.x0, pricer.model.v0, spec.K)
    return DerivativeParams(spec.x0, 0.8 * k_eps, k_eps, spec.K)


def solve_nls0(pricer: FourierPricer, spec: ProblemSpec, config: SolverConfig | None = None,
               guess: DerivativeParams | None = None) -> SolveResult:
    """Solve the t = 0 system and report the multiplier and both strategies.

    A non-binding constraint short-circuits to the identity payoff.

    Raises:
        ConvergenceError: residuals above tolerance after ``max_iter`` evaluations.
        InfeasibleError: as above with the best iterate pinned to the box boundary.
    """
    config = config or SolverConfig()
    v0 = pricer.model.v0
    pricer.prefetch(0.0)
    binding, eps_u = check_binding(pricer, spec)
    if not binding:
        p = identity_params(spec.x0, spec.K)
        return _finish(pricer, spec, t=0.0, v=v0, x=spec.x0, p=p,
                       resid=(pricer.h_B(p, 0.0, v0) - spec.x0, 0.0, 0.0),
                       binding=False, iterations=0, lam=0.0, eps_u=eps_u)

    guess = guess or initial_guess(pricer, spec)
    fun = lambda th: nls0_residuals(pricer, spec, _params(th, spec.x0, spec.K))
    scale = np.array([spec.x0, spec.x0, 1.0])
    sol, on_edge = _least_squares(fun, _theta(guess, spec.x0), config, scale)
    p = _params(sol.x, spec.x0, spec.K)
    resid = nls0_residuals(pricer, spec, p)
    _check(resid, (config.tol_budget * spec.x0, config.tol_vega * spec.x0, config.tol_prob),
           p, sol.nfev, on_edge, "NLS0")
    lam = third_equation(pricer, spec, p, 0.0, v0)
    if lam < 0:
        # the density ratio pins lam to U'(k_eps)(K - k_v) - (U(K) - U(k_v)), which can be negative
        log.info("negative Lagrange multiplier %.3g at the NLS0 root", lam)
    return _finish(pricer, spec, t=0.0, v=v0, x=spec.x0, p=p, resid=resid, binding=True,
                   iterations=int(sol.nfev), lam=lam, eps_u=eps_u)


def lagrange_scale(spec: ProblemSpec, lambda_eps_star: float) -> float:
    return max(abs(lambda_eps_star), spec.K**spec.gamma / abs(spec.gamma))


def solve_nls_t(pricer: FourierPricer, spec: ProblemSpec, state: MarketState, lambda_eps_star: float,
                config: SolverConfig | None = None, guess: DerivativeParams | None = None) -> SolveResult:
    """Solve the t > 0 system for the realised wealth and variance in ``state``.

    ``guess`` warm-starts the search, typically from the previous time point.
    """
    config = config or SolverConfig()
    t, x, v = state.t, state.x, state.v
    if not 0.0 < t < spec.T:
        raise ValidationError("t", f"NLS needs 0 < t < T, got {t}")
    if lambda_eps_star == 0:
        p = identity_params(x, spec.K)
        return _finish(pricer, spec, t=t, v=v, x=x, p=p, resid=(pricer.h_B(p, t, v) - x, 0.0, 0.0),
                       binding=False, iterations=0, lam=0.0)
    pricer.prefetch(t)

    def resid_of(p):
        price, _, vega = pricer.aggregate(p, t, v)
        return np.array([price - x, vega, third_equation(pricer, spec, p, t, v) - lambda_eps_star])

    if guess is None:
        k_eps = var_quantile(pricer, spec.epsilon, t, x, v, spec.K)
        guess = DerivativeParams(x, 0.8 * k_eps, k_eps, spec.K)
    ls = lagrange_scale(spec, lambda_eps_star)
    fun = lambda th: resid_of(_params(th, x, spec.K))
    sol, on_edge = _least_squares(fun, _theta(guess, x), config, np.array([x, x, ls]))
    p = _params(sol.x, x, spec.K)
    resid = resid_of(p)
    _check(resid, (config.tol_budget * x, config.tol_vega * x, config.tol_lagrange * ls),
           p, sol.nfev, on_edge, "NLS")
    return _finish(pricer, spec, t=t, v=v, x=x, p=p, resid=resid, binding=True,
                   iterations=int(sol.nfev), lam=lambda_eps_star)


def newton_nls0(pricer: FourierPricer, spec: ProblemSpec, guess: DerivativeParams,
                max_iter: int = 100, tol: float = 1e-12, fd_step: float = 1e-6) -> DerivativeParams:
    """Damped Newton on the scaled t = 0 system with a forward-difference Jacobian.

    Independent of the least-squares path; used to cross-check its root.
    """
    scale = np.array([spec.x0, spec.x0, 1.0])
    lb, ub = np.array([1e-8, 0.0, 1e-8]), np.array([np.inf, 1.0, 1.0])

    def F(th):
        return nls0_residuals(pricer, spec, _params(th, spec.x0, spec.K)) / scale

    th = _theta(guess, spec.x0)
    f = F(th)
    for _ in range(max_iter):
        if np.linalg.norm(f) < tol:
            break
        J = np.empty((3, 3))
        for j in range(3):
            dth = th.copy()
            hj = fd_step * max(1.0, abs(th[j]))
            dth[j] = th[j] + hj if th[j] + hj <= ub[j] else th[j] - hj
            J[:, j] = (F(dth) - f) / (dth[j] - th[j])
        step = np.linalg.solve(J, -f)
        lam = 1.0
        while lam > 1e-6:
            cand = np.clip(th + lam * step, lb, ub)
            fc = F(cand)
            if np.linalg.norm(fc) < (1.0 - 1e-4 * lam) * np.linalg.norm(f):
                break
            lam *= 0.5
        th, f = cand, fc
    else:
        raise ConvergenceError("damped Newton did not converge", _params(th, spec.x0, spec.K), tuple(f * scale))
    return _params(th, spec.x0, spec.K)


def alternative_roots(pricer: FourierPricer, spec: ProblemSpec, result: SolveResult,
                      starts=((0.5, 0.5), (0.9, 0.2), (0.3, 0.9)), config: SolverConfig | None = None,
                      distinct: float = 1e-2) -> list[DerivativeParams]:
    """Multi-start diagnostic: converged NLS0 roots that differ from ``result``.

    Each start is (k_v / k_eps, k_eps / K) with y = x0.  Roots are reported, never
    substituted for ``result``.
    """
    config = config or SolverConfig()
    fun = lambda th: nls0_residuals(pricer, spec, _params(th, spec.x0, spec.K))
    scale = np.array([spec.x0, spec.x0, 1.0])
    base = np.array([result.params.y, result.params.k_v, result.params.k_eps])
    found = []
    for s, e in starts:
        sol, _ = _least_squares(fun, np.array([1.0, s, e]), config, scale)
        p = _params(sol.x, spec.x0, spec.K)
        r = nls0_residuals(pricer, spec, p)
        if abs(r[0]) < config.tol_budget * spec.x0 and abs(r[1]) < config.tol_vega * spec.x0 \
                and abs(r[2]) < config.tol_prob:
            cand = np.array([p.y, p.k_v, p.k_eps])
            if np.max(np.abs(cand - base)) > distinct * spec.K and \
                    all(np.max(np.abs(cand - np.array([q.y, q.k_v, q.k_eps]))) > distinct * spec.K for q in found):
                found.append(p)
    if found:
        log.warning("multi-start found %d further NLS0 root(s)", len(found))
    return found
