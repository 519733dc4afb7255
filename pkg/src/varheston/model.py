"""Market and preference parameters plus closed forms of the unconstrained problem.

Time conventions: functions taking ``tau`` use time to maturity; functions
taking ``t`` use calendar time on ``[0, T]`` and convert via ``tau = T - t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ValidationError(ValueError):
    """Raised when parameters violate a model invariant.

    The ``invariant`` attribute names the violated condition so callers (the
    CLI in particular) can report it verbatim.
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


@dataclass(frozen=True)
class MarketModel:
    """Heston market under the real-world measure.

    Attributes:
        r: risk-free rate per year.
        lambda_bar: market price of risk on the stock (dimensionless).
        kappa: mean-reversion speed of the variance.
        theta: long-run variance.
        sigma: volatility of variance.
        rho: correlation between the stock and variance drivers.
        v0: initial variance.
    """

    r: float
    lambda_bar: float
    kappa: float
    theta: float
    sigma: float
    rho: float
    v0: float

    def __post_init__(self):
        for name in ("r", "lambda_bar", "kappa", "theta", "sigma", "rho", "v0"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(name, "must be finite")
        if self.kappa <= 0:
            raise ValidationError("kappa", f"mean reversion must be positive, got {self.kappa}")
        if self.theta <= 0:
            raise ValidationError("theta", f"long-run variance must be positive, got {self.theta}")
        if self.sigma <= 0:
            raise ValidationError("sigma", f"vol-of-variance must be positive, got {self.sigma}")
        if self.v0 <= 0:
            raise ValidationError("v0", f"initial variance must be positive, got {self.v0}")
        if self.lambda_bar <= 0:
            raise ValidationError("lambda_bar", f"market price of risk must be positive, got {self.lambda_bar}")
        if not -1.0 <= self.rho <= 1.0:
            raise ValidationError("rho", f"correlation must lie in [-1, 1], got {self.rho}")
        if not self.kappa * self.theta > 0.5 * self.sigma**2:
            raise ValidationError(
                "feller",
                f"kappa*theta={self.kappa * self.theta:.6g} must exceed sigma^2/2={0.5 * self.sigma**2:.6g}",
            )

    @property
    def rho_bar(self) -> float:
        """sqrt(1 - rho^2), the loading of variance on the orthogonal driver."""
        return math.sqrt(max(0.0, 1.0 - self.rho**2))


@dataclass(frozen=True)
class ProblemSpec:
    """Power-utility preferences and the terminal VaR constraint P(X(T) < K) <= epsilon."""

    gamma: float
    T: float
    x0: float
    K: float
    epsilon: float

    def __post_init__(self):
        if not math.isfinite(self.gamma) or self.gamma == 0.0 or self.gamma >= 1.0:
            raise ValidationError("gamma", f"utility curvature must lie in (-inf,0) U (0,1), got {self.gamma}")
        if not self.T > 0:
            raise ValidationError("T", f"horizon must be positive, got {self.T}")
        if not self.x0 > 0:
            raise ValidationError("x0", f"initial wealth must be positive, got {self.x0}")
        if not self.K > 0:
            raise ValidationError("K", f"VaR floor must be positive, got {self.K}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValidationError("epsilon", f"VaR probability must lie in (0, 1), got {self.epsilon}")

    @property
    def rra(self) -> float:
        return 1.0 - self.gamma


def kraft_sides(m: MarketModel, gamma: float) -> tuple[float, float]:
    """Left- and right-hand sides of the well-posedness inequality."""
    lhs = gamma / (1.0 - gamma) * m.lambda_bar * (m.kappa * m.rho / m.sigma + 0.5 * m.lambda_bar)
    rhs = m.kappa**2 / (2.0 * m.sigma**2)
    return lhs, rhs


def check_kraft_condition(m: MarketModel, gamma: float) -> bool:
    lhs, rhs = kraft_sides(m, gamma)
    return lhs < rhs


@dataclass(frozen=True)
class AffineClosedForm:
    """Constants and closed-form solutions a(tau), b(tau) of the value-function Riccati system.

    b solves b' = k2 b^2 / 2 - k1 b + k0 / 2 and a solves a' = kappa theta b + gamma r,
    both with zero initial value at tau = 0.
    """

    k0: float
    k1: float
    k2: float
    k3: float
    kappa_theta: float
    gamma_r: float

    @classmethod
    def from_model(cls, m: MarketModel, gamma: float) -> "AffineClosedForm":
        g = gamma / (1.0 - gamma)
        k0 = g * m.lambda_bar**2
        k1 = m.kappa - g * m.lambda_bar * m.sigma * m.rho
        k2 = m.sigma**2 + g * m.sigma**2 * m.rho**2
        disc = k1**2 - k0 * k2
        if not disc > 0:
            raise ValidationError("kraft", f"k1^2 - k0*k2 = {disc:.6g} must be positive for gamma={gamma}")
        return cls(k0, k1, k2, math.sqrt(disc), m.kappa * m.theta, gamma * m.r)

    def b(self, tau):
        # divided through by e^{k3 tau} so large horizons do not overflow
        tau = np.asarray(tau, dtype=float)
        em = np.exp(-self.k3 * tau)
        return self.k0 * -np.expm1(-self.k3 * tau) / (self.k1 + self.k3 - (self.k1 - self.k3) * em)

    def a(self, tau):
        tau = np.asarray(tau, dtype=float)
        k1, k3 = self.k1, self.k3
        # log(2 k3 e^{(k1+k3) tau/2} / (2 k3 + (k1+k3)(e^{k3 tau} - 1))) written to avoid overflow
        log_num = math.log(2.0 * k3) + 0.5 * (k1 + k3) * tau
        log_den = k3 * tau + np.log(k1 + k3 + (k3 - k1) * np.exp(-k3 * tau))
        return self.gamma_r * tau + 2.0 * self.kappa_theta / self.k2 * (log_num - log_den)

    def b_limit(self) -> float:
        """Stationary root approached by b as tau grows."""
        return self.k0 / (self.k1 + self.k3)


def _as_float(x):
    return float(x) if np.ndim(x) == 0 else x


def affine_b(tau, m: MarketModel, gamma: float):
    return _as_float(AffineClosedForm.from_model(m, gamma).b(tau))


def affine_a(tau, m: MarketModel, gamma: float):
    return _as_float(AffineClosedForm.from_model(m, gamma).a(tau))


def _check_time(t, T):
    if np.any(np.asarray(t) < 0) or np.any(np.asarray(t) > T):
        raise ValidationError("t", f"time must lie in [0, T={T}]")


def unconstrained_strategy(t, m: MarketModel, gamma: float, T: float):
    """Optimal unconstrained fraction of wealth in the stock at calendar time t.

    The strategy depends on time only, never on wealth or variance.
    """
    _check_time(t, T)
    b = affine_b(T - np.asarray(t, dtype=float), m, gamma)
    return _as_float(m.lambda_bar / (1.0 - gamma) + m.sigma * m.rho * b / (1.0 - gamma))


def pi_of_tau(tau, m: MarketModel, gamma: float, closed: AffineClosedForm | None = None):
    """Unconstrained strategy expressed in time to maturity."""
    closed = closed or AffineClosedForm.from_model(m, gamma)
    return m.lambda_bar / (1.0 - gamma) + m.sigma * m.rho * closed.b(tau) / (1.0 - gamma)


def variance_shadow_price(t, m: MarketModel, gamma: float, T: float):
    """Time-dependent market price of variance risk -sigma sqrt(1 - rho^2) b."""
    _check_time(t, T)
    b = affine_b(T - np.asarray(t, dtype=float), m, gamma)
    return _as_float(-m.sigma * m.rho_bar * b)


def kappa_tilde_of_tau(tau, m: MarketModel, gamma: float, lambda_v: float | None = None,
                       closed: AffineClosedForm | None = None):
    """Mean reversion under the pricing measure, as a function of time to maturity.

    ``lambda_v=None`` selects the time-dependent shadow price; a number selects
    the constant-lambda^v mode.
    """
    if lambda_v is None:
        closed = closed or AffineClosedForm.from_model(m, gamma)
        lv = -m.sigma * m.rho_bar * closed.b(tau)
    else:
        lv = lambda_v
    return m.kappa + m.sigma * m.lambda_bar * m.rho + m.sigma * lv * m.rho_bar


def q_measure_params(t, m: MarketModel, gamma: float, T: float, lambda_v: float | None = None):
    """Return (kappa_tilde, theta_tilde) at calendar time t.

    Raises:
        ValidationError: if kappa_tilde is not positive.
    """
    _check_time(t, T)
    kt = kappa_tilde_of_tau(T - np.asarray(t, dtype=float), m, gamma, lambda_v)
    if np.any(np.asarray(kt) <= 0):
        raise ValidationError("kappa_tilde", f"pricing-measure mean reversion must be positive, got {kt}")
    return _as_float(kt), _as_float(m.kappa * m.theta / kt)
