"""Fourier prices and Greeks of the synthetic derivative on the optimal unconstrained wealth.

The derivative pays

    D(y) = y + (K - y)^+ - (k_v - y)^+ - (K - k_v) 1{y < k_eps},

i.e. the unconstrained wealth, a long put at K, a short put at k_v and
(K - k_v) short digital puts at k_eps.  Each leg is priced with a dampened
Fourier integral over the cached coefficient tables; delta and vega follow by
differentiating the integrand (d phi / dy = i u phi / y, d phi / dv = B phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .charfn import CharacteristicFunction, FrequencyGrid, Measure
from .model import MarketModel, ValidationError

TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class Dampening:
    alpha_put: float = 2.0
    alpha_digital: float = 0.5

    def __post_init__(self):
        if not self.alpha_put > 1.0:
            raise ValidationError("alpha_put", f"put dampening must exceed 1, got {self.alpha_put}")
        if not self.alpha_digital > 0.0:
            raise ValidationError("alpha_digital", f"digital dampening must be positive, got {self.alpha_digital}")


@dataclass(frozen=True)
class DerivativeParams:
    """Start value y of the unconstrained wealth and the strikes of the derivative."""

    y: float
    k_v: float
    k_eps: float
    K: float

    def __post_init__(self):
        if not self.y > 0:
            raise ValidationError("y", f"underlying start value must be positive, got {self.y}")
        if not 0.0 <= self.k_v <= self.k_eps <= self.K:
            raise ValidationError(
                "strike_order", f"need 0 <= k_v <= k_eps <= K, got {self.k_v}, {self.k_eps}, {self.K}")

    @property
    def is_identity(self) -> bool:
        return self.k_v == self.K


@dataclass(frozen=True)
class MarketState:
    """Realised calendar time, constrained wealth and variance."""

    t: float
    x: float
    v: float

    def __post_init__(self):
        if self.t < 0:
            raise ValidationError("t", f"time must be non-negative, got {self.t}")
        if not self.x > 0:
            raise ValidationError("x", f"wealth must be positive, got {self.x}")
        if not self.v > 0:
            raise ValidationError("v", f"variance must be positive, got {self.v}")


def payoff_D(yT, p: DerivativeParams):
    """Indicator form of the terminal payoff."""
    yT = np.asarray(yT, dtype=float)
    band = (p.k_eps <= yT) & (yT <= p.K)
    low = (p.k_v <= yT) & (yT < p.k_eps)
    out = yT + (p.K - yT) * band - (yT - p.k_v) * low
    return float(out) if out.ndim == 0 else out


def payoff_D_legs(yT, p: DerivativeParams):
    """Put/put/digital decomposition of the same payoff."""
    yT = np.asarray(yT, dtype=float)
    out = (yT + np.maximum(p.K - yT, 0.0) - np.maximum(p.k_v - yT, 0.0)
           - (p.K - p.k_v) * (yT < p.k_eps))
    return float(out) if out.ndim == 0 else out


class FourierPricer:
    """Prices on Y* for a fixed market, preference and horizon.

    Args:
        model: real-world market.
        gamma: utility curvature.
        T: horizon.
        grid: frequency grid shared by all integrals.
        damp: dampening exponents for put and digital legs.
        ode_steps: RK4 steps over [0, T].
        lambda_v: constant variance risk premium, None for the time-dependent one.
        tail_tol: tail tolerance forwarded to the characteristic function.
    """

    def __init__(self, model: MarketModel, gamma: float, T: float, *, grid: FrequencyGrid | None = None,
                 damp: Dampening | None = None, ode_steps: int = 10_000, lambda_v: float | None = None,
                 tail_tol: float = 1e-8):
        self.model = model
        self.gamma = gamma
        self.T = T
        self.damp = damp or Dampening()
        self.cf = CharacteristicFunction(model, gamma, T, grid or FrequencyGrid(), ode_steps, lambda_v, tail_tol)

    @property
    def grid(self) -> FrequencyGrid:
        return self.cf.grid

    def prefetch(self, t: float) -> None:
        """Integrate every table a solve at time t touches, sharing one sweep per measure."""
        tau = self.cf.tau(t)
        a = self.damp
        self.cf.tables(Measure.Q, tau, [a.alpha_put - 1.0, a.alpha_digital, 0.0])
        self.cf.tables(Measure.P, tau, [a.alpha_digital, 0.0])

    # single legs -------------------------------------------------------------

    def _leg(self, kind: str, strike: float, t: float, y: float, v: float, measure: Measure,
             alpha: float | None = None):
        """Return (price, d/dy, d/dv) of one put or digital leg."""
        if strike <= TINY:
            return 0.0, 0.0, 0.0
        tau = self.cf.tau(t)
        if tau == 0:
            raise ValidationError("t", "Fourier legs need t < T")
        if kind == "put":
            alpha = self.damp.alpha_put if alpha is None else alpha
            if not alpha > 1:
                raise ValidationError("alpha_put", f"put dampening must exceed 1, got {alpha}")
            shift = alpha - 1.0
        else:
            alpha = self.damp.alpha_digital if alpha is None else alpha
            if not alpha > 0:
                raise ValidationError("alpha_digital", f"digital dampening must be positive, got {alpha}")
            shift = alpha
        table = self.cf.table(measure, tau, shift)
        self.cf.check_tail(table, v)
        u = self.grid.u
        k = math.log(strike)
        disc = math.exp(-self.model.r * tau) if measure is Measure.Q else 1.0
        if kind == "put":
            denom = alpha * alpha - alpha - u * u + 1j * u * (1.0 - 2.0 * alpha)
        else:
            denom = alpha - 1j * u
        integrand = disc * np.exp(-1j * u * k) * table.phi(math.log(y), v) / denom
        pref = math.exp(alpha * k) / math.pi
        w = self.grid.weights
        price = pref * np.dot(w, integrand.real)
        delta = pref * np.dot(w, (integrand * (1j * table.u / y)).real)
        vega = pref * np.dot(w, (integrand * table.B).real)
        return price, delta, vega

    def put_price(self, strike: float, t: float, y: float, v: float, alpha: float | None = None) -> float:
        return self._leg("put", strike, t, y, v, Measure.Q, alpha)[0]

    def put_greeks(self, strike: float, t: float, y: float, v: float) -> tuple[float, float, float]:
        return self._leg("put", strike, t, y, v, Measure.Q)

    def digital_put_price(self, strike: float, t: float, y: float, v: float,
                          measure: Measure = Measure.Q, alpha: float | None = None) -> float:
        """Discounted Q-price of 1{Y*(T) < strike}, or the plain P-probability for measure P."""
        return self._leg("digital", strike, t, y, v, Measure(measure), alpha)[0]

    def digital_greeks(self, strike: float, t: float, y: float, v: float,
                       measure: Measure = Measure.Q) -> tuple[float, float, float]:
        return self._leg("digital", strike, t, y, v, Measure(measure))

    # aggregates --------------------------------------------------------------

    def aggregate(self, p: DerivativeParams, t: float, v: float) -> tuple[float, float, float]:
        """(price, delta, vega) of the whole derivative."""
        pk = np.array(self.put_greeks(p.K, t, p.y, v))
        pv = np.array(self.put_greeks(p.k_v, t, p.y, v))
        dg = np.array(self.digital_greeks(p.k_eps, t, p.y, v))
        out = np.array([p.y, 1.0, 0.0]) + pk - pv - (p.K - p.k_v) * dg
        return float(out[0]), float(out[1]), float(out[2])

    def h_B(self, p: DerivativeParams, t: float, v: float) -> float:
        return self.aggregate(p, t, v)[0]

    def h_delta(self, p: DerivativeParams, t: float, v: float) -> float:
        return self.aggregate(p, t, v)[1]

    def h_VN(self, p: DerivativeParams, t: float, v: float) -> float:
        return self.aggregate(p, t, v)[2]

    def h_VaR(self, p: DerivativeParams, t: float, v: float) -> float:
        """P(Y*(T) < k_eps | Y*(t) = y, v(t) = v)."""
        return self.digital_put_price(p.k_eps, t, p.y, v, Measure.P)
