"""Characteristic functions of the log optimal unconstrained wealth Z* = ln Y*(T).

Both measures share the affine form phi(u) = exp(A(tau, u) + B(tau, u) v + i u ln y),
where (A, B) solve complex Riccati ODEs with time-dependent coefficients. These
are integrated with fixed-step classical RK4, vectorised over the frequency grid.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .model import AffineClosedForm, MarketModel, ValidationError, kappa_tilde_of_tau, pi_of_tau

log = logging.getLogger(__name__)


class Measure(str, enum.Enum):
    P = "P"
    Q = "Q"


class RiccatiBlowUp(FloatingPointError):
    def __init__(self, u, tau):
        super().__init__(f"Riccati solution became non-finite at u={u!r}, tau={tau:.6g}")
        self.u = u
        self.tau = tau


class QuadratureError(RuntimeError):
    """The truncated Fourier integral does not capture the characteristic function's tail."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid on [0, u_max] with trapezoid weights."""

    n: int = 4096
    u_max: float = 200.0

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("n_u", f"frequency grid needs at least 2 points, got {self.n}")
        if not self.u_max > 0:
            raise ValidationError("u_max", f"truncation bound must be positive, got {self.u_max}")

    @cached_property
    def u(self) -> np.ndarray:
        return np.linspace(0.0, self.u_max, self.n)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.u_max / (self.n - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return w


@dataclass(frozen=True)
class AffineCoeffTable:
    """Tabulated (A, B) at horizon ``horizon`` for frequencies ``u`` (possibly shifted)."""

    measure: Measure
    horizon: float
    u: np.ndarray
    A: np.ndarray
    B: np.ndarray
    ode_step: float

    def affine_part(self, v: float) -> np.ndarray:
        return np.exp(self.A + self.B * v)

    def phi(self, ln_y: float, v: float) -> np.ndarray:
        return np.exp(self.A + self.B * v + 1j * self.u * ln_y)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u_re", "u_im", "A_re", "A_im", "B_re", "B_im"])
            for u, a, b in zip(self.u, self.A, self.B):
                w.writerow([repr(u.real), repr(u.imag), repr(a.real), repr(a.imag), repr(b.real), repr(b.imag)])


def _n_steps(tau: float, step: float) -> int:
    return max(1, int(math.ceil(tau / step - 1e-9)))


def integrate_riccati(measure: Measure, u, tau: float, m: MarketModel, gamma: float, step: float,
                      lambda_v: float | None = None):
    """Integrate the (A, B) Riccati system from 0 to ``tau`` with fixed-step RK4.

    Args:
        measure: which system to integrate; P carries the extra drift term
            pi lambda_bar i u, Q uses the pricing-measure mean reversion.
        u: complex frequency or array of frequencies.
        tau: time to maturity.
        step: target step size; the actual step is tau / ceil(tau / step).
        lambda_v: constant market price of variance risk for Q, or None for the
            time-dependent shadow price.

    Returns:
        (A, B) arrays shaped like ``u``.
    """
    measure = Measure(measure)
    u = np.asarray(u, dtype=complex)
    shape = u.shape
    u = u.ravel()
    if tau < 0 or not step > 0:
        raise ValidationError("tau", f"need tau >= 0 and step > 0, got tau={tau}, step={step}")
    A = np.zeros_like(u)
    B = np.zeros_like(u)
    if tau == 0:
        return A.reshape(shape), B.reshape(shape)

    n = _n_steps(tau, step)
    h = tau / n
    closed = AffineClosedForm.from_model(m, gamma)
    nodes = 0.5 * h * np.arange(2 * n + 1)
    pis = pi_of_tau(nodes, m, gamma, closed)
    if measure is Measure.P:
        kaps = np.full_like(nodes, m.kappa)
    else:
        kaps = np.broadcast_to(kappa_tilde_of_tau(nodes, m, gamma, lambda_v, closed), nodes.shape)
        if np.any(kaps <= 0):
            raise ValidationError("kappa_tilde", "pricing-measure mean reversion must stay positive")

    iu = 1j * u
    u2_iu = u * u + iu
    sr_iu = m.sigma * m.rho * iu
    lam_iu = m.lambda_bar * iu if measure is Measure.P else None
    half_s2 = 0.5 * m.sigma**2
    kth = m.kappa * m.theta  # kappa_tilde * theta_tilde equals kappa * theta
    riu_h = m.r * iu * h
    c = h / 6.0

    def rhs(j, b):
        p = pis[j]
        drift = p * sr_iu - kaps[j]
        forcing = -0.5 * p * p * u2_iu
        if lam_iu is not None:
            forcing = forcing + p * lam_iu
        return (drift + half_s2 * b) * b + forcing

    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n):
            j = 2 * i
            k1 = rhs(j, B)
            b2 = B + 0.5 * h * k1
            k2 = rhs(j + 1, b2)
            b3 = B + 0.5 * h * k2
            k3 = rhs(j + 1, b3)
            b4 = B + h * k3
            k4 = rhs(j + 2, b4)
            A = A + riu_h + c * kth * (B + 2.0 * b2 + 2.0 * b3 + b4)
            B = B + c * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if (i & 255) == 255 or i == n - 1:
                bad = ~(np.isfinite(A) & np.isfinite(B))
                if bad.any():
                    raise RiccatiBlowUp(complex(u[np.argmax(bad)]), (i + 1) * h)
    return A.reshape(shape), B.reshape(shape)


@dataclass
class CharacteristicFunction:
    """Characteristic functions of Z*(T) under P and Q for one market and preference.

    Coefficient tables are integrated once per (measure, horizon, shift) and cached.

    Attributes:
        model: real-world market.
        gamma: utility curvature.
        T: investment horizon; calendar times are measured on [0, T].
        grid: frequency grid for inversion and pricing.
        ode_steps: RK4 steps over the full horizon (step size T / ode_steps).
        lambda_v: constant variance risk premium, or None for the time-dependent one.
        tail_tol: largest admissible |phi(u_max)| relative to |phi| at the grid start.
    """

    model: MarketModel
    gamma: float
    T: float
    grid: FrequencyGrid = field(default_factory=FrequencyGrid)
    ode_steps: int = 10_000
    lambda_v: float | None = None
    tail_tol: float = 1e-8
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.ode_steps < 1:
            raise ValidationError("ode_steps", f"need at least one ODE step, got {self.ode_steps}")
        # fail early on an ill-posed unconstrained problem
        AffineClosedForm.from_model(self.model, self.gamma)

    @property
    def ode_step(self) -> float:
        return self.T / self.ode_steps

    def tau(self, t: float) -> float:
        if not 0.0 <= t <= self.T:
            raise ValidationError("t", f"time must lie in [0, T={self.T}], got {t}")
        return self.T - t

    @staticmethod
    def _key(measure, tau, shift):
        return Measure(measure), round(float(tau), 12), float(shift)

    def tables(self, measure: Measure, tau: float, shifts) -> list[AffineCoeffTable]:
        """Tables for grid.u + i*shift, integrating all missing shifts in one sweep."""
        shifts = [float(s) for s in shifts]
        missing = [s for s in dict.fromkeys(shifts) if self._key(measure, tau, s) not in self._cache]
        if missing:
            u0 = self.grid.u
            u = np.concatenate([u0 + 1j * s for s in missing])
            A, B = integrate_riccati(measure, u, tau, self.model, self.gamma, self.ode_step, self.lambda_v)
            n = u0.size
            for i, s in enumerate(missing):
                sl = slice(i * n, (i + 1) * n)
                self._cache[self._key(measure, tau, s)] = AffineCoeffTable(
                    Measure(measure), float(tau), u[sl], A[sl], B[sl], self.ode_step)
        return [self._cache[self._key(measure, tau, s)] for s in shifts]

    def table(self, measure: Measure, tau: float, shift: float = 0.0) -> AffineCoeffTable:
        return self.tables(measure, tau, [shift])[0]

    def check_tail(self, table: AffineCoeffTable, v: float) -> None:
        mag = np.abs(table.affine_part(v))
        if not mag[0] > 0 or mag[-1] > self.tail_tol * mag[0]:
            raise QuadratureError(
                f"|phi| at u_max={self.grid.u_max} is {mag[-1] / mag[0]:.3g} of its value at the grid "
                f"start (tolerance {self.tail_tol:g}); increase u_max")

    def char_fn(self, measure: Measure, u, t: float, ln_y: float, v: float):
        """phi(u) = E[exp(i u Z*(T)) | ln Y*(t) = ln_y, v(t) = v], evaluated on the fly."""
        tau = self.tau(t)
        A, B = integrate_riccati(measure, u, tau, self.model, self.gamma, self.ode_step, self.lambda_v)
        out = np.exp(A + B * v + 1j * np.asarray(u, dtype=complex) * ln_y)
        return complex(out) if np.ndim(out) == 0 else out

    def density(self, measure: Measure, z, t: float, y: float, v: float, clamp: bool = True):
        """Density of Z*(T) at z given Y*(t) = y and v(t) = v, by Fourier inversion."""
        tau = self.tau(t)
        z_arr = np.atleast_1d(np.asarray(z, dtype=float))
        if tau == 0:
            raise ValidationError("t", "density is degenerate at t = T")
        table = self.table(measure, tau)
        self.check_tail(table, v)
        f = table.affine_part(v) * self.grid.weights
        u = self.grid.u
        out = np.empty(z_arr.size)
        flat = z_arr.ravel() - math.log(y)
        for lo in range(0, flat.size, 512):
            chunk = flat[lo:lo + 512]
            out[lo:lo + 512] = (np.exp(-1j * np.outer(chunk, u)) @ f).real / math.pi
        out = out.reshape(z_arr.shape)
        if clamp and out.min() < 0:
            log.debug("density ripple clamped, min value %.3g", out.min())
            out = np.maximum(out, 0.0)
        return float(out[0]) if np.ndim(z) == 0 else out

    def log_moments(self, measure: Measure, t: float, v: float, h: float = 1e-3) -> tuple[float, float]:
        """Mean and variance of Z*(T) - ln y from central differences of phi at u = 0."""
        ph = self.char_fn(measure, np.array([h, -h]), t, 0.0, v)
        mean = ((ph[0] - ph[1]) / (2j * h)).real
        second = -((ph[0] - 2.0 + ph[1]) / h**2).real
        return mean, second - mean**2
