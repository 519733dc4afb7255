"""Monte Carlo oracle for (Z*, v) under P or Q.

Variance: full-truncation Euler (negative part cut in drift and diffusion).
Log-wealth: log-Euler, exact in distribution given the variance at the step start.

Paths are generated in fixed-size blocks.  Block b draws from
``PCG64(SeedSequence(seed, spawn_key=(b,)))`` -- the same stream
``SeedSequence(seed).spawn(...)[b]`` would hand out -- so results do not depend
on how blocks are distributed over workers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .charfn import Measure
from .model import AffineClosedForm, MarketModel, ValidationError, kappa_tilde_of_tau, pi_of_tau

SCHEMES = ("full-truncation-euler",)


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings; ``n_steps=None`` means ``ceil(steps_per_year * tau)``."""

    n_paths: int = 100_000
    seed: int = 0
    measure: Measure = Measure.P
    n_steps: int | None = None
    steps_per_year: int = 500
    scheme: str = "full-truncation-euler"
    block_size: int = 1 << 16

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValidationError("n_paths", f"need at least one path, got {self.n_paths}")
        if self.n_steps is not None and self.n_steps < 1:
            raise ValidationError("n_steps", f"need at least one step, got {self.n_steps}")
        if self.steps_per_year < 1:
            raise ValidationError("steps_per_year", f"need at least one step per year, got {self.steps_per_year}")
        if self.scheme not in SCHEMES:
            raise ValidationError("scheme", f"unknown scheme {self.scheme!r}")
        if self.block_size < 1:
            raise ValidationError("block_size", "block size must be positive")
        object.__setattr__(self, "measure", Measure(self.measure))
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed", "seed must be a 64-bit unsigned integer")

    def steps_for(self, tau: float) -> int:
        return self.n_steps if self.n_steps is not None else max(1, math.ceil(self.steps_per_year * tau - 1e-9))


@dataclass
class PathBatch:
    """Terminal samples plus pathwise integrals of pi^2 v and pi lambda_bar v."""

    terminal_logs: np.ndarray
    terminal_variances: np.ndarray
    measure: Measure
    tau: float
    ln_y: float
    int_pi2_v: np.ndarray
    int_pilam_v: np.ndarray
    _stats: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return self.terminal_logs.size

    @property
    def terminal_wealth(self) -> np.ndarray:
        if "wealth" not in self._stats:
            self._stats["wealth"] = np.exp(self.terminal_logs)
        return self._stats["wealth"]

    def rebase(self, y: float) -> "PathBatch":
        """Same paths started from Y*(t) = y; log-wealth increments do not depend on the level."""
        shift = math.log(y) - self.ln_y
        return PathBatch(self.terminal_logs + shift, self.terminal_variances, self.measure, self.tau,
                         math.log(y), self.int_pi2_v, self.int_pilam_v)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["Z_T", "v_T"])
            for z, v in zip(self.terminal_logs, self.terminal_variances):
                w.writerow([repr(float(z)), repr(float(v))])


@numba.njit(cache=True)
def _euler_step(Z, V, I2, IL, e, dt, r, pi, c_z, kth, kap, sig, rho, rho_bar, lam):
    sdt = math.sqrt(dt)
    for j in range(Z.shape[0]):
        vp = V[j] if V[j] > 0.0 else 0.0
        sv = math.sqrt(vp) * sdt
        w1 = e[0, j]
        Z[j] += (r + c_z * vp) * dt + pi * sv * w1
        V[j] += (kth - kap * vp) * dt + sig * sv * (rho * w1 + rho_bar * e[1, j])
        I2[j] += pi * pi * vp * dt
        IL[j] += pi * lam * vp * dt


def _coefficients(m: MarketModel, gamma: float, measure: Measure, tau: float, n: int, lambda_v):
    closed = AffineClosedForm.from_model(m, gamma)
    dt = tau / n
    s = tau - dt * np.arange(n)  # time to maturity at each step start
    pis = pi_of_tau(s, m, gamma, closed)
    if measure is Measure.P:
        kaps = np.full(n, m.kappa)
        c_z = pis * m.lambda_bar - 0.5 * pis**2
    else:
        kaps = np.broadcast_to(kappa_tilde_of_tau(s, m, gamma, lambda_v, closed), (n,)).astype(float)
        if np.any(kaps <= 0):
            raise ValidationError("kappa_tilde", "pricing-measure mean reversion must stay positive")
        c_z = -0.5 * pis**2
    return dt, pis, c_z, kaps


def _run_block(args):
    m, gamma, cfg, tau, ln_y, v, lambda_v, b, size = args
    n = cfg.steps_for(tau)
    dt, pis, c_z, kaps = _coefficients(m, gamma, cfg.measure, tau, n, lambda_v)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(b,))))
    Z = np.full(size, ln_y)
    V = np.full(size, float(v))
    I2 = np.zeros(size)
    IL = np.zeros(size)
    e = np.empty((2, size), dtype=np.float32)
    kth = m.kappa * m.theta
    for i in range(n):
        rng.standard_normal(dtype=np.float32, out=e)
        _euler_step(Z, V, I2, IL, e, dt, m.r, pis[i], c_z[i], kth, kaps[i], m.sigma, m.rho, m.rho_bar,
                    m.lambda_bar)
    return Z, V, I2, IL


def simulate(m: MarketModel, gamma: float, T: float, cfg: SimConfig, t: float, y: float, v: float,
             lambda_v: float | None = None, n_workers: int = 1) -> PathBatch:
    """Simulate Z*(T) and v(T) from Y*(t) = y, v(t) = v.

    Results are bitwise identical for a fixed seed irrespective of ``n_workers``.
    """
    if not 0.0 <= t < T:
        raise ValidationError("t", f"simulation needs 0 <= t < T, got {t}")
    if not (y > 0 and v >= 0):
        raise ValidationError("state", "need y > 0 and v >= 0")
    tau = T - t
    ln_y = math.log(y)
    sizes = [min(cfg.block_size, cfg.n_paths - lo) for lo in range(0, cfg.n_paths, cfg.block_size)]
    jobs = [(m, gamma, cfg, tau, ln_y, v, lambda_v, b, s) for b, s in enumerate(sizes)]
    if n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(n_workers) as ex:
            parts = list(ex.map(_run_block, jobs))
    else:
        parts = [_run_block(j) for j in jobs]
    Z, V, I2, IL = (np.concatenate(x) for x in zip(*parts))
    return PathBatch(Z, V, cfg.measure, tau, ln_y, I2, IL)


def estimate_price(batch: PathBatch, payoff, r: float, tau: float) -> tuple[float, float]:
    """Discounted sample mean of payoff(Y*(T)) and its standard error."""
    vals = np.asarray(payoff(batch.terminal_wealth), dtype=float)
    vals = np.broadcast_to(vals, batch.terminal_logs.shape)
    disc = math.exp(-r * tau)
    n = vals.size
    se = vals.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0
    return disc * float(vals.mean()), disc * float(se)


def estimate_tail_prob(batch: PathBatch, threshold: float) -> tuple[float, float]:
    """Empirical P(Y*(T) < threshold) with binomial standard error."""
    if batch.measure is not Measure.P:
        raise ValidationError("measure", "tail probabilities need a real-world batch")
    if math.isinf(threshold) and threshold > 0:
        p = 1.0
    else:
        p = float(np.mean(batch.terminal_logs < math.log(threshold))) if threshold > 0 else 0.0
    return p, math.sqrt(p * (1.0 - p) / len(batch))
