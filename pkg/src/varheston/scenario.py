"""Scenario files: market, preferences, numerics and Monte Carlo settings in one YAML document.

Bundled scenarios ship with the package and can be referenced by bare name
(``base``, ``turbulent``).  Numerics can be overridden from the environment,
see ``ENV_OVERRIDES``.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import yaml

from .charfn import FrequencyGrid, Measure
from .mc import SimConfig
from .model import MarketModel, ProblemSpec, ValidationError
from .pricing import Dampening, FourierPricer
from .solver import SolverConfig


@dataclass(frozen=True)
class Numerics:
    """Quadrature, ODE and solver knobs.  ``lambda_v=None`` selects the time-dependent premium."""

    ode_steps: int = 10_000
    n_u: int = 4096
    u_max: float = 200.0
    alpha_put: float = 2.0
    alpha_digital: float = 0.5
    tail_tol: float = 1e-8
    lambda_v: float | None = None
    tol_budget: float = 1e-4
    tol_vega: float = 1e-4
    tol_prob: float = 1e-5
    tol_lagrange: float = 1e-5
    max_iter: int = 200

    def __post_init__(self):
        if self.ode_steps < 1:
            raise ValidationError("ode_steps", f"need at least one ODE step, got {self.ode_steps}")
        # constructing the pieces runs their own validation
        self.grid()
        self.dampening()
        self.solver_config()

    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.n_u, self.u_max)

    def dampening(self) -> Dampening:
        return Dampening(self.alpha_put, self.alpha_digital)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(self.tol_budget, self.tol_vega, self.tol_prob, self.tol_lagrange, self.max_iter)


@dataclass(frozen=True)
class MCSettings:
    n_paths: int = 100_000
    seed: int = 0
    steps_per_year: int = 500
    block_size: int = 1 << 16

    def __post_init__(self):
        self.sim_config()

    def sim_config(self, measure: Measure = Measure.P, seed_offset: int = 0) -> SimConfig:
        return SimConfig(n_paths=self.n_paths, seed=self.seed + seed_offset, measure=measure,
                         steps_per_year=self.steps_per_year, block_size=self.block_size)


_SECTIONS = {"market": MarketModel, "problem": ProblemSpec, "numerics": Numerics, "mc": MCSettings}
_INT_FIELDS = {"ode_steps", "n_u", "max_iter", "n_paths", "seed", "steps_per_year", "block_size"}


def _build(cls, raw, section: str):
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValidationError(section, f"section {section!r} must be a mapping")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ValidationError(section, f"unknown keys in {section!r}: {', '.join(unknown)}")
    vals = {}
    for k, v in raw.items():
        if v is None:
            vals[k] = None
        elif isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(k, f"{section}.{k} must be a number, got {v!r}")
        elif k in _INT_FIELDS:
            if float(v) != int(v):
                raise ValidationError(k, f"{section}.{k} must be an integer, got {v!r}")
            vals[k] = int(v)
        else:
            vals[k] = float(v)
    try:
        return cls(**vals)
    except TypeError as exc:
        raise ValidationError(section, str(exc)) from None


@dataclass(frozen=True)
class Scenario:
    market: MarketModel
    problem: ProblemSpec
    numerics: Numerics = field(default_factory=Numerics)
    mc: MCSettings = field(default_factory=MCSettings)

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ValidationError("scenario", "scenario document must be a mapping")
        unknown = sorted(set(d) - set(_SECTIONS))
        if unknown:
            raise ValidationError("scenario", f"unknown sections: {', '.join(unknown)}")
        for required in ("market", "problem"):
            if required not in d:
                raise ValidationError(required, f"missing section {required!r}")
        return cls(**{k: _build(c, d.get(k), k) for k, c in _SECTIONS.items()})

    def to_dict(self) -> dict:
        return {k: asdict(getattr(self, k)) for k in _SECTIONS}

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def dump(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Scenario":
        try:
            d = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ValidationError("scenario", f"malformed YAML: {exc}") from None
        return cls.from_dict(d)

    @classmethod
    def load(cls, source) -> "Scenario":
        """Load from a path or a bundled scenario name."""
        return cls.loads(_read(source))

    def pricer(self) -> FourierPricer:
        n = self.numerics
        return FourierPricer(self.market, self.problem.gamma, self.problem.T, grid=n.grid(), damp=n.dampening(),
                             ode_steps=n.ode_steps, lambda_v=n.lambda_v, tail_tol=n.tail_tol)

    def replace(self, **sections) -> "Scenario":
        return replace(self, **sections)


def bundled_names() -> list[str]:
    root = resources.files("varheston") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def _read(source) -> str:
    path = Path(source)
    if path.is_file():
        return path.read_text()
    name = str(source)
    if name in bundled_names():
        return (resources.files("varheston") / "scenarios" / f"{name}.yaml").read_text()
    raise ValidationError("scenario", f"no scenario file or bundled scenario named {name!r}")


# env var -> (section, key)
ENV_OVERRIDES = {
    "VARHESTON_ODE_STEPS": ("numerics", "ode_steps"),
    "VARHESTON_N_U": ("numerics", "n_u"),
    "VARHESTON_U_MAX": ("numerics", "u_max"),
    "VARHESTON_ALPHA_PUT": ("numerics", "alpha_put"),
    "VARHESTON_ALPHA_DIGITAL": ("numerics", "alpha_digital"),
    "VARHESTON_MC_STEPS_PER_YEAR": ("mc", "steps_per_year"),
}


def apply_env(scenario: Scenario, environ=None) -> Scenario:
    environ = os.environ if environ is None else environ
    d = scenario.to_dict()
    touched = False
    for var, (section, key) in ENV_OVERRIDES.items():
        if var in environ:
            try:
                val = float(environ[var])
            except ValueError:
                raise ValidationError(key, f"{var}={environ[var]!r} is not a number") from None
            d[section][key] = val
            touched = True
    return Scenario.from_dict(d) if touched else scenario


AXES = ("epsilon", "rra", "horizon", "rho", "kappa_sigma_scale")


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep; ``kappa_sigma_scale`` multiplies kappa and sigma by the grid value."""

    axis: str
    grid: tuple[float, ...]

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValidationError("axis", f"unknown sweep axis {self.axis!r}; choose from {', '.join(AXES)}")
        g = tuple(float(x) for x in self.grid)
        if not g:
            raise ValidationError("grid", "sweep grid is empty")
        if not all(math.isfinite(x) for x in g):
            raise ValidationError("grid", "sweep grid has non-finite values")
        if any(b < a for a, b in zip(g, g[1:])):
            raise ValidationError("grid", "sweep grid must be sorted ascending")
        object.__setattr__(self, "grid", g)

    @classmethod
    def parse(cls, axis: str, grid: str) -> "SweepSpec":
        try:
            vals = [float(s) for s in grid.split(",") if s.strip()]
        except ValueError:
            raise ValidationError("grid", f"cannot parse grid {grid!r}") from None
        return cls(axis, tuple(vals))

    def apply(self, scenario: Scenario, value: float) -> Scenario:
        m, p = scenario.market, scenario.problem
        if self.axis == "epsilon":
            p = replace(p, epsilon=value)
        elif self.axis == "rra":
            p = replace(p, gamma=1.0 - value)
        elif self.axis == "horizon":
            p = replace(p, T=value)
        elif self.axis == "rho":
            m = replace(m, rho=value)
        else:
            m = replace(m, kappa=m.kappa * value, sigma=m.sigma * value)
        return scenario.replace(market=m, problem=p)

    def scenarios(self, scenario: Scenario) -> list[Scenario]:
        return [self.apply(scenario, x) for x in self.grid]
