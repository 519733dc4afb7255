"""Optimal investment under a terminal Value-at-Risk constraint in the Heston model."""

from .charfn import CharacteristicFunction, FrequencyGrid, Measure
from .model import MarketModel, ProblemSpec, ValidationError
from .pricing import Dampening, DerivativeParams, FourierPricer, MarketState, payoff_D
from .solver import SolveResult, SolverConfig, solve_nls0, solve_nls_t

__all__ = [
    "CharacteristicFunction", "FrequencyGrid", "Measure", "MarketModel", "ProblemSpec", "ValidationError",
    "Dampening", "DerivativeParams", "FourierPricer", "MarketState", "payoff_D",
    "SolveResult", "SolverConfig", "solve_nls0", "solve_nls_t",
]
