"""Two-product make-to-stock queueing game: performance, equilibria, optimization."""

from .equilibrium import Continuum, Unique, classify, solve_equilibrium, utility
from .errors import MTSError, SolverError, ValidationError
from .model import (
    EffectiveRates,
    InventoryPolicy,
    JoiningProfile,
    MarketParams,
    baseline,
    effective_rates,
    load_params,
    validate,
)
from .performance import PerformanceReport, report
from .planner import PlannerSolution, optimize_welfare
from .producer import ProducerSolution, optimize_policy

__version__ = "0.1.0"

__all__ = [
    "Continuum", "EffectiveRates", "InventoryPolicy", "JoiningProfile", "MTSError",
    "MarketParams", "PerformanceReport", "PlannerSolution", "ProducerSolution",
    "SolverError", "Unique", "ValidationError", "baseline", "classify", "effective_rates",
    "load_params", "optimize_policy", "optimize_welfare", "report", "solve_equilibrium",
    "utility", "validate",
]
