"""Mean-variance portfolio selection under mutually exciting price jumps.

The package simulates the contagious jump intensity, solves the non-local
equation for the value-function factor by backward Monte Carlo, and turns
the solved factor into the efficient strategy and efficient frontier,
validated against the deterministic-intensity closed form and forward
wealth simulation.
"""

__version__ = "0.1.0"

from .config import RunConfig, default_config, load_config
from .errors import (BlowupError, CapabilityError, ConfigurationError,
                     EventCapError, IllConditionedError, InvalidGError,
                     MVHawkesError, NumericalError, ResourceError,
                     SolverDivergenceError, StepSizeError, ValidationError)
from .frontier import (FrontierPoint, StrategyField, WealthStats,
                       efficient_frontier, poisson_frontier, simulate_wealth,
                       theta_star)
from .gsolver import (GTable, SolverSettings, eval_g, poisson_g, solve_g,
                      table_hash)
from .hawkes import (HawkesParams, IntensityPath, expected_intensity,
                     integrated_intensity, intensity_at, simulate_discretized,
                     simulate_exact)
from .market import (MarketParams, covariance, gamma_zhat, jump_quadratic,
                     risk_premium, sample_jump)

__all__ = [
    "BlowupError", "CapabilityError", "ConfigurationError", "EventCapError",
    "FrontierPoint", "GTable", "HawkesParams", "IllConditionedError",
    "IntensityPath", "InvalidGError", "MVHawkesError", "MarketParams",
    "NumericalError", "ResourceError", "RunConfig", "SolverDivergenceError",
    "SolverSettings", "StepSizeError", "StrategyField", "ValidationError",
    "WealthStats", "covariance", "default_config", "efficient_frontier",
    "eval_g", "expected_intensity", "gamma_zhat", "integrated_intensity",
    "intensity_at", "jump_quadratic", "load_config", "poisson_frontier",
    "poisson_g", "risk_premium", "sample_jump", "simulate_discretized",
    "simulate_exact", "simulate_wealth", "solve_g", "table_hash", "theta_star",
]
