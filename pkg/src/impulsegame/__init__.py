"""Stochastic impulse game between a polluting firm and a regulator.

The firm raises the pollution level by impulses, the government lowers it,
and the state follows a geometric Brownian motion between interventions.
"""
from .baselines import SingleAgentSolution, solve_firm_alone, solve_government_alone
from .config import ConfigError, load_config
from .diffusion import (GameConfig, GbmParams, IntegrabilityError, InvalidParameterError,
                        PowerFlow, check_integrability, fundamental_solutions, resolvent,
                        table1_config)
from .reporting import RunReport, SweepSpec, run_sweep, solve_and_verify
from .solver import SolverOptions, multistart_solve, residuals, solve
from .values import (REFERENCE_THRESHOLDS, EquilibriumValues, Player, Thresholds, corner_values,
                     transition_weights)
from .verification import verify, xhat

__all__ = [
    "SingleAgentSolution", "solve_firm_alone", "solve_government_alone",
    "ConfigError", "load_config",
    "GameConfig", "GbmParams", "IntegrabilityError", "InvalidParameterError", "PowerFlow",
    "check_integrability", "fundamental_solutions", "resolvent", "table1_config",
    "RunReport", "SweepSpec", "run_sweep", "solve_and_verify",
    "SolverOptions", "multistart_solve", "residuals", "solve",
    "REFERENCE_THRESHOLDS", "EquilibriumValues", "Player", "Thresholds", "corner_values",
    "transition_weights", "verify", "xhat",
]
