"""Optimal two-vaccine campaigns for an SEIRV epidemic model."""
from .analysis import (
    Scenario,
    classify_control,
    efficacy_sensitivity_sweep,
    infected_comparison,
    procurement_split,
    rate_sensitivity_grid,
    reference_scenario,
)
from .config import load_config
from .integrate import TimeGrid, Trajectory, integrate_backward, integrate_forward, trapezoid
from .model import (
    AdjointPoint,
    ControlPoint,
    ModelParams,
    StatePoint,
    adjoint_rhs,
    default_initial_state,
    derived_transmission_rate,
    hamiltonian,
    objective_integrand,
    state_rhs,
)
from .sweep import SweepConfig, SweepResult, evaluate_objective, optimality_update, run_sweep

__version__ = "0.1.0"
