"""SIQRB cholera model: simulation, equilibrium analysis and optimal quarantine control."""

from siqrb.model import (
    ControlSignal,
    ModelParams,
    State,
    ValidatedParams,
    adjoint_rhs,
    controlled_rhs,
    force_of_infection,
    hamiltonian,
    recruitment_from_population,
    uncontrolled_rhs,
    validate_params,
)
from siqrb.integrator import TimeGrid, Trajectory, integrate_backward, integrate_forward, total_cost
from siqrb.analysis import (
    basic_reproduction_number,
    bifurcation_coefficients,
    dfe_stability,
    disease_free_equilibrium,
    endemic_equilibrium,
    jacobian_at,
)
from siqrb.ocp import OcpConfig, OcpSolution, control_update, cost_gradient_check, forward_backward_sweep

__all__ = [
    "ControlSignal",
    "ModelParams",
    "OcpConfig",
    "OcpSolution",
    "State",
    "TimeGrid",
    "Trajectory",
    "ValidatedParams",
    "adjoint_rhs",
    "basic_reproduction_number",
    "bifurcation_coefficients",
    "control_update",
    "controlled_rhs",
    "cost_gradient_check",
    "dfe_stability",
    "disease_free_equilibrium",
    "endemic_equilibrium",
    "force_of_infection",
    "forward_backward_sweep",
    "hamiltonian",
    "integrate_backward",
    "integrate_forward",
    "jacobian_at",
    "recruitment_from_population",
    "total_cost",
    "uncontrolled_rhs",
    "validate_params",
]
