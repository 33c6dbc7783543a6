"""Power allocation and motion planning for a two-team, four-agent jamming game."""

from .allocation import (
    AllocationProfile,
    BestResponse,
    FocalCoefficients,
    PsneReport,
    SolverOptions,
    best_response,
    convexity_conditions,
    focal_coefficients,
    focal_payoff,
    hessian_diag,
    mqam_sufficient_condition,
    nash_solve,
    power_monotonicity_check,
    team_payoff,
    verify_nash,
)
from .channel import AGENTS, Agent, AgentLayout, PhysicalParams, SinrState, link_gains, rho, sinr_all, wavelength
from .errors import (
    ConfigError,
    ConvergenceError,
    DomainError,
    NashConvergenceError,
    SingularityError,
    TeamJamError,
)
from .game import (
    GameOptions,
    Trace,
    TraceRecord,
    costate_rpe_step,
    forward_backward_sweep,
    hamiltonian,
    horizon,
    optimal_heading,
    payoff_position_gradient,
    simulate,
    step_kinematics,
)
from .modulation import MqamScheme, q_function
from .scenario import ScenarioConfig, parse_config, serialize_config

__all__ = [name for name in dir() if not name.startswith("_")]
