"""Stochastic optimal control of the public debt-to-GDP ratio."""

from .errors import (
    ConfigError,
    DebtOptError,
    ModelError,
    ModelValidationError,
    SolverError,
)
from .hjb import Grid, GridValue, HJBConfig, extract_threshold, policy_iteration, residual_norm
from .model import (
    Affine,
    ConcaveQuadraticGrowth,
    ControlBounds,
    Economy,
    Factor,
    LinearGrowth,
    Model,
    PowerCost,
    QuadraticDistanceCost,
    Rate,
    classify_economy,
    constant_model,
    lambda_m,
    model_from_dict,
    model_to_dict,
    sustainability_bounds,
    validate,
    violations,
)
from .policy import (
    ConstantPolicy,
    StateFeedback,
    ThresholdBangBang,
    ZFeedback,
    hamiltonian,
    interior_candidate,
    minimize_hamiltonian,
    reduction_policy_z,
)
from .reduction import ReductionSolution, solve_reduction
from .sde import (
    CostEstimate,
    PathConfig,
    Trajectory,
    covariation_diagnostic,
    estimate_cost,
    moment_bound_check,
    simulate_paths,
    sustainability_check,
)
from .smoothing import SmoothingSolution, smoothing_policy, solve_smoothing, solve_threshold, verify_smooth_fit

__all__ = [name for name in dir() if not name.startswith("_")]
