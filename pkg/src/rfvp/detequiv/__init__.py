"""Deterministic equivalents for the surrogate ridge resolvent."""

from .linearization import (
    LinearizationError,
    LinearizationProfile,
    SingularCellError,
    SquareState,
    build_linearization_profile,
    lambda_diagonal,
    r_transform_apply,
    structured_block_inverse,
)
from .mp import BranchError, mp_stieltjes
from .oracle import dense_resolvent_oracle, sample_pencil, schur_errors
from .risks import AssumptionError, ResidueError, check_row_stochastic, square_risks
from .solver import (
    COMPILED_KERNEL,
    ConvergenceError,
    EtaSchedule,
    SolveResult,
    SquareSolution,
    continuation_solve,
    fixed_point_residual,
    linear_response,
    solve_derivative,
    solve_fixed_point,
)

__all__ = [
    "AssumptionError",
    "BranchError",
    "COMPILED_KERNEL",
    "ConvergenceError",
    "EtaSchedule",
    "LinearizationError",
    "LinearizationProfile",
    "ResidueError",
    "SingularCellError",
    "SolveResult",
    "SquareSolution",
    "SquareState",
    "build_linearization_profile",
    "check_row_stochastic",
    "continuation_solve",
    "dense_resolvent_oracle",
    "fixed_point_residual",
    "lambda_diagonal",
    "linear_response",
    "mp_stieltjes",
    "r_transform_apply",
    "sample_pencil",
    "schur_errors",
    "solve_derivative",
    "solve_fixed_point",
    "square_risks",
    "structured_block_inverse",
]
