"""Circular spatiotemporal tubes for reach-avoid-stay missions.

Synthesis shapes a moving disc that starts inside the start set, ends
inside the target set, and keeps clear of unsafe regions the whole way.
A funnel controller then keeps a disturbed differential-drive robot
inside that disc.
"""

from .controller import (
    ControllerParams,
    ErrorState,
    FunnelParams,
    activation,
    compute_errors,
    control_law,
    wrap_angle,
)
from .errors import ConfigError, DomainError, FunnelViolation
from .geometry import (
    Ball2,
    Disc,
    Environment,
    Obstacle,
    PiecewiseLinear,
    Rect,
    Static,
    dist_point_shape,
    dist_point_unsafe,
    max_motion_rate,
    motion_offset,
    point_in_shape,
    workspace_margin,
)
from .scenario import (
    Scenario,
    Segment,
    build_problem,
    load_scenario,
    parse_scenario,
    read_tube_document,
    segment_environment,
    simulate_mission,
    write_tube_document,
)
from .sim import (
    BoundedNoise,
    ConstantBias,
    NoDisturbance,
    RobotState,
    SimConfig,
    SimTrace,
    SinusoidDisturbance,
    Verdict,
    run,
    run_segments,
)
from .synthesis import (
    Certificate,
    DenseReport,
    SamplingPlan,
    SolverOptions,
    SopProblem,
    certify,
    constraint_values,
    initialize_coefficients,
    make_sampling_plan,
    sampled_eta,
    solve_sop,
    solve_sop_report,
    verify_dense,
)
from .tube import (
    BasisSpec,
    Tube,
    bernstein_values,
    eval_center,
    eval_center_derivative,
    eval_radius,
    eval_radius_derivative,
    lipschitz_bounds,
    tube_from_dict,
    tube_to_dict,
)

__version__ = "0.1.0"

__all__ = [
    "Ball2",
    "BasisSpec",
    "BoundedNoise",
    "Certificate",
    "ConfigError",
    "ConstantBias",
    "ControllerParams",
    "DenseReport",
    "Disc",
    "DomainError",
    "Environment",
    "ErrorState",
    "FunnelParams",
    "FunnelViolation",
    "NoDisturbance",
    "Obstacle",
    "PiecewiseLinear",
    "Rect",
    "RobotState",
    "SamplingPlan",
    "Scenario",
    "Segment",
    "SimConfig",
    "SimTrace",
    "SinusoidDisturbance",
    "SolverOptions",
    "SopProblem",
    "Static",
    "Tube",
    "Verdict",
    "activation",
    "bernstein_values",
    "build_problem",
    "certify",
    "compute_errors",
    "constraint_values",
    "control_law",
    "dist_point_shape",
    "dist_point_unsafe",
    "eval_center",
    "eval_center_derivative",
    "eval_radius",
    "eval_radius_derivative",
    "initialize_coefficients",
    "lipschitz_bounds",
    "load_scenario",
    "make_sampling_plan",
    "max_motion_rate",
    "motion_offset",
    "parse_scenario",
    "point_in_shape",
    "read_tube_document",
    "run",
    "run_segments",
    "sampled_eta",
    "segment_environment",
    "simulate_mission",
    "solve_sop",
    "solve_sop_report",
    "tube_from_dict",
    "tube_to_dict",
    "verify_dense",
    "workspace_margin",
    "wrap_angle",
]
