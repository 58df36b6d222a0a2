"""Attitude planning and control for ground vehicles during airborne phases.

The package simulates the gyroscopic and reaction-torque attitude dynamics a
wheeled vehicle has while its wheels are off the ground, learns a hybrid
forward model of those dynamics, and plans landing maneuvers with a
fixed-horizon sampling planner, benchmarked against a PID baseline.
"""

from .core import (
    Action,
    ActuationLimits,
    ConfigError,
    DEFAULT_LIMITS,
    GoalState,
    InfeasibleTrajectoryError,
    ModelFormatError,
    PlanningWindowExpiredError,
    Trajectory,
    TrainingConfigError,
    VehicleState,
    clamp_action,
    clamp_state,
    goal_residual,
    wrap_angle,
)
from .model import AngularAccel, HybridModel, HybridStepper, hybrid_step, load_model, save_model
from .physics import (
    DEFAULT_PARAMS,
    OracleStepper,
    PhysicalParams,
    gyroscopic_accel,
    inertial_accel,
    projectile_airtime,
    simulate,
    step,
    total_accel,
)
from .pid import DEFAULT_PID_GAINS, LoopGains, PidGains, PidState, pid_step
from .planner import (
    CostSchedule,
    PlanResult,
    PlannerConfig,
    control_loop,
    default_cost_schedule,
    plan_cycle,
)
from .config import RunConfig, load_config
from .files import CsvFormatError, read_dataset_csv, write_dataset_csv, write_trajectory_csv
from .scenarios import (
    Disturbance,
    Metrics,
    PidController,
    PlannerController,
    ScenarioSpec,
    SuccessThresholds,
    TrialResult,
    ZeroController,
    compare,
    default_spec,
    draw_certified_launch,
    max_effort_reachable,
    run_scenario,
)
from .training import Dataset, Sample, TrainConfig, generate_dataset, gradient_check, train

__all__ = [
    "Action",
    "ActuationLimits",
    "AngularAccel",
    "ConfigError",
    "CostSchedule",
    "CsvFormatError",
    "DEFAULT_LIMITS",
    "DEFAULT_PARAMS",
    "DEFAULT_PID_GAINS",
    "Dataset",
    "Disturbance",
    "GoalState",
    "HybridModel",
    "HybridStepper",
    "InfeasibleTrajectoryError",
    "LoopGains",
    "Metrics",
    "ModelFormatError",
    "OracleStepper",
    "PhysicalParams",
    "PidController",
    "PidGains",
    "PidState",
    "PlanResult",
    "PlannerConfig",
    "PlannerController",
    "PlanningWindowExpiredError",
    "RunConfig",
    "Sample",
    "ScenarioSpec",
    "SuccessThresholds",
    "TrainConfig",
    "TrainingConfigError",
    "Trajectory",
    "TrialResult",
    "VehicleState",
    "ZeroController",
    "clamp_action",
    "clamp_state",
    "compare",
    "control_loop",
    "default_cost_schedule",
    "default_spec",
    "draw_certified_launch",
    "generate_dataset",
    "goal_residual",
    "gradient_check",
    "gyroscopic_accel",
    "hybrid_step",
    "inertial_accel",
    "load_config",
    "load_model",
    "max_effort_reachable",
    "pid_step",
    "plan_cycle",
    "projectile_airtime",
    "read_dataset_csv",
    "run_scenario",
    "save_model",
    "simulate",
    "step",
    "total_accel",
    "train",
    "wrap_angle",
    "write_dataset_csv",
    "write_trajectory_csv",
]
