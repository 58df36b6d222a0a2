"""State and action data model shared by the simulator, the learned model,
the planner, and the baseline controller.

The vehicle attitude state is an 8-vector laid out as
(roll, roll_rate, pitch, pitch_rate, yaw, yaw_rate, rpm, steer) with angles
in radians wrapped to (-pi, pi], angular rates in rad/s, wheel speed in rpm,
and steering angle in radians.  Batched operations act on the last axis of
float arrays with that layout; the dataclasses are thin immutable views used
at API boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# Column layout of the 8-dimensional state vector.
ROLL, ROLL_RATE, PITCH, PITCH_RATE, YAW, YAW_RATE, RPM, STEER = range(8)
ANGLE_COLS = (ROLL, PITCH, YAW)
RATE_COLS = (ROLL_RATE, PITCH_RATE, YAW_RATE)
STATE_NAMES = (
    "roll",
    "roll_rate",
    "pitch",
    "pitch_rate",
    "yaw",
    "yaw_rate",
    "rpm",
    "steer",
)
ACTION_NAMES = ("rpm_rate", "steer_rate")


class ConfigError(Exception):
    """Configuration file or section contents are unusable."""


class ModelFormatError(Exception):
    """Model file is malformed or internally inconsistent."""


class TrainingConfigError(Exception):
    """Training data or configuration is degenerate (e.g. zero-variance feature)."""


class InfeasibleTrajectoryError(Exception):
    """No physically valid solution exists (e.g. a projectile that never lands)."""


class PlanningWindowExpiredError(Exception):
    """A plan was requested with no remaining time before touchdown."""


def wrap_angle(angle: float) -> float:
    """Wrap an angle in radians to the half-open interval (-pi, pi].

    Angles already in range pass through bit-exactly.  Raises ValueError for
    non-finite input.
    """
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle!r}")
    if -math.pi < angle <= math.pi:
        return float(angle)
    return float(math.pi - (math.pi - angle) % TWO_PI)


def wrap_angle_array(angles: np.ndarray) -> np.ndarray:
    """Vectorized wrap to (-pi, pi].  No finiteness checks."""
    arr = np.asarray(angles, dtype=float)
    wrapped = np.pi - np.remainder(np.pi - arr, TWO_PI)
    return np.where((arr > np.pi) | (arr <= -np.pi), wrapped, arr)


@dataclass(frozen=True)
class VehicleState:
    """Immutable attitude state.  All fields must be finite."""

    roll: float = 0.0
    roll_rate: float = 0.0
    pitch: float = 0.0
    pitch_rate: float = 0.0
    yaw: float = 0.0
    yaw_rate: float = 0.0
    rpm: float = 0.0
    steer: float = 0.0

    def __post_init__(self):
        for name in STATE_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"VehicleState.{name} must be finite, got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.roll,
                self.roll_rate,
                self.pitch,
                self.pitch_rate,
                self.yaw,
                self.yaw_rate,
                self.rpm,
                self.steer,
            ],
            dtype=float,
        )

    @classmethod
    def from_array(cls, arr) -> "VehicleState":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (8,):
            raise ValueError(f"state array must have shape (8,), got {arr.shape}")
        return cls(*(float(v) for v in arr))


# A goal is a full state with a target role; identical layout and invariants.
GoalState = VehicleState


@dataclass(frozen=True)
class Action:
    """Commanded actuation rates: wheel acceleration (rpm/s) and steering rate (rad/s)."""

    rpm_rate: float = 0.0
    steer_rate: float = 0.0

    def __post_init__(self):
        for name in ACTION_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"Action.{name} must be finite, got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.rpm_rate, self.steer_rate], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "Action":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (2,):
            raise ValueError(f"action array must have shape (2,), got {arr.shape}")
        return cls(float(arr[0]), float(arr[1]))


@dataclass(frozen=True)
class ActuationLimits:
    """Position and rate limits of the two actuators.

    Defaults follow the reference vehicle: wheel speed 0..1980 rpm commanded
    at up to +/-5000 rpm/s, steering +/-0.65 rad at up to +/-6.5 rad/s.
    """

    rpm_min: float = 0.0
    rpm_max: float = 1980.0
    rpm_rate_min: float = -5000.0
    rpm_rate_max: float = 5000.0
    steer_min: float = -0.65
    steer_max: float = 0.65
    steer_rate_min: float = -6.5
    steer_rate_max: float = 6.5

    def __post_init__(self):
        pairs = [
            ("rpm_min", "rpm_max"),
            ("rpm_rate_min", "rpm_rate_max"),
            ("steer_min", "steer_max"),
            ("steer_rate_min", "steer_rate_max"),
        ]
        for lo_name, hi_name in pairs:
            lo, hi = getattr(self, lo_name), getattr(self, hi_name)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"limits {lo_name}/{hi_name} must be finite")
            if lo > hi:
                raise ValueError(f"{lo_name}={lo} exceeds {hi_name}={hi}")
        if self.rpm_min < 0:
            raise ValueError(f"rpm_min must be non-negative, got {self.rpm_min}")


DEFAULT_LIMITS = ActuationLimits()


def clamp_state_array(states: np.ndarray, limits: ActuationLimits) -> np.ndarray:
    """Wrap angle columns and clamp rpm/steer columns.  Shape (..., 8)."""
    out = np.array(states, dtype=float, copy=True)
    for col in ANGLE_COLS:
        out[..., col] = wrap_angle_array(out[..., col])
    out[..., RPM] = np.clip(out[..., RPM], limits.rpm_min, limits.rpm_max)
    out[..., STEER] = np.clip(out[..., STEER], limits.steer_min, limits.steer_max)
    return out


def clamp_state(state: VehicleState, limits: ActuationLimits) -> VehicleState:
    """Project a state onto the feasible set: wrapped angles, clamped rpm/steer."""
    return VehicleState.from_array(clamp_state_array(state.as_array(), limits))


def clamp_action_array(
    actions: np.ndarray,
    states: np.ndarray,
    limits: ActuationLimits,
    dt: float,
) -> np.ndarray:
    """Clamp commanded rates to the feasible band at the given states.

    The band intersects the global rate limits with the rates that keep the
    integrated position (rpm, steer) inside its limits after one interval of
    length dt.  States are assumed already state-clamped.
    """
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt!r}")
    states = np.asarray(states, dtype=float)
    out = np.array(actions, dtype=float, copy=True)
    lo = np.maximum(limits.rpm_rate_min, (limits.rpm_min - states[..., RPM]) / dt)
    hi = np.minimum(limits.rpm_rate_max, (limits.rpm_max - states[..., RPM]) / dt)
    out[..., 0] = np.minimum(np.maximum(out[..., 0], lo), hi)
    lo = np.maximum(limits.steer_rate_min, (limits.steer_min - states[..., STEER]) / dt)
    hi = np.minimum(limits.steer_rate_max, (limits.steer_max - states[..., STEER]) / dt)
    out[..., 1] = np.minimum(np.maximum(out[..., 1], lo), hi)
    return out


def clamp_action(
    action: Action, state: VehicleState, limits: ActuationLimits, dt: float
) -> Action:
    """Clamp a single commanded action at a single state (see clamp_action_array)."""
    clamped = clamp_action_array(action.as_array(), state.as_array(), limits, dt)
    return Action.from_array(clamped)


def residual_array(states: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Per-dimension residual state - goal, shortest-arc on angle columns."""
    res = np.asarray(states, dtype=float) - np.asarray(goal, dtype=float)
    for col in ANGLE_COLS:
        res[..., col] = wrap_angle_array(res[..., col])
    return res


def goal_residual(state: VehicleState, goal: GoalState) -> np.ndarray:
    """8-vector of residuals between a state and a goal.

    Angle entries are wrapped to the shortest arc; rates, rpm, and steer are
    plain differences.  goal_residual(s, s) is exactly zero.
    """
    return residual_array(state.as_array(), goal.as_array())


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A rollout: n+1 states sampled every dt seconds and the n applied actions.

    Actions are post-clamp, i.e. what the actuators were actually commanded
    after the per-step feasibility band was applied.
    """

    states: np.ndarray
    actions: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        actions = np.asarray(self.actions, dtype=float)
        if states.ndim != 2 or states.shape[1] != 8:
            raise ValueError(f"states must have shape (n+1, 8), got {states.shape}")
        if actions.ndim != 2 or actions.shape[1] != 2:
            raise ValueError(f"actions must have shape (n, 2), got {actions.shape}")
        if states.shape[0] != actions.shape[0] + 1:
            raise ValueError(
                f"{states.shape[0]} states require {states.shape[0] - 1} actions, "
                f"got {actions.shape[0]}"
            )
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive and finite, got {self.dt!r}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    @property
    def n_steps(self) -> int:
        return self.actions.shape[0]

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.states.shape[0])

    def state(self, i: int) -> VehicleState:
        return VehicleState.from_array(self.states[i])

    def final_state(self) -> VehicleState:
        return VehicleState.from_array(self.states[-1])
