"""Analytic rigid-body dynamics of an airborne vehicle's attitude.

Two torque channels act on the chassis while the wheels are off the ground:

* reaction to wheel acceleration: accelerating the wheels at rpm_rate applies
  an opposite torque to the chassis, split between roll and pitch by the
  front-wheel steering angle, and
* gyroscopic precession: steering a spinning front wheel at steer_rate
  precesses its angular momentum into chassis roll and pitch.

Yaw has no actuation channel; an optional zero-mean Gaussian acceleration
models its drift.  Integration is zero-order-hold in the commanded action
with constant acceleration inside each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    PITCH,
    PITCH_RATE,
    ROLL,
    ROLL_RATE,
    RPM,
    STEER,
    TWO_PI,
    YAW,
    YAW_RATE,
    Action,
    ActuationLimits,
    InfeasibleTrajectoryError,
    Trajectory,
    VehicleState,
    clamp_action_array,
    clamp_state_array,
)


@dataclass(frozen=True)
class PhysicalParams:
    """Inertias (kg m^2), yaw process noise (rad/s^2), and gravity (m/s^2)."""

    i_fw: float = 0.05
    i_rw: float = 0.05
    i_chassis_roll: float = 0.8
    i_chassis_pitch: float = 2.0
    yaw_noise_std: float = 0.05
    gravity: float = 9.81

    def __post_init__(self):
        for name in ("i_fw", "i_rw", "i_chassis_roll", "i_chassis_pitch"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not (math.isfinite(self.yaw_noise_std) and self.yaw_noise_std >= 0):
            raise ValueError(f"yaw_noise_std must be non-negative, got {self.yaw_noise_std!r}")
        if not (math.isfinite(self.gravity) and self.gravity > 0):
            raise ValueError(f"gravity must be positive, got {self.gravity!r}")


DEFAULT_PARAMS = PhysicalParams()


def inertial_accel_array(
    states: np.ndarray, actions: np.ndarray, params: PhysicalParams
) -> tuple[np.ndarray, np.ndarray]:
    """Roll/pitch accelerations from the wheel-acceleration reaction torque.

    roll_acc  = -i_fw sin(steer) (2 pi / 60) rpm_rate / i_chassis_roll
    pitch_acc = -(i_fw cos(steer) + i_rw) (pi / 60) rpm_rate / i_chassis_pitch

    The pitch channel carries half the nominal torque factor because the
    front-wheel reaction is shared across the wheelbase.
    """
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=float)
    steer = states[..., STEER]
    rpm_rate = actions[..., 0]
    roll_acc = -params.i_fw * np.sin(steer) * TWO_PI / (params.i_chassis_roll * 60.0) * rpm_rate
    pitch_acc = (
        -(params.i_fw * np.cos(steer) + params.i_rw)
        * math.pi
        / (params.i_chassis_pitch * 60.0)
        * rpm_rate
    )
    return roll_acc, pitch_acc


def gyroscopic_accel_array(
    states: np.ndarray, actions: np.ndarray, params: PhysicalParams
) -> tuple[np.ndarray, np.ndarray]:
    """Roll/pitch accelerations from precession of the spinning front wheel.

    roll_acc  = cos(steer) i_fw (2 pi / 60) rpm steer_rate / i_chassis_roll
    pitch_acc = sin(steer) i_fw (pi / 60) rpm steer_rate / i_chassis_pitch
    """
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=float)
    steer = states[..., STEER]
    rpm = states[..., RPM]
    steer_rate = actions[..., 1]
    roll_acc = (
        np.cos(steer) * params.i_fw * TWO_PI / (params.i_chassis_roll * 60.0) * rpm * steer_rate
    )
    pitch_acc = (
        np.sin(steer) * params.i_fw * math.pi / (params.i_chassis_pitch * 60.0) * rpm * steer_rate
    )
    return roll_acc, pitch_acc


def inertial_accel(
    state: VehicleState, action: Action, params: PhysicalParams
) -> tuple[float, float]:
    roll_acc, pitch_acc = inertial_accel_array(state.as_array(), action.as_array(), params)
    return float(roll_acc), float(pitch_acc)


def gyroscopic_accel(
    state: VehicleState, action: Action, params: PhysicalParams
) -> tuple[float, float]:
    roll_acc, pitch_acc = gyroscopic_accel_array(state.as_array(), action.as_array(), params)
    return float(roll_acc), float(pitch_acc)


def total_accel_array(
    states: np.ndarray,
    actions: np.ndarray,
    params: PhysicalParams,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Stack (..., 3) of roll/pitch/yaw accelerations.

    Yaw acceleration is zero unless an rng is supplied, in which case it is a
    zero-mean Gaussian draw with std params.yaw_noise_std.
    """
    states = np.asarray(states, dtype=float)
    roll_i, pitch_i = inertial_accel_array(states, actions, params)
    roll_g, pitch_g = gyroscopic_accel_array(states, actions, params)
    out = np.zeros(states.shape[:-1] + (3,), dtype=float)
    out[..., 0] = roll_i + roll_g
    out[..., 1] = pitch_i + pitch_g
    if rng is not None:
        out[..., 2] = rng.normal(0.0, params.yaw_noise_std, size=states.shape[:-1])
    return out


def total_accel(
    state: VehicleState,
    action: Action,
    params: PhysicalParams,
    rng: np.random.Generator | None = None,
) -> tuple[float, float, float]:
    acc = total_accel_array(state.as_array(), action.as_array(), params, rng)
    return float(acc[0]), float(acc[1]), float(acc[2])


def integrate_array(
    states: np.ndarray,
    accels: np.ndarray,
    actions: np.ndarray,
    dt: float,
    limits: ActuationLimits,
) -> np.ndarray:
    """Advance states one interval under given accelerations and actions.

    Angles get x += v dt + a dt^2 / 2, rates get v += a dt, and the actuator
    positions integrate their commanded rates linearly.  The result is
    state-clamped (wrapped angles, clamped rpm/steer).  This is the single
    integration routine shared by the analytic oracle and the learned model.
    """
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive and finite, got {dt!r}")
    states = np.asarray(states, dtype=float)
    accels = np.asarray(accels, dtype=float)
    actions = np.asarray(actions, dtype=float)
    out = np.array(states, copy=True)
    half_dt2 = 0.5 * dt * dt
    for angle, rate, axis in ((ROLL, ROLL_RATE, 0), (PITCH, PITCH_RATE, 1), (YAW, YAW_RATE, 2)):
        acc = accels[..., axis]
        out[..., angle] = states[..., angle] + states[..., rate] * dt + acc * half_dt2
        out[..., rate] = states[..., rate] + acc * dt
    out[..., RPM] = states[..., RPM] + actions[..., 0] * dt
    out[..., STEER] = states[..., STEER] + actions[..., 1] * dt
    return clamp_state_array(out, limits)


def step_array(
    states: np.ndarray,
    actions: np.ndarray,
    dt: float,
    params: PhysicalParams,
    limits: ActuationLimits,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One oracle step for a batch of states.  Returns (next_states, applied).

    The commanded actions are clamped to the per-state feasibility band
    before the dynamics are evaluated; `applied` records the clamped values.
    """
    states = clamp_state_array(states, limits)
    applied = clamp_action_array(actions, states, limits, dt)
    accels = total_accel_array(states, applied, params, rng)
    return integrate_array(states, accels, applied, dt, limits), applied


def step(
    state: VehicleState,
    action: Action,
    dt: float,
    params: PhysicalParams,
    limits: ActuationLimits,
    rng: np.random.Generator | None = None,
) -> VehicleState:
    """One zero-order-hold step of the analytic dynamics."""
    next_states, _ = step_array(state.as_array(), action.as_array(), dt, params, limits, rng)
    return VehicleState.from_array(next_states)


def simulate(
    state: VehicleState,
    actions,
    dt: float,
    params: PhysicalParams,
    limits: ActuationLimits,
    seed: int | None = None,
) -> Trajectory:
    """Roll the oracle forward under a sequence of commanded actions.

    `actions` is an (n, 2) array or a sequence of Action.  The result holds
    n+1 states starting from clamp_state(state) and the n post-clamp applied
    actions.  With a seed, yaw process noise is drawn from a fresh generator
    so the run is reproducible; without one the dynamics are noise-free.
    """
    cmds = np.asarray(
        [a.as_array() if isinstance(a, Action) else a for a in actions], dtype=float
    )
    if cmds.ndim != 2 or cmds.shape[1] != 2 or cmds.shape[0] < 1:
        raise ValueError(f"actions must have shape (n>=1, 2), got {cmds.shape}")
    rng = np.random.default_rng(seed) if seed is not None else None
    n = cmds.shape[0]
    states = np.empty((n + 1, 8), dtype=float)
    applied = np.empty((n, 2), dtype=float)
    states[0] = clamp_state_array(state.as_array(), limits)
    for k in range(n):
        states[k + 1], applied[k] = step_array(states[k], cmds[k], dt, params, limits, rng)
    return Trajectory(states=states, actions=applied, dt=dt)


def projectile_airtime(
    speed: float, launch_angle: float, height_delta: float, gravity: float = 9.81
) -> float:
    """Ballistic flight time from launch to touchdown.

    Solves g t^2 / 2 - speed sin(launch_angle) t - height_delta = 0 for the
    non-negative root, where height_delta is the drop from launch point to
    landing surface (positive means landing below the launch point).

    Raises InfeasibleTrajectoryError when no non-negative real root exists
    (e.g. the landing surface is above the apex).
    """
    if not (math.isfinite(speed) and speed >= 0):
        raise ValueError(f"speed must be non-negative, got {speed!r}")
    if not (math.isfinite(gravity) and gravity > 0):
        raise ValueError(f"gravity must be positive, got {gravity!r}")
    if not (math.isfinite(launch_angle) and math.isfinite(height_delta)):
        raise ValueError("launch_angle and height_delta must be finite")
    v_up = speed * math.sin(launch_angle)
    disc = v_up * v_up + 2.0 * gravity * height_delta
    if disc < 0:
        raise InfeasibleTrajectoryError(
            f"projectile never reaches the landing surface "
            f"(speed={speed}, launch_angle={launch_angle}, height_delta={height_delta})"
        )
    t = (v_up + math.sqrt(disc)) / gravity
    if t < 0:
        raise InfeasibleTrajectoryError(
            f"no non-negative landing time (speed={speed}, "
            f"launch_angle={launch_angle}, height_delta={height_delta})"
        )
    return t


class OracleStepper:
    """Analytic dynamics behind the common forward-model interface.

    Exposes `dt`, `step(state, action)` and `step_batch(states, actions)` so
    the planner can roll out either the oracle or a learned model without
    caring which it holds.  A stepper built without an rng is deterministic
    and suitable for planning; one with an rng adds yaw process noise.
    """

    def __init__(
        self,
        params: PhysicalParams,
        limits: ActuationLimits,
        dt: float,
        rng: np.random.Generator | None = None,
    ):
        if not (math.isfinite(dt) and dt > 0):
            raise ValueError(f"dt must be positive and finite, got {dt!r}")
        self.params = params
        self.limits = limits
        self.dt = dt
        self.rng = rng

    def step(self, state: VehicleState, action: Action) -> VehicleState:
        return step(state, action, self.dt, self.params, self.limits, self.rng)

    def step_batch(self, states: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return step_array(states, actions, self.dt, self.params, self.limits, self.rng)
