"""Decoupled PID baseline controller.

Two independent loops: pitch error drives the wheel acceleration command and
roll error drives the steering-rate command.  The loop outputs are the plain
PID sums, so actuation-direction signs belong in the gains (the pitch loop
uses negative gains because accelerating the wheels pitches the chassis the
other way).  Outputs pass through the shared action clamp, and integrators
are clamped for anti-windup.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    Action,
    ActuationLimits,
    GoalState,
    VehicleState,
    clamp_action,
    wrap_angle,
)


@dataclass(frozen=True)
class LoopGains:
    """Gains of one PID loop plus its integrator clamp."""

    kp: float
    ki: float
    kd: float
    integral_limit: float


@dataclass(frozen=True)
class PidGains:
    """Pitch-to-rpm_rate and roll-to-steer_rate loop gains."""

    pitch: LoopGains
    roll: LoopGains


@dataclass(frozen=True)
class PidState:
    """Controller memory carried between steps."""

    pitch_integral: float = 0.0
    pitch_prev_error: float | None = None
    roll_integral: float = 0.0
    roll_prev_error: float | None = None


# Tuned by scripts/tune_pid.py: grid search on the analytic dynamics over
# the curve-tracking battery, best mean tracking error wins.  The loops act
# through channels with opposite-signed authorities, hence the signs.  See
# that script to reproduce.
DEFAULT_PID_GAINS = PidGains(
    pitch=LoopGains(
        kp=-190985.9317102744,
        ki=-19098.593171027438,
        kd=-12223.099629457562,
        integral_limit=0.5,
    ),
    roll=LoopGains(
        kp=84.88263631567752,
        ki=8.48826363156775,
        kd=10.864977448406723,
        integral_limit=0.5,
    ),
)


def _loop(
    gains: LoopGains, error: float, integral: float, prev_error: float | None, dt: float
) -> tuple[float, float, float]:
    integral = integral + error * dt
    integral = min(max(integral, -gains.integral_limit), gains.integral_limit)
    derivative = 0.0 if prev_error is None else wrap_angle(error - prev_error) / dt
    output = gains.kp * error + gains.ki * integral + gains.kd * derivative
    return output, integral, error


def pid_step(
    gains: PidGains,
    state: VehicleState,
    goal: GoalState,
    dt_control: float,
    pid_state: PidState,
    limits: ActuationLimits,
) -> tuple[Action, PidState]:
    """One control step.  Returns the clamped action and the next memory.

    Errors are shortest-arc angle residuals goal - state.  The function is
    pure: identical inputs give identical outputs.
    """
    if dt_control <= 0:
        raise ValueError(f"dt_control must be positive, got {dt_control!r}")
    pitch_error = wrap_angle(goal.pitch - state.pitch)
    roll_error = wrap_angle(goal.roll - state.roll)
    rpm_rate, pitch_integral, pitch_prev = _loop(
        gains.pitch, pitch_error, pid_state.pitch_integral, pid_state.pitch_prev_error, dt_control
    )
    steer_rate, roll_integral, roll_prev = _loop(
        gains.roll, roll_error, pid_state.roll_integral, pid_state.roll_prev_error, dt_control
    )
    action = clamp_action(Action(rpm_rate, steer_rate), state, limits, dt_control)
    next_state = PidState(
        pitch_integral=pitch_integral,
        pitch_prev_error=pitch_prev,
        roll_integral=roll_integral,
        roll_prev_error=roll_prev,
    )
    return action, next_state
