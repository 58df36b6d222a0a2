"""Repeatable closed-loop batteries for comparing attitude controllers.

Five batteries cover the behaviours that matter for in-air attitude
control: tracking a moving roll/pitch curve (``tt``), reaching a random
sequence of set-points (``rsc``), arriving at a goal at a fixed deadline
(``tgr``), recovering from rate impulses while holding still (``ss``),
and correcting attitude during the ballistic window of a ramp jump
(``ramp``).  Every battery simulates against the analytic dynamics,
draws all randomness from seeds derived from (spec, trial index), and
reports per-trial values plus pooled mean/std, so two runs with the same
spec and seed produce identical metrics for any controller.

Controllers are small stateful adapters over the planner and the PID
baseline; both see exactly the same goal schedule, disturbances, and
environment noise within a trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    PITCH,
    PITCH_RATE,
    ROLL,
    ROLL_RATE,
    RPM,
    STEER,
    YAW_RATE,
    Action,
    ActuationLimits,
    GoalState,
    InfeasibleTrajectoryError,
    VehicleState,
    clamp_state,
    residual_array,
)
from .physics import DEFAULT_PARAMS, OracleStepper, PhysicalParams, projectile_airtime
from .pid import DEFAULT_PID_GAINS, PidGains, PidState, pid_step
from .planner import (
    CostSchedule,
    PlannerConfig,
    default_cost_schedule,
    horizon,
    plan_cycle,
)

SCENARIO_KINDS = ("tt", "rsc", "tgr", "ss", "ramp")

# Rate channels a disturbance impulse may hit.
_IMPULSE_AXES = (ROLL_RATE, PITCH_RATE, YAW_RATE)

_SATURATION_EPS = 1e-9


@dataclass(frozen=True)
class SuccessThresholds:
    """Entry/hold tolerances shared by the batteries.

    angle/rate bound the residuals that count as "at the goal", stuck_dwell
    is the longest tolerated actuator-saturation dwell before a trial is
    declared stuck, and landing_angle is the touchdown bar for ramp jumps.
    """

    angle: float = 0.1
    rate: float = 0.3
    stuck_dwell: float = 2.0
    landing_angle: float = 0.15

    def __post_init__(self):
        for name in ("angle", "rate", "stuck_dwell", "landing_angle"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"thresholds.{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class Disturbance:
    """A rate impulse injected into the state at a scheduled time."""

    time: float
    axis: int
    impulse: float

    def __post_init__(self):
        if not (math.isfinite(self.time) and self.time >= 0):
            raise ValueError(f"disturbance time must be non-negative, got {self.time!r}")
        if self.axis not in _IMPULSE_AXES:
            raise ValueError(f"disturbance axis must be a rate column, got {self.axis!r}")
        if not math.isfinite(self.impulse) or self.impulse == 0.0:
            raise ValueError(f"impulse must be finite and non-zero, got {self.impulse!r}")


@dataclass(frozen=True)
class ScenarioSpec:
    """Full description of one battery: kind, timing, goals, and scatter.

    Fields are grouped by the battery that reads them; the rest are
    ignored.  `duration` is the wall length of a trial for tt/ss, the
    arrival deadline for tgr, and unused for ramp where the ballistic
    airtime is derived from the launch parameters.  rsc trials run until
    the goal sequence is exhausted (at most goals_per_trial * (goal_time_cap
    + hold_time) seconds).
    """

    kind: str
    duration: float = 10.0
    control_hz: float = 50.0
    n_trials: int = 20
    plan_window: float = 1.6
    thresholds: SuccessThresholds = field(default_factory=SuccessThresholds)

    # initial-state scatter for the stand batteries (tt keeps zero scatter so
    # the tracking-error baseline of an idle controller stays interpretable)
    angle_jitter: float = 0.05
    rate_jitter: float = 0.1
    start_rpm: float = 900.0

    # tt: roll follows amplitude*sin(2 pi t / period), pitch the same at
    # twice the frequency, so the pose traces a closed figure-eight curve
    curve_amplitude: float = 0.4
    curve_period: float = 20.0

    # rsc
    goal_magnitude: float = 0.3
    goals_per_trial: int = 3
    goal_time_cap: float = 8.0
    hold_time: float = 2.0

    # tgr
    goal_roll: float = 0.2
    goal_pitch: float = 0.2

    # ss: reaction floors sit between the settled planner's idle chatter and
    # the smallest genuine corrective command seen on each channel
    disturbances: tuple[Disturbance, ...] = ()
    reaction_floor_rpm: float = 200.0
    reaction_floor_steer: float = 0.08

    # ramp
    launch_speed: float = 14.0
    ramp_angle: float = math.pi / 4
    height_delta: float = 0.0
    launch_rpm: float = 900.0
    landing_rpm: float = 1000.0
    launch_roll_jitter: float = 0.25
    launch_pitch_jitter: float = 0.15
    launch_rate_jitter: float = 0.8
    max_certify_draws: int = 50

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}, expected one of {SCENARIO_KINDS}")
        for name in ("duration", "control_hz", "plan_window", "curve_period",
                     "goal_time_cap", "launch_speed"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        for name in ("angle_jitter", "rate_jitter", "hold_time", "goal_magnitude",
                     "curve_amplitude", "height_delta", "launch_roll_jitter",
                     "launch_pitch_jitter", "launch_rate_jitter"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be non-negative, got {value!r}")
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be at least 1, got {self.n_trials}")
        if self.goals_per_trial < 1:
            raise ValueError(f"goals_per_trial must be at least 1, got {self.goals_per_trial}")
        if self.max_certify_draws < 1:
            raise ValueError(f"max_certify_draws must be at least 1, got {self.max_certify_draws}")
        for name in ("reaction_floor_rpm", "reaction_floor_steer"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if not 0 < self.ramp_angle < math.pi / 2:
            raise ValueError(f"ramp_angle must lie in (0, pi/2), got {self.ramp_angle!r}")
        for dist in self.disturbances:
            if dist.time >= self.duration:
                raise ValueError(
                    f"disturbance at t={dist.time} falls outside the {self.duration} s trial"
                )
        if not (math.isfinite(self.goal_roll) and math.isfinite(self.goal_pitch)):
            raise ValueError("goal_roll and goal_pitch must be finite")


def default_spec(kind: str, n_trials: int | None = None) -> ScenarioSpec:
    """Canonical spec for each battery; n_trials overrides the default count."""
    if kind == "tt":
        # the shorter window keeps the receding-horizon lag small on a curve
        # that never stops moving
        spec = ScenarioSpec(
            kind="tt", duration=20.0, plan_window=0.8, angle_jitter=0.0, rate_jitter=0.0
        )
    elif kind == "rsc":
        spec = ScenarioSpec(kind="rsc", duration=30.0)
    elif kind == "tgr":
        spec = ScenarioSpec(kind="tgr", duration=4.0)
    elif kind == "ss":
        spec = ScenarioSpec(
            kind="ss",
            duration=12.0,
            disturbances=(
                Disturbance(2.0, ROLL_RATE, 0.6),
                Disturbance(7.0, PITCH_RATE, -0.6),
            ),
        )
    elif kind == "ramp":
        spec = ScenarioSpec(kind="ramp", n_trials=7)
    else:
        raise ValueError(f"unknown scenario kind {kind!r}, expected one of {SCENARIO_KINDS}")
    if n_trials is not None:
        spec = ScenarioSpec(**{**spec.__dict__, "n_trials": n_trials})
    return spec


@dataclass(frozen=True)
class TrialResult:
    """Metric samples from one trial plus its success/censoring flags."""

    values: dict[str, tuple[float, ...]]
    success: bool
    censored: bool


@dataclass(frozen=True)
class Metrics:
    """Per-trial results of one battery under one controller."""

    kind: str
    controller: str
    trials: tuple[TrialResult, ...]

    def success_rate(self) -> float:
        return sum(t.success for t in self.trials) / len(self.trials)

    def censored_count(self) -> int:
        return sum(t.censored for t in self.trials)

    def pooled(self) -> dict[str, tuple[float, float, int]]:
        """Pool each metric across trials: name -> (mean, std, sample count).

        Censored samples enter the pool at their recorded (censoring-bound)
        values; metrics with no samples report (nan, nan, 0).
        """
        keys: list[str] = []
        for trial in self.trials:
            for key in trial.values:
                if key not in keys:
                    keys.append(key)
        out: dict[str, tuple[float, float, int]] = {}
        for key in keys:
            samples = [v for t in self.trials for v in t.values.get(key, ())]
            if samples:
                arr = np.asarray(samples, dtype=float)
                out[key] = (float(arr.mean()), float(arr.std()), arr.size)
            else:
                out[key] = (math.nan, math.nan, 0)
        return out


class PlannerController:
    """Sampling planner wrapped for closed-loop use.

    Carries the warm start between cycles and draws its action samples from
    the generator installed by reset(), so a trial is a pure function of the
    seeds handed out by the harness.  The window argument of act() sets the
    planning horizon: the stand batteries pass a rolling lookahead, the
    deadline batteries pass the true time remaining.  Being predictive, the
    planner samples the goal schedule where it will stand when the window
    closes; chasing a moving goal's current position would lag it by
    roughly one window.
    """

    name = "dom"

    def __init__(
        self,
        model,
        cfg: PlannerConfig | None = None,
        schedule: CostSchedule | None = None,
    ):
        self.model = model
        self.cfg = cfg if cfg is not None else PlannerConfig(n_samples=600)
        self.schedule = schedule if schedule is not None else default_cost_schedule()
        self._rng = np.random.default_rng(self.cfg.seed)
        self._last_best = Action()

    def reset(self, rng: np.random.Generator) -> None:
        self._rng = rng
        self._last_best = Action()

    def act(self, state: VehicleState, goal_fn, t: float, window: float, period: float) -> Action:
        result = plan_cycle(
            state, goal_fn(t + window), window, self._last_best,
            self.model, self.cfg, self.schedule, self._rng,
        )
        self._last_best = result.best_action
        return result.best_action


class PidController:
    """PID baseline wrapped for closed-loop use.

    Reactive: regulates toward the goal as it stands now and ignores the
    planning window.
    """

    name = "pid"

    def __init__(self, gains: PidGains = DEFAULT_PID_GAINS, limits: ActuationLimits | None = None):
        self.gains = gains
        self.limits = limits if limits is not None else ActuationLimits()
        self._memory = PidState()

    def reset(self, rng: np.random.Generator) -> None:
        self._memory = PidState()

    def act(self, state: VehicleState, goal_fn, t: float, window: float, period: float) -> Action:
        action, self._memory = pid_step(
            self.gains, state, goal_fn(t), period, self._memory, self.limits
        )
        return action


class ZeroController:
    """Commands nothing; the do-nothing reference point for every metric."""

    name = "zero"

    def reset(self, rng: np.random.Generator) -> None:
        pass

    def act(self, state: VehicleState, goal_fn, t: float, window: float, period: float) -> Action:
        return Action()


@dataclass(frozen=True)
class TrialHistory:
    """Sampled closed-loop run: n+1 states, n actions, n active goals."""

    times: np.ndarray
    states: np.ndarray
    actions: np.ndarray
    goals: np.ndarray
    period: float

    @property
    def n_cycles(self) -> int:
        return self.actions.shape[0]


def _concat_histories(parts: list[TrialHistory]) -> TrialHistory:
    """Join back-to-back segments, dropping the shared boundary states."""
    if len(parts) == 1:
        return parts[0]
    times = [parts[0].times]
    states = [parts[0].states]
    actions = [p.actions for p in parts]
    goals = [p.goals for p in parts]
    offset = parts[0].times[-1]
    for part in parts[1:]:
        times.append(part.times[1:] + offset)
        states.append(part.states[1:])
        offset += part.times[-1]
    return TrialHistory(
        times=np.concatenate(times),
        states=np.concatenate(states),
        actions=np.concatenate(actions),
        goals=np.concatenate(goals),
        period=parts[0].period,
    )


def _cycle_count(duration: float, hz: float) -> int:
    return max(1, int(math.floor(duration * hz + 0.5 + 1e-9)))


def _closed_loop(
    state: VehicleState,
    controller,
    env: OracleStepper,
    goal_fn,
    window_fn,
    n_cycles: int,
    period: float,
    disturbances: tuple[Disturbance, ...] = (),
    stop_fn=None,
) -> TrialHistory:
    """Run the control loop for up to n_cycles, recording everything.

    Each cycle: inject any due impulses, query the controller with the
    current goal and window, then advance the environment one period.
    stop_fn(t, state), checked before acting, ends the trial early (the
    cycle it fires on is not simulated).
    """
    pending = sorted(disturbances, key=lambda d: d.time)
    times = [0.0]
    states = [clamp_state(state, env.limits).as_array()]
    actions: list[np.ndarray] = []
    goals: list[np.ndarray] = []
    current = VehicleState.from_array(states[0])
    for k in range(n_cycles):
        t = k * period
        while pending and pending[0].time <= t + 1e-12:
            dist = pending.pop(0)
            bumped = current.as_array()
            bumped[dist.axis] += dist.impulse
            current = VehicleState.from_array(bumped)
            states[-1] = bumped
        if stop_fn is not None and stop_fn(t, current):
            break
        goal = goal_fn(t)
        action = controller.act(current, goal_fn, t, window_fn(t), period)
        current = env.step(current, action)
        times.append((k + 1) * period)
        states.append(current.as_array())
        actions.append(action.as_array())
        goals.append(goal.as_array())
    return TrialHistory(
        times=np.asarray(times),
        states=np.asarray(states),
        actions=np.asarray(actions) if actions else np.empty((0, 2)),
        goals=np.asarray(goals) if goals else np.empty((0, 8)),
        period=period,
    )


def _angle_errors(history: TrialHistory) -> np.ndarray:
    """Wrapped |roll, pitch| residuals of each pre-step state vs its goal, (n, 2)."""
    if history.n_cycles == 0:
        return np.empty((0, 2))
    res = residual_array(history.states[:-1], history.goals)
    return np.abs(res[:, [ROLL, PITCH]])


def _rate_errors(history: TrialHistory) -> np.ndarray:
    if history.n_cycles == 0:
        return np.empty((0, 2))
    res = residual_array(history.states[:-1], history.goals)
    return np.abs(res[:, [ROLL_RATE, PITCH_RATE]])


def longest_saturated_dwell(states: np.ndarray, limits: ActuationLimits, period: float) -> float:
    """Longest continuous stretch (seconds) with an actuator pinned at a limit."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    rpm = states[:, RPM]
    steer = states[:, STEER]
    saturated = (
        (rpm <= limits.rpm_min + _SATURATION_EPS)
        | (rpm >= limits.rpm_max - _SATURATION_EPS)
        | (steer <= limits.steer_min + _SATURATION_EPS)
        | (steer >= limits.steer_max - _SATURATION_EPS)
    )
    longest = run = 0
    for flag in saturated:
        run = run + 1 if flag else 0
        longest = max(longest, run)
    # n consecutive saturated samples span n-1 periods
    return max(0, longest - 1) * period


def max_effort_reachable(
    state: VehicleState,
    goal: GoalState,
    window: float,
    params: PhysicalParams,
    limits: ActuationLimits,
    angle_tol: float,
    dt: float = 0.2,
) -> bool:
    """Scripted reachability check: can any two-phase bang-bang policy land it?

    Enumerates two-phase policies: a constant action pair until a switch
    step, another constant pair after, over a small ladder of effort levels
    per channel (full, quarter, sixteenth, idle, in both directions) and
    every switch step inside the window, rolled out through the noise-free
    dynamics.  Returns True when at least one policy ends with both roll
    and pitch within angle_tol of the goal.  The fractional levels matter:
    with full effort only, the smallest achievable pose displacement per
    switch step is coarser than a tight tolerance, and nearly-correct
    states would paradoxically fail the check.  This still deliberately
    under-approximates reachability (richer action sequences exist), so a
    certificate here means any competent controller has a real margin.
    """
    h = horizon(window, dt)
    stepper = OracleStepper(params, limits, dt=dt, rng=None)
    fractions = np.array([-1.0, -0.25, -0.0625, 0.0, 0.0625, 0.25, 1.0])
    levels = (
        np.where(fractions < 0, -fractions * limits.rpm_rate_min, fractions * limits.rpm_rate_max),
        np.where(fractions < 0, -fractions * limits.steer_rate_min, fractions * limits.steer_rate_max),
    )
    grid = np.stack(np.meshgrid(*levels, indexing="ij"), axis=-1).reshape(-1, 2)
    n_lv = grid.shape[0]
    phase_a = np.repeat(grid, n_lv * (h + 1), axis=0)
    phase_b = np.tile(np.repeat(grid, h + 1, axis=0), (n_lv, 1))
    switch = np.tile(np.arange(h + 1), n_lv * n_lv)
    states = np.tile(clamp_state(state, limits).as_array(), (phase_a.shape[0], 1))
    for k in range(h):
        acts = np.where((k < switch)[:, None], phase_a, phase_b)
        states, _ = stepper.step_batch(states, acts)
    res = residual_array(states, goal.as_array())
    ok = (np.abs(res[:, ROLL]) <= angle_tol) & (np.abs(res[:, PITCH]) <= angle_tol)
    return bool(ok.any())


def _trial_rngs(seed: int, trial: int) -> tuple[np.random.Generator, ...]:
    children = np.random.SeedSequence((seed, trial)).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def _jittered_start(spec: ScenarioSpec, rng: np.random.Generator) -> VehicleState:
    return VehicleState(
        roll=float(rng.uniform(-spec.angle_jitter, spec.angle_jitter)),
        roll_rate=float(rng.uniform(-spec.rate_jitter, spec.rate_jitter)),
        pitch=float(rng.uniform(-spec.angle_jitter, spec.angle_jitter)),
        pitch_rate=float(rng.uniform(-spec.rate_jitter, spec.rate_jitter)),
        rpm=spec.start_rpm,
    )


def _curve_goal(spec: ScenarioSpec, t: float) -> GoalState:
    """Moving goal on the figure-eight curve, rates set to the curve velocity."""
    amp = spec.curve_amplitude
    omega = 2.0 * math.pi / spec.curve_period
    return GoalState(
        roll=amp * math.sin(omega * t),
        roll_rate=amp * omega * math.cos(omega * t),
        pitch=amp * math.sin(2.0 * omega * t),
        pitch_rate=2.0 * amp * omega * math.cos(2.0 * omega * t),
        rpm=spec.start_rpm,
    )


def _run_tt(
    spec: ScenarioSpec,
    controller,
    params: PhysicalParams,
    limits: ActuationLimits,
    seed: int,
    record=None,
) -> Metrics:
    """Curve tracking: mean angular error plus the time to lock onto the curve.

    completion_time is the first moment after which the pose stays within
    the angle threshold of the moving goal for the rest of the trial; the
    final streak must last at least hold_time, otherwise a frozen pose
    would count as locked on whenever the periodic goal swings back
    through it near the end.  Trials that never lock on are censored at
    the full duration.
    """
    period = 1.0 / spec.control_hz
    n = _cycle_count(spec.duration, spec.control_hz)
    min_lock = _cycle_count(min(spec.hold_time, spec.duration), spec.control_hz)
    trials = []
    for i in range(spec.n_trials):
        env_rng, ctrl_rng, draw_rng = _trial_rngs(seed, i)
        env = OracleStepper(params, limits, dt=period, rng=env_rng)
        controller.reset(ctrl_rng)
        start = _jittered_start(spec, draw_rng)
        history = _closed_loop(
            start, controller, env, lambda t: _curve_goal(spec, t),
            lambda t: spec.plan_window, n, period,
        )
        if record is not None:
            record(i, history)
        err = _angle_errors(history)
        tracking_error = float(err.mean())
        on_curve = (err <= spec.thresholds.angle).all(axis=1)
        trailing = 0
        for flag in on_curve[::-1]:
            if not flag:
                break
            trailing += 1
        censored = trailing < min_lock
        completion = spec.duration if censored else (n - trailing) * period
        stuck = longest_saturated_dwell(history.states, limits, period)
        success = (not censored) and stuck <= spec.thresholds.stuck_dwell
        trials.append(TrialResult(
            values={
                "tracking_error": (tracking_error,),
                "completion_time": (completion,),
            },
            success=success,
            censored=censored,
        ))
    return Metrics(kind="tt", controller=controller.name, trials=tuple(trials))


def _rsc_goal_pool(spec: ScenarioSpec) -> list[GoalState]:
    mag = spec.goal_magnitude
    return [
        GoalState(roll=mag, rpm=spec.start_rpm),
        GoalState(roll=-mag, rpm=spec.start_rpm),
        GoalState(pitch=mag, rpm=spec.start_rpm),
        GoalState(pitch=-mag, rpm=spec.start_rpm),
    ]


def _within(state: VehicleState, goal: GoalState, thresholds: SuccessThresholds) -> bool:
    res = residual_array(state.as_array(), goal.as_array())
    return bool(
        abs(res[ROLL]) <= thresholds.angle
        and abs(res[PITCH]) <= thresholds.angle
        and abs(res[ROLL_RATE]) <= thresholds.rate
        and abs(res[PITCH_RATE]) <= thresholds.rate
    )


def _run_rsc(
    spec: ScenarioSpec,
    controller,
    params: PhysicalParams,
    limits: ActuationLimits,
    seed: int,
    record=None,
) -> Metrics:
    """Random set-point sequence: per-goal time to reach, then a timed hold.

    A goal is reached at the first cycle whose state sits inside the angle
    and rate thresholds; goals not reached within goal_time_cap are censored
    at the cap and the next goal is drawn anyway.  hold_error averages the
    angular residual over the hold window following a reach.
    """
    period = 1.0 / spec.control_hz
    pool = _rsc_goal_pool(spec)
    cap_cycles = _cycle_count(spec.goal_time_cap, spec.control_hz)
    hold_cycles = _cycle_count(spec.hold_time, spec.control_hz)
    trials = []
    for i in range(spec.n_trials):
        env_rng, ctrl_rng, draw_rng = _trial_rngs(seed, i)
        env = OracleStepper(params, limits, dt=period, rng=env_rng)
        controller.reset(ctrl_rng)
        state = _jittered_start(spec, draw_rng)
        times: list[float] = []
        hold_errors: list[float] = []
        goal_ok: list[bool] = []
        segments: list[TrialHistory] = []
        any_censored = False
        prev_idx = -1
        for _ in range(spec.goals_per_trial):
            choices = [j for j in range(len(pool)) if j != prev_idx]
            idx = int(draw_rng.choice(choices))
            prev_idx = idx
            goal = pool[idx]
            seek = _closed_loop(
                state, controller, env, lambda t: goal, lambda t: spec.plan_window,
                cap_cycles, period,
                stop_fn=lambda t, s: _within(s, goal, spec.thresholds),
            )
            state = VehicleState.from_array(seek.states[-1])
            segments.append(seek)
            reached = seek.n_cycles < cap_cycles
            if not reached:
                # the final state may satisfy the stop condition exactly at the cap
                reached = _within(state, goal, spec.thresholds)
            if reached:
                times.append(seek.n_cycles * period)
                hold = _closed_loop(
                    state, controller, env, lambda t: goal,
                    lambda t: spec.plan_window, hold_cycles, period,
                )
                state = VehicleState.from_array(hold.states[-1])
                segments.append(hold)
                err = _angle_errors(hold)
                hold_errors.append(float(err.mean()))
                goal_ok.append(bool((err <= spec.thresholds.angle).all()))
            else:
                times.append(spec.goal_time_cap)
                goal_ok.append(False)
                any_censored = True
        if record is not None:
            record(i, _concat_histories(segments))
        trials.append(TrialResult(
            values={
                "time_to_goal": tuple(times),
                "hold_error": tuple(hold_errors),
            },
            success=all(goal_ok),
            censored=any_censored,
        ))
    return Metrics(kind="rsc", controller=controller.name, trials=tuple(trials))


def _run_tgr(
    spec: ScenarioSpec,
    controller,
    params: PhysicalParams,
    limits: ActuationLimits,
    seed: int,
    record=None,
) -> Metrics:
    """Timed arrival: be at the goal exactly when the deadline strikes.

    arrival is the start of the within-threshold streak that persists
    through the deadline; timing_error is |arrival - deadline|, censored at
    the full deadline when the pose is outside the threshold at the end.
    The start state of every trial is certified by the max-effort
    reachability check and the flag is recorded alongside the metrics.

    The planning window is the time left to the deadline capped at
    plan_window: a sampled constant action describes at most a second or
    two of useful manoeuvre, and handing the planner the full deadline as
    one window makes it commit to sweeping open-loop arcs that it then
    has to unwind.
    """
    period = 1.0 / spec.control_hz
    n = _cycle_count(spec.duration, spec.control_hz)
    goal = GoalState(roll=spec.goal_roll, pitch=spec.goal_pitch, rpm=spec.start_rpm)
    trials = []
    for i in range(spec.n_trials):
        env_rng, ctrl_rng, draw_rng = _trial_rngs(seed, i)
        env = OracleStepper(params, limits, dt=period, rng=env_rng)
        controller.reset(ctrl_rng)
        start = _jittered_start(spec, draw_rng)
        certified = max_effort_reachable(
            start, goal, spec.duration, params, limits, spec.thresholds.angle
        )
        history = _closed_loop(
            start, controller, env, lambda t: goal,
            lambda t: min(spec.plan_window, spec.duration - t), n, period,
        )
        if record is not None:
            record(i, history)
        res = residual_array(history.states, goal.as_array())
        inside = (np.abs(res[:, ROLL]) <= spec.thresholds.angle) & (
            np.abs(res[:, PITCH]) <= spec.thresholds.angle
        )
        trailing = 0
        for flag in inside[::-1]:
            if not flag:
                break
            trailing += 1
        censored = trailing == 0
        if censored:
            timing_error = spec.duration
        else:
            arrival = (inside.size - trailing) * period
            timing_error = abs(arrival - spec.duration)
        terminal_error = float(np.abs(res[-1, [ROLL, PITCH]]).max())
        trials.append(TrialResult(
            values={
                "timing_error": (timing_error,),
                "terminal_error": (terminal_error,),
                "certified": (float(certified),),
            },
            success=not censored,
            censored=censored,
        ))
    return Metrics(kind="tgr", controller=controller.name, trials=tuple(trials))


def _run_ss(
    spec: ScenarioSpec,
    controller,
    params: PhysicalParams,
    limits: ActuationLimits,
    seed: int,
    record=None,
) -> Metrics:
    """Hold still through scheduled rate impulses.

    For each impulse: reaction_latency is the delay until the commanded
    action first exceeds the reaction floor on the channel that corrects
    the disturbed axis (steering for roll, wheel acceleration for pitch,
    either channel for yaw), and correction_time the delay until the state
    re-enters the angle and rate thresholds.  Both are censored at the
    next impulse (or trial end).
    """
    period = 1.0 / spec.control_hz
    n = _cycle_count(spec.duration, spec.control_hz)
    goal = GoalState(rpm=spec.start_rpm)
    schedule = sorted(spec.disturbances, key=lambda d: d.time)
    trials = []
    for i in range(spec.n_trials):
        env_rng, ctrl_rng, draw_rng = _trial_rngs(seed, i)
        env = OracleStepper(params, limits, dt=period, rng=env_rng)
        controller.reset(ctrl_rng)
        start = _jittered_start(spec, draw_rng)
        history = _closed_loop(
            start, controller, env, lambda t: goal,
            lambda t: spec.plan_window, n, period, disturbances=spec.disturbances,
        )
        if record is not None:
            record(i, history)
        err_a = _angle_errors(history)
        err_r = _rate_errors(history)
        settled = (err_a <= spec.thresholds.angle).all(axis=1) & (
            err_r <= spec.thresholds.rate
        ).all(axis=1)
        acting_rpm = np.abs(history.actions[:, 0]) >= spec.reaction_floor_rpm
        acting_steer = np.abs(history.actions[:, 1]) >= spec.reaction_floor_steer
        latencies: list[float] = []
        corrections: list[float] = []
        any_censored = False
        for j, dist in enumerate(schedule):
            if dist.axis == ROLL_RATE:
                acting = acting_steer
            elif dist.axis == PITCH_RATE:
                acting = acting_rpm
            else:
                acting = acting_rpm | acting_steer
            k0 = min(int(math.ceil(dist.time / period - 1e-9)), n - 1)
            t0 = k0 * period
            window_end = schedule[j + 1].time if j + 1 < len(schedule) else spec.duration
            k1 = _cycle_count(window_end, spec.control_hz)
            hit = np.flatnonzero(acting[k0:k1])
            if hit.size:
                latencies.append(t0 + hit[0] * period - dist.time)
            else:
                latencies.append(window_end - dist.time)
                any_censored = True
            back = np.flatnonzero(settled[k0:k1])
            if back.size:
                corrections.append(t0 + back[0] * period - dist.time)
            else:
                corrections.append(window_end - dist.time)
                any_censored = True
        stuck = longest_saturated_dwell(history.states, limits, period)
        success = (not any_censored) and stuck <= spec.thresholds.stuck_dwell
        trials.append(TrialResult(
            values={
                "reaction_latency": tuple(latencies),
                "correction_time": tuple(corrections),
            },
            success=success,
            censored=any_censored,
        ))
    return Metrics(kind="ss", controller=controller.name, trials=tuple(trials))


def draw_certified_launch(
    spec: ScenarioSpec,
    airtime: float,
    params: PhysicalParams,
    limits: ActuationLimits,
    rng: np.random.Generator,
) -> tuple[VehicleState, int]:
    """Sample launch states until one passes the max-effort landing check.

    Returns the certified state and how many draws it took.  Raises
    InfeasibleTrajectoryError when max_certify_draws samples in a row fail,
    which signals that the configured scatter is wider than the vehicle can
    correct within the airtime.
    """
    goal = GoalState(rpm=spec.landing_rpm)
    for draw in range(1, spec.max_certify_draws + 1):
        state = VehicleState(
            roll=float(rng.uniform(-spec.launch_roll_jitter, spec.launch_roll_jitter)),
            roll_rate=float(rng.uniform(-spec.launch_rate_jitter, spec.launch_rate_jitter)),
            pitch=spec.ramp_angle
            + float(rng.uniform(-spec.launch_pitch_jitter, spec.launch_pitch_jitter)),
            pitch_rate=float(rng.uniform(-spec.launch_rate_jitter, spec.launch_rate_jitter)),
            rpm=spec.launch_rpm,
        )
        if max_effort_reachable(state, goal, airtime, params, limits, spec.thresholds.angle):
            return state, draw
    raise InfeasibleTrajectoryError(
        f"no certified-correctable launch state found in {spec.max_certify_draws} draws"
    )


def _run_ramp(
    spec: ScenarioSpec,
    controller,
    params: PhysicalParams,
    limits: ActuationLimits,
    seed: int,
    record=None,
) -> Metrics:
    """Ramp jump: correct the attitude during the ballistic window.

    The flight lasts exactly the projectile airtime of the launch
    parameters; the goal is a flat, still pose at the landing wheel speed.
    Launch states are redrawn until the max-effort check certifies them as
    correctable, so a miss at touchdown is the controller's fault and not
    the draw's.
    """
    airtime = projectile_airtime(
        spec.launch_speed, spec.ramp_angle, spec.height_delta, params.gravity
    )
    period = 1.0 / spec.control_hz
    n = _cycle_count(airtime, spec.control_hz)
    goal = GoalState(rpm=spec.landing_rpm)
    trials = []
    for i in range(spec.n_trials):
        env_rng, ctrl_rng, draw_rng = _trial_rngs(seed, i)
        env = OracleStepper(params, limits, dt=period, rng=env_rng)
        controller.reset(ctrl_rng)
        start, draws = draw_certified_launch(spec, airtime, params, limits, draw_rng)
        history = _closed_loop(
            start, controller, env, lambda t: goal,
            lambda t: airtime - t, n, period,
        )
        if record is not None:
            record(i, history)
        landing = history.states[-1]
        roll_land = float(landing[ROLL])
        pitch_land = float(landing[PITCH])
        bar = spec.thresholds.landing_angle
        trials.append(TrialResult(
            values={
                "landing_roll": (roll_land,),
                "landing_pitch": (pitch_land,),
                "certify_draws": (float(draws),),
            },
            success=abs(roll_land) <= bar and abs(pitch_land) <= bar,
            censored=False,
        ))
    return Metrics(kind="ramp", controller=controller.name, trials=tuple(trials))


_RUNNERS = {
    "tt": _run_tt,
    "rsc": _run_rsc,
    "tgr": _run_tgr,
    "ss": _run_ss,
    "ramp": _run_ramp,
}


def run_scenario(
    spec: ScenarioSpec,
    controller,
    params: PhysicalParams = DEFAULT_PARAMS,
    limits: ActuationLimits | None = None,
    seed: int = 0,
    record=None,
) -> Metrics:
    """Run one battery and return its per-trial metrics.

    Deterministic in (spec, seed): every trial derives its environment
    noise, controller sampling, and state/goal draws from SeedSequence
    ((seed, trial)), so results do not depend on n_trials or on which
    controller ran first.

    `record(trial_index, TrialHistory)`, when given, receives every
    trial's sampled closed-loop run for plotting or export; it does not
    influence the metrics.
    """
    limits = limits if limits is not None else ActuationLimits()
    return _RUNNERS[spec.kind](spec, controller, params, limits, seed, record)


def compare(
    specs,
    controllers,
    params: PhysicalParams = DEFAULT_PARAMS,
    limits: ActuationLimits | None = None,
    seed: int = 0,
) -> list[dict]:
    """Run every battery under every controller and tabulate pooled metrics.

    controllers maps column label to controller instance.  Returns one row
    per (scenario, metric) holding mean/std/n per controller, plus a
    success_rate row per scenario, in a shape ready for CSV export.
    """
    rows: list[dict] = []
    for spec in specs:
        results = {
            label: run_scenario(spec, ctrl, params=params, limits=limits, seed=seed)
            for label, ctrl in controllers.items()
        }
        keys: list[str] = []
        for metrics in results.values():
            for key in metrics.pooled():
                if key not in keys:
                    keys.append(key)
        for key in keys:
            row: dict = {"scenario": spec.kind, "metric": key}
            for label, metrics in results.items():
                mean, std, count = metrics.pooled().get(key, (math.nan, math.nan, 0))
                row[f"{label}_mean"] = mean
                row[f"{label}_std"] = std
                row[f"{label}_n"] = count
            rows.append(row)
        row = {"scenario": spec.kind, "metric": "success_rate"}
        for label, metrics in results.items():
            row[f"{label}_mean"] = metrics.success_rate()
            row[f"{label}_std"] = 0.0
            row[f"{label}_n"] = len(metrics.trials)
        rows.append(row)
    return rows
