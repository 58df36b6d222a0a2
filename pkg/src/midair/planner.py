"""Fixed-horizon sampling planner for in-air attitude maneuvers.

Each planning cycle rolls the forward model out to the predicted touchdown
time under N candidate actions, scores the rollouts with a time-varying
weighted quadratic cost, and returns the cheapest candidate.  Candidates are
constant (rpm_rate, steer_rate) pairs drawn uniformly around the previous
best action, so successive cycles refine the plan while the horizon shrinks
with the remaining flight time.  If no candidate reaches the goal within
tolerance the cycle falls back to an alternate goal that keeps the pose
targets but concedes the rate and wheel-speed targets.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    PITCH,
    PITCH_RATE,
    ROLL,
    ROLL_RATE,
    RPM,
    YAW,
    YAW_RATE,
    Action,
    ActuationLimits,
    DEFAULT_LIMITS,
    GoalState,
    PlanningWindowExpiredError,
    Trajectory,
    VehicleState,
    clamp_action,
    clamp_state,
    residual_array,
)

INF = float("inf")


@dataclass(frozen=True)
class PlannerConfig:
    """Sampling planner settings.

    dt is the rollout integration interval, n_samples the candidate count per
    cycle, the sigmas the half-widths of the uniform sampling box around the
    previous best action.  feasibility_tolerance holds per-dimension residual
    thresholds in state order; yaw entries default to infinity because yaw
    has no actuation channel.  workers caps rollout batch parallelism.
    """

    dt: float = 0.2
    n_samples: int = 4000
    sigma_rpm_rate: float = 2000.0
    sigma_steer_rate: float = 0.2
    limits: ActuationLimits = field(default_factory=ActuationLimits)
    replan_hz: float = 50.0
    feasibility_tolerance: tuple[float, ...] = (0.1, 0.5, 0.1, 0.5, INF, INF, 250.0, 0.15)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not (self.sigma_rpm_rate > 0 and self.sigma_steer_rate > 0):
            raise ValueError("sampling sigmas must be positive")
        if not (math.isfinite(self.replan_hz) and self.replan_hz > 0):
            raise ValueError(f"replan_hz must be positive, got {self.replan_hz!r}")
        if len(self.feasibility_tolerance) != 8:
            raise ValueError("feasibility_tolerance needs 8 entries")
        if any(t < 0 for t in self.feasibility_tolerance):
            raise ValueError("feasibility tolerances must be non-negative")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class CostSchedule:
    """Time-varying per-dimension quadratic cost.

    For each state dimension, `weights` holds piecewise-constant segments as
    (u_breakpoint, weight) pairs over normalized rollout time u in [0, 1];
    the weight of the last breakpoint at or below u applies.  `scales`
    multiply the residuals before squaring so dimensions with different
    units are comparable.
    """

    weights: tuple[tuple[tuple[float, float], ...], ...]
    scales: tuple[float, ...]

    def __post_init__(self):
        if len(self.weights) != 8 or len(self.scales) != 8:
            raise ValueError("cost schedule needs 8 weight functions and 8 scales")
        for dim, segments in enumerate(self.weights):
            if not segments or segments[0][0] != 0.0:
                raise ValueError(f"dimension {dim}: first breakpoint must be at u=0")
            breaks = [u for u, _ in segments]
            if breaks != sorted(breaks):
                raise ValueError(f"dimension {dim}: breakpoints must be sorted")
            if any(w < 0 for _, w in segments):
                raise ValueError(f"dimension {dim}: weights must be non-negative")
        if any(not (math.isfinite(s) and s > 0) for s in self.scales):
            raise ValueError("scales must be positive and finite")
        breakpoints = sorted({u for segs in self.weights for u, _ in segs})
        for u in breakpoints:
            if all(self._weight_at(dim, u) == 0 for dim in range(8)):
                raise ValueError(f"all weights vanish at u={u}")

    def _weight_at(self, dim: int, u: float) -> float:
        value = 0.0
        for u_break, weight in self.weights[dim]:
            if u_break <= u:
                value = weight
            else:
                break
        return value

    def weights_at(self, u: float) -> np.ndarray:
        """Weight 8-vector at normalized time u (clipped to [0, 1])."""
        u = min(max(u, 0.0), 1.0)
        return np.array([self._weight_at(dim, u) for dim in range(8)])

    def weight_matrix(self, horizon: int) -> np.ndarray:
        """(horizon+1, 8) weights at u = k / horizon for k = 0..horizon."""
        return np.stack([self.weights_at(k / horizon) for k in range(horizon + 1)])


def default_cost_schedule(limits: ActuationLimits = DEFAULT_LIMITS) -> CostSchedule:
    """Pose-first-then-rates schedule used throughout.

    Angles dominate the first half of a rollout, angular rates the second
    half; rpm and steer targets only matter near touchdown.  Residual scales
    put one "unit" at pi rad, 2 pi rad/s, full rpm range, full steer throw.
    The late steer weight is kept far below the rpm weight on purpose: a net
    roll-rate change forces the steering to end displaced (precession torque
    integrates steering motion), so taxing the terminal steering angle at
    full weight makes holding a roll error cheaper than fixing it.
    """
    angle = ((0.0, 1.0), (0.5, 0.3))
    rate = ((0.0, 0.1), (0.5, 1.0))
    rpm_w = ((0.0, 0.0), (0.75, 1.0))
    steer_w = ((0.0, 0.0), (0.75, 0.1))
    angle_scale = 1.0 / math.pi
    rate_scale = 1.0 / (2.0 * math.pi)
    return CostSchedule(
        weights=(angle, rate, angle, rate, angle, rate, rpm_w, steer_w),
        scales=(
            angle_scale,
            rate_scale,
            angle_scale,
            rate_scale,
            angle_scale,
            rate_scale,
            1.0 / max(abs(limits.rpm_max), abs(limits.rpm_min), 1e-9),
            1.0 / max(abs(limits.steer_max), abs(limits.steer_min), 1e-9),
        ),
    )


@dataclass(frozen=True, eq=False)
class PlanResult:
    """Outcome of one planning cycle."""

    trajectory: Trajectory
    best_action: Action
    best_cost: float
    feasible: bool
    effective_goal: GoalState
    horizon: int
    best_index: int


def horizon(t_remaining: float, dt: float) -> int:
    """Number of rollout steps covering the remaining time, at least 1.

    Rounds t_remaining / dt half-up with a small tolerance so values on the
    .5 boundary land on the intended side despite float division.
    """
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not math.isfinite(t_remaining) or t_remaining < 0:
        raise ValueError(f"t_remaining must be non-negative, got {t_remaining!r}")
    return max(1, int(math.floor(t_remaining / dt + 0.5 + 1e-9)))


def sample_actions(
    last_best: Action, cfg: PlannerConfig, rng: np.random.Generator
) -> np.ndarray:
    """Uniform (n_samples, 2) candidates around the previous best action.

    Each axis is drawn from [best - sigma, best + sigma] and clipped to the
    global rate limits, so the box always contains the previous best.
    """
    lim = cfg.limits
    out = np.empty((cfg.n_samples, 2), dtype=float)
    out[:, 0] = rng.uniform(
        last_best.rpm_rate - cfg.sigma_rpm_rate,
        last_best.rpm_rate + cfg.sigma_rpm_rate,
        cfg.n_samples,
    )
    out[:, 1] = rng.uniform(
        last_best.steer_rate - cfg.sigma_steer_rate,
        last_best.steer_rate + cfg.sigma_steer_rate,
        cfg.n_samples,
    )
    out[:, 0] = np.clip(out[:, 0], lim.rpm_rate_min, lim.rpm_rate_max)
    out[:, 1] = np.clip(out[:, 1], lim.steer_rate_min, lim.steer_rate_max)
    return out


def _rollout_chunk(
    model, start: np.ndarray, samples: np.ndarray, steps: int
) -> tuple[np.ndarray, np.ndarray]:
    n = samples.shape[0]
    states = np.empty((n, steps + 1, 8), dtype=float)
    applied = np.empty((n, steps, 2), dtype=float)
    states[:, 0] = start
    current = np.repeat(start[None, :], n, axis=0)
    for k in range(steps):
        current, applied[:, k] = model.step_batch(current, samples)
        states[:, k + 1] = current
    return states, applied


def rollout(
    model,
    state: VehicleState,
    samples: np.ndarray,
    steps: int,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Roll each candidate action out for `steps` model steps.

    Every candidate is held constant over the horizon; the model re-clamps
    state and action at each step, so the recorded applied actions may vary
    along a rollout even though the command does not.  Returns states of
    shape (n, steps+1, 8) and applied actions of shape (n, steps, 2).

    With workers > 1 the batch is split into contiguous chunks evaluated by
    a thread pool; results are reassembled in order, so the output does not
    depend on the worker count.
    """
    samples = np.asarray(samples, dtype=float)
    start = state.as_array()
    n = samples.shape[0]
    if workers <= 1 or n < 2 * workers:
        return _rollout_chunk(model, start, samples, steps)
    bounds = np.linspace(0, n, workers + 1, dtype=int)
    chunks = [(samples[a:b],) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(lambda c: _rollout_chunk(model, start, c[0], steps), chunks))
    states = np.concatenate([p[0] for p in parts], axis=0)
    applied = np.concatenate([p[1] for p in parts], axis=0)
    return states, applied


def calculate_cost(
    states: np.ndarray, goal: GoalState, schedule: CostSchedule
) -> np.ndarray:
    """Weighted squared residual cost of rollouts against a goal.

    states has shape (n, H+1, 8) (or (H+1, 8) for a single trajectory); the
    cost sums scale^2 * w(u_k) * residual^2 over all steps and dimensions,
    with u_k = k / H.  Returns shape (n,) (or a scalar).
    """
    arr = np.asarray(states, dtype=float)
    single = arr.ndim == 2
    if single:
        arr = arr[None, ...]
    h = arr.shape[1] - 1
    if h < 1:
        raise ValueError("rollout must contain at least one step")
    res = residual_array(arr, goal.as_array())
    scales = np.asarray(schedule.scales)
    scaled_sq = (res * scales) ** 2
    weights = schedule.weight_matrix(h)
    costs = np.einsum("nts,ts->n", scaled_sq, weights)
    return float(costs[0]) if single else costs


def _alternate_goal(goal: GoalState, terminals: np.ndarray) -> GoalState:
    """Concede every non-pose target to whichever rollout best reaches the pose.

    Out of all candidate terminal states, the one with the smallest wrapped
    angle residual anchors the relaxed goal: pose targets stay, while the
    rate and rpm targets become that candidate's terminal values.  Re-scoring
    against this goal rewards candidates that land on pose even when they
    must carry angular rate or give up wheel speed to get there, which is
    what breaks the "holding still is cheapest" stalemate on large attitude
    errors.  Conceding rpm matters when braking a pitch motion: the brake is
    a wheel-speed change, so insisting on the original rpm target would tax
    exactly the maneuver that levels the vehicle.
    """
    res = residual_array(terminals, goal.as_array())
    pose_sq = res[:, ROLL] ** 2 + res[:, PITCH] ** 2 + res[:, YAW] ** 2
    anchor = terminals[int(np.argmin(pose_sq))]
    return GoalState(
        roll=goal.roll,
        roll_rate=float(anchor[ROLL_RATE]),
        pitch=goal.pitch,
        pitch_rate=float(anchor[PITCH_RATE]),
        yaw=goal.yaw,
        yaw_rate=float(anchor[YAW_RATE]),
        rpm=float(anchor[RPM]),
        steer=goal.steer,
    )


def plan_cycle(
    state: VehicleState,
    goal: GoalState,
    t_remaining: float,
    last_best: Action,
    model,
    cfg: PlannerConfig,
    schedule: CostSchedule,
    rng: np.random.Generator,
    samples: np.ndarray | None = None,
) -> PlanResult:
    """One full planning cycle: sample, roll out, score, select.

    `model` is any forward model exposing dt and step_batch; its dt must
    equal cfg.dt.  `samples` overrides the drawn candidates (used by tests
    and by deterministic grids).  Ties in cost resolve to the lowest sample
    index.  When the best trajectory misses the goal beyond the feasibility
    tolerance, candidates are re-scored against the alternate goal and the
    result is flagged infeasible with that goal attached.
    """
    if not math.isfinite(t_remaining) or t_remaining <= 0:
        raise PlanningWindowExpiredError(f"t_remaining must be positive, got {t_remaining!r}")
    if abs(model.dt - cfg.dt) > 1e-12:
        raise ValueError(f"model dt {model.dt} does not match planner dt {cfg.dt}")
    state = clamp_state(state, cfg.limits)
    steps = horizon(t_remaining, cfg.dt)
    if samples is None:
        samples = sample_actions(last_best, cfg, rng)
    else:
        samples = np.asarray(samples, dtype=float)
    states, applied = rollout(model, state, samples, steps, cfg.workers)
    costs = calculate_cost(states, goal, schedule)
    best = int(np.argmin(costs))

    tolerance = np.asarray(cfg.feasibility_tolerance)
    terminal_res = residual_array(states[best, -1], goal.as_array())
    feasible = bool(np.all(np.abs(terminal_res) <= tolerance))
    effective_goal = goal
    if not feasible:
        effective_goal = _alternate_goal(goal, states[:, -1])
        costs = calculate_cost(states, effective_goal, schedule)
        best = int(np.argmin(costs))

    return PlanResult(
        trajectory=Trajectory(states=states[best], actions=applied[best], dt=cfg.dt),
        best_action=Action.from_array(samples[best]),
        best_cost=float(costs[best]),
        feasible=feasible,
        effective_goal=effective_goal,
        horizon=steps,
        best_index=best,
    )


def control_loop(
    state: VehicleState,
    goal: GoalState,
    t_total: float,
    model,
    cfg: PlannerConfig,
    schedule: CostSchedule,
    env_step,
    rng: np.random.Generator | None = None,
) -> tuple[Trajectory, list[PlanResult]]:
    """Replan at replan_hz while the remaining flight time runs out.

    Each cycle plans from the current state with the shrinking window,
    passes the best action to `env_step(state, action, period)`, and
    warm-starts the next cycle with that action.  The first cycle is seeded
    with a zero action.  Returns the realized trajectory at the control
    period plus every cycle's PlanResult.
    """
    if not (math.isfinite(t_total) and t_total > 0):
        raise ValueError(f"t_total must be positive, got {t_total!r}")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    period = 1.0 / cfg.replan_hz
    cycles = max(1, int(math.floor(t_total * cfg.replan_hz + 0.5 + 1e-9)))
    current = clamp_state(state, cfg.limits)
    states = np.empty((cycles + 1, 8), dtype=float)
    applied = np.empty((cycles, 2), dtype=float)
    states[0] = current.as_array()
    results: list[PlanResult] = []
    last_best = Action(0.0, 0.0)
    for k in range(cycles):
        t_remaining = t_total - k * period
        result = plan_cycle(current, goal, t_remaining, last_best, model, cfg, schedule, rng)
        results.append(result)
        action = result.best_action
        applied[k] = clamp_action(action, current, cfg.limits, period).as_array()
        current = env_step(current, action, period)
        states[k + 1] = current.as_array()
        last_best = action
    return Trajectory(states=states, actions=applied, dt=period), results
