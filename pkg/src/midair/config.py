"""Flat INI run configuration shared by all command-line tools.

A config file is optional; every key has a documented default and an
absent file means "all defaults".  Sections and keys:

``[physics]``
    i_fw, i_rw, i_chassis_roll, i_chassis_pitch (kg m^2), yaw_noise_std
    (rad/s^2), gravity (m/s^2).
``[limits]``
    rpm_min, rpm_max, rpm_rate_min, rpm_rate_max (rpm, rpm/s), steer_min,
    steer_max, steer_rate_min, steer_rate_max (rad, rad/s).
``[planner]``
    dt (s), n_samples, sigma_rpm_rate (rpm/s), sigma_steer_rate (rad/s),
    replan_hz (Hz), feasibility_tolerance (8 comma-separated residual
    bounds in state order, ``inf`` allowed), workers.  The random seed is
    not a config key; it comes from each command's --seed flag.
``[cost_schedule]``
    One key per state dimension (roll, roll_rate, pitch, pitch_rate, yaw,
    yaw_rate, rpm, steer) holding a ``u:weight`` list of piecewise-constant
    segments over normalized rollout time, e.g. ``0:1.0, 0.5:0.3``; plus
    ``scales`` with 8 comma-separated residual scales.
``[pid]``
    pitch_kp, pitch_ki, pitch_kd, pitch_integral_limit and the same four
    with the roll_ prefix.
``[scenario.<kind>]`` for kind in tt, rsc, tgr, ss, ramp
    Any ScenarioSpec field except ``kind``; thresholds flatten to
    threshold_angle, threshold_rate, threshold_stuck_dwell,
    threshold_landing_angle; ``disturbances`` is a list of
    ``time:axis:impulse`` triples where axis is a rate-state name, e.g.
    ``2.0:roll_rate:0.6, 7.0:pitch_rate:-0.6``.

Unknown sections or keys are rejected with the file, line, and name in
the message.  The config digest (sha256 of the file bytes, or the word
``default``) is stamped into every output file for traceability.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
from dataclasses import dataclass

from .core import STATE_NAMES, ActuationLimits, ConfigError
from .physics import PhysicalParams
from .pid import DEFAULT_PID_GAINS, LoopGains, PidGains
from .planner import CostSchedule, PlannerConfig, default_cost_schedule
from .scenarios import SCENARIO_KINDS, Disturbance, ScenarioSpec, SuccessThresholds, default_spec

DEFAULT_DIGEST = "default"

# planner defaults for the command line: the library-level sample count is
# sized for one-shot planning studies, while every command here runs full
# closed loops, so the deployed controller's budget is the better default
_CLI_PLANNER_DEFAULTS = {
    "dt": 0.2,
    "n_samples": 600,
    "sigma_rpm_rate": 2000.0,
    "sigma_steer_rate": 0.2,
    "replan_hz": 50.0,
    "feasibility_tolerance": PlannerConfig().feasibility_tolerance,
    "workers": 1,
}

_RATE_AXES = {
    name: STATE_NAMES.index(name) for name in ("roll_rate", "pitch_rate", "yaw_rate")
}

_THRESHOLD_KEYS = {
    "threshold_angle": "angle",
    "threshold_rate": "rate",
    "threshold_stuck_dwell": "stuck_dwell",
    "threshold_landing_angle": "landing_angle",
}

_SCENARIO_INT_KEYS = {"n_trials", "goals_per_trial", "max_certify_draws"}

_SCENARIO_KEYS = (
    {f.name for f in dataclasses.fields(ScenarioSpec)} - {"kind", "thresholds", "disturbances"}
) | set(_THRESHOLD_KEYS) | {"disturbances"}

_SECTION_KEYS = {
    "physics": {f.name for f in dataclasses.fields(PhysicalParams)},
    "limits": {f.name for f in dataclasses.fields(ActuationLimits)},
    "planner": set(_CLI_PLANNER_DEFAULTS),
    "cost_schedule": set(STATE_NAMES) | {"scales"},
    "pid": {f"{loop}_{g}" for loop in ("pitch", "roll") for g in ("kp", "ki", "kd", "integral_limit")},
    **{f"scenario.{kind}": _SCENARIO_KEYS for kind in SCENARIO_KINDS},
}


@dataclass(frozen=True)
class RunConfig:
    """Everything the commands need, already validated and constructed."""

    params: PhysicalParams
    limits: ActuationLimits
    planner: PlannerConfig
    schedule: CostSchedule
    pid: PidGains
    scenarios: dict[str, ScenarioSpec]
    source: str
    digest: str


def _line_of(raw: str, section: str, key: str | None = None) -> int:
    """Best-effort line number of a section header or key for messages."""
    inside = False
    for no, line in enumerate(raw.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            inside = stripped[1:-1].strip() == section
            if inside and key is None:
                return no
        elif inside and key is not None and not stripped.startswith(("#", ";")):
            head = stripped.split("=", 1)[0].split(":", 1)[0].strip()
            if head == key:
                return no
    return 0


class _Section:
    """One parsed section with contextual error reporting."""

    def __init__(self, path: str, raw: str, name: str, items: dict[str, str]):
        self.path = path
        self.raw = raw
        self.name = name
        self.items = items

    def _fail(self, key: str, message: str) -> ConfigError:
        line = _line_of(self.raw, self.name, key)
        return ConfigError(f"{self.path}:{line}: [{self.name}] key {key!r}: {message}")

    def scalar(self, key: str, kind) -> object:
        text = self.items[key]
        try:
            value = kind(text)
        except ValueError:
            raise self._fail(key, f"could not parse {text!r} as {kind.__name__}") from None
        return value

    def float_list(self, key: str, count: int) -> tuple[float, ...]:
        text = self.items[key]
        parts = [p.strip() for p in text.split(",")] if text.strip() else []
        if len(parts) != count:
            raise self._fail(key, f"expected {count} comma-separated values, found {len(parts)}")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            raise self._fail(key, f"could not parse {text!r} as numbers") from None

    def segments(self, key: str) -> tuple[tuple[float, float], ...]:
        text = self.items[key]
        out = []
        for part in text.split(","):
            part = part.strip()
            pieces = part.split(":")
            if len(pieces) != 2:
                raise self._fail(key, f"segment {part!r} is not of the form u:weight")
            try:
                out.append((float(pieces[0]), float(pieces[1])))
            except ValueError:
                raise self._fail(key, f"segment {part!r} is not numeric") from None
        return tuple(out)

    def disturbances(self, key: str) -> tuple[Disturbance, ...]:
        text = self.items[key].strip()
        if not text:
            return ()
        out = []
        for part in text.split(","):
            part = part.strip()
            pieces = [p.strip() for p in part.split(":")]
            if len(pieces) != 3:
                raise self._fail(key, f"disturbance {part!r} is not of the form time:axis:impulse")
            if pieces[1] not in _RATE_AXES:
                raise self._fail(
                    key, f"axis {pieces[1]!r} is not one of {sorted(_RATE_AXES)}"
                )
            try:
                time, impulse = float(pieces[0]), float(pieces[2])
            except ValueError:
                raise self._fail(key, f"disturbance {part!r} is not numeric") from None
            try:
                out.append(Disturbance(time=time, axis=_RATE_AXES[pieces[1]], impulse=impulse))
            except ValueError as exc:
                raise self._fail(key, str(exc)) from None
        return tuple(out)


def _build(section: _Section, cls):
    """Instantiate an all-float config dataclass from section overrides."""
    kwargs = {key: section.scalar(key, float) for key in section.items}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        line = _line_of(section.raw, section.name)
        raise ConfigError(f"{section.path}:{line}: [{section.name}] {exc}") from None


def _scenario_spec(section: _Section, kind: str) -> ScenarioSpec:
    base = default_spec(kind)
    kwargs = {f.name: getattr(base, f.name) for f in dataclasses.fields(ScenarioSpec)}
    threshold_kwargs = {
        f.name: getattr(base.thresholds, f.name)
        for f in dataclasses.fields(SuccessThresholds)
    }
    for key in section.items:
        if key in _THRESHOLD_KEYS:
            threshold_kwargs[_THRESHOLD_KEYS[key]] = section.scalar(key, float)
        elif key == "disturbances":
            kwargs["disturbances"] = section.disturbances(key)
        elif key in _SCENARIO_INT_KEYS:
            kwargs[key] = section.scalar(key, int)
        else:
            kwargs[key] = section.scalar(key, float)
    try:
        kwargs["thresholds"] = SuccessThresholds(**threshold_kwargs)
        return ScenarioSpec(**kwargs)
    except ValueError as exc:
        line = _line_of(section.raw, section.name)
        raise ConfigError(f"{section.path}:{line}: [{section.name}] {exc}") from None


def _cost_schedule(section: _Section, base: CostSchedule) -> CostSchedule:
    weights = list(base.weights)
    scales = base.scales
    for key in section.items:
        if key == "scales":
            scales = section.float_list(key, 8)
        else:
            weights[STATE_NAMES.index(key)] = section.segments(key)
    try:
        return CostSchedule(weights=tuple(weights), scales=scales)
    except ValueError as exc:
        line = _line_of(section.raw, section.name)
        raise ConfigError(f"{section.path}:{line}: [{section.name}] {exc}") from None


def _pid_gains(section: _Section) -> PidGains:
    values = {
        f"{loop}_{g}": getattr(getattr(DEFAULT_PID_GAINS, loop), g)
        for loop in ("pitch", "roll")
        for g in ("kp", "ki", "kd", "integral_limit")
    }
    for key in section.items:
        values[key] = section.scalar(key, float)
    return PidGains(
        pitch=LoopGains(
            kp=values["pitch_kp"], ki=values["pitch_ki"],
            kd=values["pitch_kd"], integral_limit=values["pitch_integral_limit"],
        ),
        roll=LoopGains(
            kp=values["roll_kp"], ki=values["roll_ki"],
            kd=values["roll_kd"], integral_limit=values["roll_integral_limit"],
        ),
    )


def load_config(path: str | None = None) -> RunConfig:
    """Read and validate a config file; None means all defaults."""
    if path is None:
        sections: dict[str, dict[str, str]] = {}
        raw = ""
        source = "<defaults>"
        digest = DEFAULT_DIGEST
    else:
        try:
            with open(path) as fh:
                raw = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror or exc}") from None
        digest = hashlib.sha256(raw.encode()).hexdigest()[:12]
        source = str(path)
        parser = configparser.ConfigParser(
            interpolation=None, inline_comment_prefixes=("#", ";")
        )
        parser.optionxform = str
        try:
            parser.read_string(raw, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        sections = {name: dict(parser.items(name)) for name in parser.sections()}

    for name, items in sections.items():
        if name not in _SECTION_KEYS:
            line = _line_of(raw, name)
            raise ConfigError(
                f"{source}:{line}: unknown section [{name}]; "
                f"expected one of {sorted(_SECTION_KEYS)}"
            )
        for key in items:
            if key not in _SECTION_KEYS[name]:
                line = _line_of(raw, name, key)
                raise ConfigError(f"{source}:{line}: [{name}] unknown key {key!r}")

    def section(name: str) -> _Section:
        return _Section(source, raw, name, sections.get(name, {}))

    params = _build(section("physics"), PhysicalParams)
    limits = _build(section("limits"), ActuationLimits)
    plan_section = section("planner")
    plan_kwargs = dict(_CLI_PLANNER_DEFAULTS)
    for key in plan_section.items:
        if key == "feasibility_tolerance":
            plan_kwargs[key] = plan_section.float_list(key, 8)
        elif key in ("n_samples", "workers"):
            plan_kwargs[key] = plan_section.scalar(key, int)
        else:
            plan_kwargs[key] = plan_section.scalar(key, float)
    try:
        planner = PlannerConfig(**plan_kwargs, limits=limits)
    except ValueError as exc:
        line = _line_of(raw, "planner")
        raise ConfigError(f"{source}:{line}: [planner] {exc}") from None
    schedule = _cost_schedule(section("cost_schedule"), default_cost_schedule(limits))
    pid = _pid_gains(section("pid"))
    scenarios = {
        kind: _scenario_spec(section(f"scenario.{kind}"), kind) for kind in SCENARIO_KINDS
    }
    return RunConfig(
        params=params,
        limits=limits,
        planner=planner,
        schedule=schedule,
        pid=pid,
        scenarios=scenarios,
        source=source,
        digest=digest,
    )
