"""Hybrid forward model: learned angular accelerations, analytic integration.

A small fully-connected network maps the normalized (state, action) 10-vector
to the three angular accelerations; the analytic constant-acceleration
integrator from the physics module then advances the state.  Only the network
is learned, so the model keeps exact knowledge of how accelerations turn into
motion and of the actuator limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Action,
    ActuationLimits,
    ModelFormatError,
    VehicleState,
    clamp_action_array,
    clamp_state_array,
)
from .physics import integrate_array

MODEL_MAGIC = "phli-v1"
N_INPUTS = 10
N_OUTPUTS = 3


@dataclass(frozen=True)
class AngularAccel:
    """Angular accelerations about the three body axes, rad/s^2."""

    roll_acc: float
    pitch_acc: float
    yaw_acc: float

    def as_array(self) -> np.ndarray:
        return np.array([self.roll_acc, self.pitch_acc, self.yaw_acc], dtype=float)


@dataclass
class HybridModel:
    """Network weights, input/output normalization, and integration interval.

    layer_dims has five entries (10, h1, h2, h3, 3); the three hidden layers
    use tanh and the output layer is affine.  Inputs are normalized with
    input_mean/input_std, predictions are de-normalized with
    output_mean/output_std.  dt is the interval the integrator advances per
    step.
    """

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input_mean: np.ndarray
    input_std: np.ndarray
    output_mean: np.ndarray
    output_std: np.ndarray
    dt: float = 0.2

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        self.input_mean = np.asarray(self.input_mean, dtype=float)
        self.input_std = np.asarray(self.input_std, dtype=float)
        self.output_mean = np.asarray(self.output_mean, dtype=float)
        self.output_std = np.asarray(self.output_std, dtype=float)
        self.validate()

    def validate(self):
        dims = self.layer_dims
        if len(dims) != 5:
            raise ModelFormatError(f"expected 5 layer dims, got {len(dims)}")
        if dims[0] != N_INPUTS or dims[-1] != N_OUTPUTS:
            raise ModelFormatError(
                f"layer dims must start at {N_INPUTS} and end at {N_OUTPUTS}, got {dims}"
            )
        if any(d < 1 for d in dims):
            raise ModelFormatError(f"layer dims must be positive, got {dims}")
        if len(self.weights) != 4 or len(self.biases) != 4:
            raise ModelFormatError("expected 4 weight matrices and 4 bias vectors")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (dims[i], dims[i + 1])
            if w.shape != want:
                raise ModelFormatError(f"weight {i} has shape {w.shape}, expected {want}")
            if b.shape != (dims[i + 1],):
                raise ModelFormatError(f"bias {i} has shape {b.shape}, expected ({dims[i + 1]},)")
        for name, arr, n in (
            ("input_mean", self.input_mean, N_INPUTS),
            ("input_std", self.input_std, N_INPUTS),
            ("output_mean", self.output_mean, N_OUTPUTS),
            ("output_std", self.output_std, N_OUTPUTS),
        ):
            if arr.shape != (n,):
                raise ModelFormatError(f"{name} has shape {arr.shape}, expected ({n},)")
        if np.any(self.input_std <= 0) or np.any(self.output_std <= 0):
            raise ModelFormatError("normalization stds must all be positive")
        arrays = self.weights + self.biases + [
            self.input_mean, self.input_std, self.output_mean, self.output_std,
        ]
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ModelFormatError("model parameters must all be finite")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ModelFormatError(f"dt must be positive and finite, got {self.dt!r}")


def forward_normalized(
    model: HybridModel, x_norm: np.ndarray, with_cache: bool = False
):
    """Forward pass in normalized space.  x_norm has shape (batch, 10).

    Returns the normalized (batch, 3) output, plus the per-layer activations
    when with_cache is set (used by training for backpropagation).
    """
    z = np.asarray(x_norm, dtype=float)
    cache = [z]
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = np.tanh(z @ w + b)
        cache.append(z)
    out = z @ model.weights[-1] + model.biases[-1]
    if with_cache:
        return out, cache
    return out


def predict_accel_array(
    model: HybridModel, states: np.ndarray, actions: np.ndarray
) -> np.ndarray:
    """Predicted (batch, 3) angular accelerations for raw states/actions."""
    states = np.asarray(states, dtype=float)
    actions = np.asarray(actions, dtype=float)
    x = np.concatenate([states, actions], axis=-1)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    x_norm = (x - model.input_mean) / model.input_std
    out = forward_normalized(model, x_norm) * model.output_std + model.output_mean
    return out[0] if squeeze else out


def predict_accel(model: HybridModel, state: VehicleState, action: Action) -> AngularAccel:
    """Predicted angular accelerations at a single state/action pair."""
    acc = predict_accel_array(model, state.as_array(), action.as_array())
    return AngularAccel(float(acc[0]), float(acc[1]), float(acc[2]))


def integrate_accel(
    accel: AngularAccel,
    state: VehicleState,
    action: Action,
    dt: float,
    limits: ActuationLimits,
) -> VehicleState:
    """Advance one step under given accelerations.

    Identical arithmetic to the analytic oracle's integrator (it is the same
    routine), so feeding it the oracle's accelerations reproduces the oracle
    step bit for bit.
    """
    out = integrate_array(state.as_array(), accel.as_array(), action.as_array(), dt, limits)
    return VehicleState.from_array(out)


def hybrid_step_array(
    model: HybridModel,
    states: np.ndarray,
    actions: np.ndarray,
    limits: ActuationLimits,
) -> tuple[np.ndarray, np.ndarray]:
    """One learned-model step for a batch.  Returns (next_states, applied)."""
    states = clamp_state_array(states, limits)
    applied = clamp_action_array(actions, states, limits, model.dt)
    accels = predict_accel_array(model, states, applied)
    return integrate_array(states, accels, applied, model.dt, limits), applied


def hybrid_step(
    model: HybridModel,
    state: VehicleState,
    action: Action,
    limits: ActuationLimits,
) -> VehicleState:
    """One step of the hybrid model: clamp, predict accelerations, integrate."""
    next_states, _ = hybrid_step_array(model, state.as_array(), action.as_array(), limits)
    return VehicleState.from_array(next_states)


class HybridStepper:
    """Learned model behind the common forward-model interface."""

    def __init__(self, model: HybridModel, limits: ActuationLimits):
        self.model = model
        self.limits = limits

    @property
    def dt(self) -> float:
        return self.model.dt

    def step(self, state: VehicleState, action: Action) -> VehicleState:
        return hybrid_step(self.model, state, action, self.limits)

    def step_batch(self, states: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return hybrid_step_array(self.model, states, actions, self.limits)


def _format_vector(arr: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in np.asarray(arr, dtype=float).ravel())


def save_model(model: HybridModel, path, comment: str | None = None) -> None:
    """Write a model as plain text.

    An optional leading `# ...` comment line may carry provenance; readers
    skip it.  Then line 1 is the format tag, line 2 the five layer dims,
    line 3 dt; then for each layer one line of row-major weights and one
    line of biases; then the input means, input stds, output means, and
    output stds.  Values carry 17 significant digits so a round trip is
    exact.
    """
    lines = [
        MODEL_MAGIC,
        " ".join(str(d) for d in model.layer_dims),
        f"{model.dt:.17g}",
    ]
    if comment is not None:
        lines.insert(0, comment)
    for w, b in zip(model.weights, model.biases):
        lines.append(_format_vector(w))
        lines.append(_format_vector(b))
    for arr in (model.input_mean, model.input_std, model.output_mean, model.output_std):
        lines.append(_format_vector(arr))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_vector(line: str, count: int, path, lineno: int) -> np.ndarray:
    parts = line.split()
    if len(parts) != count:
        raise ModelFormatError(f"{path}:{lineno}: expected {count} values, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts], dtype=float)
    except ValueError as exc:
        raise ModelFormatError(f"{path}:{lineno}: {exc}") from exc


def load_model(path) -> HybridModel:
    """Read a model written by save_model.  Raises ModelFormatError on damage."""
    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    lines = [line for line in lines if line.strip() and not line.startswith("#")]
    if not lines or lines[0].strip() != MODEL_MAGIC:
        found = lines[0].strip() if lines else "<empty file>"
        raise ModelFormatError(f"{path}:1: expected format tag {MODEL_MAGIC!r}, found {found!r}")
    try:
        dims = tuple(int(p) for p in lines[1].split())
    except (IndexError, ValueError) as exc:
        raise ModelFormatError(f"{path}:2: malformed layer dims") from exc
    if len(dims) != 5:
        raise ModelFormatError(f"{path}:2: expected 5 layer dims, got {len(dims)}")
    try:
        dt = float(lines[2])
    except (IndexError, ValueError) as exc:
        raise ModelFormatError(f"{path}:3: malformed dt") from exc
    expected_lines = 3 + 8 + 4
    if len(lines) != expected_lines:
        raise ModelFormatError(
            f"{path}: expected {expected_lines} non-empty lines, got {len(lines)}"
        )
    weights, biases = [], []
    lineno = 4
    for i in range(4):
        w = _parse_vector(lines[lineno - 1], dims[i] * dims[i + 1], path, lineno)
        weights.append(w.reshape(dims[i], dims[i + 1]))
        lineno += 1
        biases.append(_parse_vector(lines[lineno - 1], dims[i + 1], path, lineno))
        lineno += 1
    stats = []
    for count in (N_INPUTS, N_INPUTS, N_OUTPUTS, N_OUTPUTS):
        stats.append(_parse_vector(lines[lineno - 1], count, path, lineno))
        lineno += 1
    try:
        return HybridModel(
            layer_dims=dims,
            weights=weights,
            biases=biases,
            input_mean=stats[0],
            input_std=stats[1],
            output_mean=stats[2],
            output_std=stats[3],
            dt=dt,
        )
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
