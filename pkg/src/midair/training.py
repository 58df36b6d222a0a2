"""Data generation and training for the learned acceleration network.

Training data comes from the analytic oracle driven by a piecewise-constant
excitation policy.  Recorded angular-rate series are differenced into
acceleration labels, optionally after Gaussian rate noise emulating an IMU.
The network is trained from scratch with mini-batch SGD plus momentum on the
mean squared error of normalized targets.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .core import (
    ACTION_NAMES,
    RATE_COLS,
    STATE_NAMES,
    Action,
    ActuationLimits,
    TrainingConfigError,
    VehicleState,
    clamp_state_array,
)
from .model import AngularAccel, HybridModel, forward_normalized
from .physics import PhysicalParams, step_array

FEATURE_NAMES = STATE_NAMES + ACTION_NAMES
LABEL_NAMES = ("roll_acc", "pitch_acc", "yaw_acc")


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and split settings for train()."""

    epochs: int = 300
    batch_size: int = 256
    learning_rate: float = 3e-3
    seed: int = 0
    val_fraction: float = 0.15
    momentum: float = 0.9
    hidden_dims: tuple[int, int, int] = (64, 64, 64)
    model_dt: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise TrainingConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise TrainingConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (0 < self.learning_rate < 1):
            raise TrainingConfigError(f"learning_rate out of range: {self.learning_rate}")
        if not (0 < self.val_fraction < 1):
            raise TrainingConfigError(f"val_fraction out of range: {self.val_fraction}")
        if not (0 <= self.momentum < 1):
            raise TrainingConfigError(f"momentum out of range: {self.momentum}")
        if not (math.isfinite(self.model_dt) and self.model_dt > 0):
            raise TrainingConfigError(f"model_dt must be positive, got {self.model_dt}")


@dataclass(frozen=True)
class Sample:
    """One supervised example: state, applied action, acceleration label."""

    state: VehicleState
    action: Action
    label: AngularAccel


class Dataset(Sequence):
    """Column-array container behaving as a sequence of Sample."""

    def __init__(self, states: np.ndarray, actions: np.ndarray, labels: np.ndarray):
        states = np.asarray(states, dtype=float)
        actions = np.asarray(actions, dtype=float)
        labels = np.asarray(labels, dtype=float)
        n = states.shape[0]
        if states.shape != (n, 8) or actions.shape != (n, 2) or labels.shape != (n, 3):
            raise ValueError(
                f"inconsistent dataset shapes: {states.shape}, {actions.shape}, {labels.shape}"
            )
        if not (
            np.all(np.isfinite(states))
            and np.all(np.isfinite(actions))
            and np.all(np.isfinite(labels))
        ):
            raise ValueError("dataset contains non-finite values")
        self.states = states
        self.actions = actions
        self.labels = labels

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Dataset(self.states[i], self.actions[i], self.labels[i])
        return Sample(
            state=VehicleState.from_array(self.states[i]),
            action=Action.from_array(self.actions[i]),
            label=AngularAccel(*(float(v) for v in self.labels[i])),
        )

    def inputs(self) -> np.ndarray:
        """(n, 10) matrix of state columns followed by action columns."""
        return np.concatenate([self.states, self.actions], axis=1)

    @classmethod
    def from_samples(cls, samples: Sequence[Sample]) -> "Dataset":
        states = np.array([s.state.as_array() for s in samples])
        actions = np.array([s.action.as_array() for s in samples])
        labels = np.array([s.label.as_array() for s in samples])
        return cls(states, actions, labels)


def derive_accel_labels(rate_series: np.ndarray, dt_sensor: float) -> np.ndarray:
    """Angular accelerations from a sampled rate series by finite differences.

    Central differences at interior points, one-sided two-point differences
    at the two ends; output length equals input length.  rate_series has
    shape (n, k) with n >= 3 samples of k rates at spacing dt_sensor.
    """
    rates = np.asarray(rate_series, dtype=float)
    if rates.ndim == 1:
        rates = rates[:, None]
    if rates.shape[0] < 3:
        raise ValueError(f"need at least 3 samples, got {rates.shape[0]}")
    if not (math.isfinite(dt_sensor) and dt_sensor > 0):
        raise ValueError(f"dt_sensor must be positive, got {dt_sensor!r}")
    out = np.empty_like(rates)
    out[1:-1] = (rates[2:] - rates[:-2]) / (2.0 * dt_sensor)
    out[0] = (rates[1] - rates[0]) / dt_sensor
    out[-1] = (rates[-1] - rates[-2]) / dt_sensor
    return out


def excite_policy(
    duration: float,
    dt_sensor: float,
    limits: ActuationLimits,
    seed: int,
    extreme_fraction: float = 0.10,
) -> np.ndarray:
    """Piecewise-constant random action commands covering a duration.

    Segment lengths are uniform in [0.1, 0.5] s, values uniform over the rate
    limits; a fraction of segments pins one rate to an extreme so limit
    behavior appears in the data.  Returns an (n, 2) array with
    n = round(duration / dt_sensor) rows.
    """
    if not (math.isfinite(duration) and duration > 0):
        raise ValueError(f"duration must be positive, got {duration!r}")
    if not (math.isfinite(dt_sensor) and dt_sensor > 0):
        raise ValueError(f"dt_sensor must be positive, got {dt_sensor!r}")
    n = max(1, int(math.floor(duration / dt_sensor + 0.5 + 1e-9)))
    rng = np.random.default_rng(seed)
    out = np.empty((n, 2), dtype=float)
    filled = 0
    while filled < n:
        seg_ticks = max(1, int(round(rng.uniform(0.1, 0.5) / dt_sensor)))
        rpm_rate = rng.uniform(limits.rpm_rate_min, limits.rpm_rate_max)
        steer_rate = rng.uniform(limits.steer_rate_min, limits.steer_rate_max)
        if rng.uniform() < extreme_fraction:
            axis = rng.integers(2)
            hi = rng.integers(2)
            if axis == 0:
                rpm_rate = limits.rpm_rate_max if hi else limits.rpm_rate_min
            else:
                steer_rate = limits.steer_rate_max if hi else limits.steer_rate_min
        end = min(n, filled + seg_ticks)
        out[filled:end, 0] = rpm_rate
        out[filled:end, 1] = steer_rate
        filled = end
    return out


def _random_states(
    rng: np.random.Generator, count: int, limits: ActuationLimits, max_rate: float = 3.0
) -> np.ndarray:
    states = np.zeros((count, 8), dtype=float)
    states[:, 0] = rng.uniform(-math.pi, math.pi, count)
    states[:, 2] = rng.uniform(-math.pi, math.pi, count)
    states[:, 4] = rng.uniform(-math.pi, math.pi, count)
    for col in RATE_COLS:
        states[:, col] = rng.uniform(-max_rate, max_rate, count)
    states[:, 6] = rng.uniform(limits.rpm_min, limits.rpm_max, count)
    states[:, 7] = rng.uniform(limits.steer_min, limits.steer_max, count)
    return clamp_state_array(states, limits)


def generate_dataset(
    params: PhysicalParams,
    limits: ActuationLimits,
    duration: float,
    dt_sensor: float,
    rate_noise_std: float,
    seed: int,
    episode_len: float = 2.0,
    label_mode: str = "forward",
) -> Dataset:
    """Simulate the oracle under the excitation policy and label the result.

    The total duration is split into episodes started from randomized states
    so the data covers the full attitude/actuator envelope.  Recorded rates
    get Gaussian noise of std rate_noise_std; labels are finite differences
    of the noisy rates, computed per episode.  Each sample pairs label[k]
    with (state[k], applied_action[k]) and the dataset holds exactly
    round(duration / dt_sensor) samples.

    label_mode selects the differencing: "forward" uses per-tick increments
    (exact for this zero-order-hold simulator), "central" uses
    derive_accel_labels, the smoother estimator suited to real IMU logs.
    Actions are recorded post-clamp, i.e. as applied.
    """
    if label_mode not in ("forward", "central"):
        raise ValueError(f"label_mode must be 'forward' or 'central', got {label_mode!r}")
    if not (math.isfinite(rate_noise_std) and rate_noise_std >= 0):
        raise ValueError(f"rate_noise_std must be non-negative, got {rate_noise_std!r}")
    if not (math.isfinite(episode_len) and episode_len > 0):
        raise ValueError(f"episode_len must be positive, got {episode_len!r}")
    total_ticks = max(1, int(math.floor(duration / dt_sensor + 0.5 + 1e-9)))
    if total_ticks < 3:
        raise ValueError(f"duration {duration} at dt {dt_sensor} gives <3 samples")
    ep_ticks = max(3, int(round(episode_len / dt_sensor)))
    n_episodes = max(1, math.ceil(total_ticks / ep_ticks))

    rng = np.random.default_rng(seed)
    states = _random_states(rng, n_episodes, limits)
    commands = np.stack(
        [
            excite_policy(ep_ticks * dt_sensor, dt_sensor, limits, int(rng.integers(2**63)))
            for _ in range(n_episodes)
        ]
    )  # (episodes, ep_ticks, 2)

    rec_states = np.empty((n_episodes, ep_ticks, 8), dtype=float)
    rec_applied = np.empty((n_episodes, ep_ticks, 2), dtype=float)
    rec_rates = np.empty((n_episodes, ep_ticks + 1, 3), dtype=float)
    states = clamp_state_array(states, limits)
    process_rng = rng if params.yaw_noise_std > 0 else None
    for k in range(ep_ticks):
        rec_states[:, k] = states
        rec_rates[:, k] = states[:, RATE_COLS]
        states, applied = step_array(states, commands[:, k], dt_sensor, params, limits, process_rng)
        rec_applied[:, k] = applied
    rec_rates[:, ep_ticks] = states[:, RATE_COLS]

    if rate_noise_std > 0:
        rec_rates = rec_rates + rng.normal(0.0, rate_noise_std, rec_rates.shape)
        rec_states[:, :, RATE_COLS] = rec_rates[:, :-1]

    if label_mode == "forward":
        labels = (rec_rates[:, 1:] - rec_rates[:, :-1]) / dt_sensor
    else:
        labels = np.stack(
            [derive_accel_labels(rec_rates[ep], dt_sensor)[:-1] for ep in range(n_episodes)]
        )

    flat_states = rec_states.reshape(-1, 8)[:total_ticks]
    flat_actions = rec_applied.reshape(-1, 2)[:total_ticks]
    flat_labels = labels.reshape(-1, 3)[:total_ticks]
    return Dataset(flat_states, flat_actions, flat_labels)


def _init_params(
    layer_dims: Sequence[int], rng: np.random.Generator
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _mse(pred: np.ndarray, target: np.ndarray) -> float:
    diff = pred - target
    return float(np.mean(diff * diff))


def backprop(
    model: HybridModel, x_norm: np.ndarray, y_norm: np.ndarray
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """MSE loss and its gradients w.r.t. every weight and bias.

    Operates entirely in normalized space on a (batch, 10) input block.
    """
    out, cache = forward_normalized(model, x_norm, with_cache=True)
    batch = x_norm.shape[0]
    loss = _mse(out, y_norm)
    delta = 2.0 * (out - y_norm) / (batch * y_norm.shape[1])
    grad_w = [None] * 4
    grad_b = [None] * 4
    for layer in range(3, -1, -1):
        grad_w[layer] = cache[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (1.0 - cache[layer] ** 2)
    return loss, grad_w, grad_b


def train(
    data: Dataset,
    cfg: TrainConfig,
    model_init_seed: int = 0,
) -> tuple[HybridModel, list[tuple[int, float, float]]]:
    """Fit the acceleration network and return it with its loss history.

    Shuffled split into train/validation by cfg.val_fraction, normalization
    statistics from the training split only, mini-batch SGD with momentum on
    normalized-MSE, parameters restored from the best validation epoch.
    History rows are (epoch, train_mse, val_mse) in normalized units.

    A zero-variance input feature makes normalization meaningless and raises
    TrainingConfigError naming the feature.  A zero-variance label column is
    normalized with unit scale so the network simply learns its mean.
    """
    if not isinstance(data, Dataset):
        data = Dataset.from_samples(data)
    n = len(data)
    if n < 10:
        raise TrainingConfigError(f"need at least 10 samples to train, got {n}")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(n * cfg.val_fraction)))
    if n_val >= n:
        raise TrainingConfigError(f"val_fraction {cfg.val_fraction} leaves no training data")
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    x = data.inputs()
    y = data.labels
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    in_mean = x_train.mean(axis=0)
    in_std = x_train.std(axis=0)
    # a constant column has zero range but, through rounding of its mean,
    # not always an exactly zero std; test the range
    in_range = x_train.max(axis=0) - x_train.min(axis=0)
    for i, name in enumerate(FEATURE_NAMES):
        if in_range[i] == 0.0 or in_std[i] == 0.0:
            raise TrainingConfigError(f"feature {name!r} has zero variance in the training split")
    out_mean = y_train.mean(axis=0)
    out_std = y_train.std(axis=0)
    out_range = y_train.max(axis=0) - y_train.min(axis=0)
    out_std = np.where((out_range == 0.0) | (out_std == 0.0), 1.0, out_std)

    layer_dims = (x.shape[1],) + tuple(cfg.hidden_dims) + (y.shape[1],)
    init_rng = np.random.default_rng(model_init_seed)
    weights, biases = _init_params(layer_dims, init_rng)
    model = HybridModel(
        layer_dims=layer_dims,
        weights=weights,
        biases=biases,
        input_mean=in_mean,
        input_std=in_std,
        output_mean=out_mean,
        output_std=out_std,
        dt=cfg.model_dt,
    )

    xn_train = (x_train - in_mean) / in_std
    yn_train = (y_train - out_mean) / out_std
    xn_val = (x_val - in_mean) / in_std
    yn_val = (y_val - out_mean) / out_std

    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    best_val = math.inf
    best_w = [w.copy() for w in model.weights]
    best_b = [b.copy() for b in model.biases]
    history = []
    n_train = len(train_idx)
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_train)
        loss_sum = 0.0
        for start in range(0, n_train, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grad_w, grad_b = backprop(model, xn_train[batch], yn_train[batch])
            loss_sum += loss * len(batch)
            for layer in range(4):
                vel_w[layer] = cfg.momentum * vel_w[layer] - cfg.learning_rate * grad_w[layer]
                vel_b[layer] = cfg.momentum * vel_b[layer] - cfg.learning_rate * grad_b[layer]
                model.weights[layer] += vel_w[layer]
                model.biases[layer] += vel_b[layer]
        train_mse = loss_sum / n_train
        val_mse = _mse(forward_normalized(model, xn_val), yn_val)
        history.append((epoch, train_mse, val_mse))
        if val_mse < best_val:
            best_val = val_mse
            best_w = [w.copy() for w in model.weights]
            best_b = [b.copy() for b in model.biases]

    model.weights = best_w
    model.biases = best_b
    return model, history


def _flat_params(model: HybridModel) -> list[np.ndarray]:
    return model.weights + model.biases


def gradient_check(
    model: HybridModel,
    sample: Sample,
    epsilon: float = 1e-5,
    max_checked: int = 1000,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    The loss is the normalized-space MSE at one sample.  When the model has
    more than max_checked parameters a deterministic evenly-strided subsample
    of at least 500 is checked instead of every entry.
    """
    x = np.concatenate([sample.state.as_array(), sample.action.as_array()])[None, :]
    y = sample.label.as_array()[None, :]
    x_norm = (x - model.input_mean) / model.input_std
    y_norm = (y - model.output_mean) / model.output_std

    _, grad_w, grad_b = backprop(model, x_norm, y_norm)
    analytic = grad_w + grad_b
    params = _flat_params(model)
    total = sum(p.size for p in params)
    budget = max(500, min(max_checked, total))
    stride = max(1, total // budget)

    worst = 0.0
    flat_index = 0
    for p, g in zip(params, analytic):
        p_flat = p.ravel()
        g_flat = g.ravel()
        for i in range(p_flat.size):
            if (flat_index + i) % stride:
                continue
            orig = p_flat[i]
            p_flat[i] = orig + epsilon
            hi = _mse(forward_normalized(model, x_norm), y_norm)
            p_flat[i] = orig - epsilon
            lo = _mse(forward_normalized(model, x_norm), y_norm)
            p_flat[i] = orig
            numeric = (hi - lo) / (2.0 * epsilon)
            denom = max(abs(g_flat[i]), abs(numeric), 1e-6)
            worst = max(worst, abs(g_flat[i] - numeric) / denom)
        flat_index += p_flat.size
    return worst
