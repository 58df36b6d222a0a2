"""Tests for dataset generation, label derivation, training, and the gradient check."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from midair import (
    Action,
    DEFAULT_LIMITS,
    Dataset,
    Sample,
    TrainConfig,
    TrainingConfigError,
    VehicleState,
    generate_dataset,
    gradient_check,
    train,
)
from midair.model import AngularAccel, predict_accel_array
from midair.physics import PhysicalParams, total_accel_array
from midair.training import FEATURE_NAMES, derive_accel_labels, excite_policy

QUIET = PhysicalParams(yaw_noise_std=0.0)


def synthetic_columns(n, seed=0):
    """Random in-envelope states and actions with full feature variance."""
    rng = np.random.default_rng(seed)
    states = np.zeros((n, 8))
    for col in (0, 2, 4):
        states[:, col] = rng.uniform(-math.pi, math.pi, n)
    for col in (1, 3, 5):
        states[:, col] = rng.uniform(-3, 3, n)
    states[:, 6] = rng.uniform(0, 1980, n)
    states[:, 7] = rng.uniform(-0.65, 0.65, n)
    actions = np.column_stack(
        [rng.uniform(-5000, 5000, n), rng.uniform(-6.5, 6.5, n)]
    )
    return states, actions, rng


class TestDeriveAccelLabels:
    def test_constant_rates_give_zero(self):
        rates = np.tile([0.3, -0.1, 0.0], (20, 1))
        np.testing.assert_array_equal(derive_accel_labels(rates, 0.02), np.zeros((20, 3)))

    def test_linear_ramp_recovered_everywhere(self):
        t = np.arange(15) * 0.1
        rates = (2.0 * t)[:, None]
        labels = derive_accel_labels(rates, 0.1)
        np.testing.assert_allclose(labels, 2.0, rtol=1e-12)

    def test_sinusoid_interior_accuracy(self):
        t = np.arange(400) * 0.01
        labels = derive_accel_labels(np.sin(t)[:, None], 0.01)
        interior = slice(1, -1)
        np.testing.assert_allclose(labels[interior, 0], np.cos(t[interior]), atol=1e-4)

    def test_length_and_width_preserved(self):
        rates = np.random.default_rng(0).normal(size=(37, 3))
        assert derive_accel_labels(rates, 0.05).shape == (37, 3)

    def test_one_dimensional_series_accepted(self):
        labels = derive_accel_labels(np.array([0.0, 1.0, 2.0]), 1.0)
        assert labels.shape == (3, 1)
        np.testing.assert_allclose(labels[:, 0], 1.0)

    def test_rejects_short_series(self):
        with pytest.raises(ValueError):
            derive_accel_labels(np.zeros((2, 3)), 0.02)

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            derive_accel_labels(np.zeros((5, 3)), 0.0)


class TestExcitePolicy:
    def test_row_count(self):
        assert excite_policy(1.0, 0.1, DEFAULT_LIMITS, seed=0).shape == (10, 2)

    def test_values_within_rate_limits(self):
        acts = excite_policy(30.0, 0.02, DEFAULT_LIMITS, seed=3)
        assert np.all(acts[:, 0] >= DEFAULT_LIMITS.rpm_rate_min)
        assert np.all(acts[:, 0] <= DEFAULT_LIMITS.rpm_rate_max)
        assert np.all(acts[:, 1] >= DEFAULT_LIMITS.steer_rate_min)
        assert np.all(acts[:, 1] <= DEFAULT_LIMITS.steer_rate_max)

    def test_deterministic_per_seed(self):
        a = excite_policy(5.0, 0.02, DEFAULT_LIMITS, seed=9)
        b = excite_policy(5.0, 0.02, DEFAULT_LIMITS, seed=9)
        c = excite_policy(5.0, 0.02, DEFAULT_LIMITS, seed=10)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_piecewise_constant_segments(self):
        acts = excite_policy(20.0, 0.02, DEFAULT_LIMITS, seed=1)
        switch = np.any(np.diff(acts, axis=0) != 0, axis=1)
        run_lengths = np.diff(np.flatnonzero(np.concatenate([[True], switch, [True]])))
        assert run_lengths.max() <= int(round(0.5 / 0.02))
        # 20 s of 0.1..0.5 s segments means at least 40 of them
        assert len(run_lengths) >= 40

    def test_extreme_pinning(self):
        acts = excite_policy(10.0, 0.02, DEFAULT_LIMITS, seed=2, extreme_fraction=1.0)
        at_extreme = (
            (acts[:, 0] == DEFAULT_LIMITS.rpm_rate_min)
            | (acts[:, 0] == DEFAULT_LIMITS.rpm_rate_max)
            | (acts[:, 1] == DEFAULT_LIMITS.steer_rate_min)
            | (acts[:, 1] == DEFAULT_LIMITS.steer_rate_max)
        )
        assert np.all(at_extreme)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            excite_policy(0.0, 0.02, DEFAULT_LIMITS, seed=0)
        with pytest.raises(ValueError):
            excite_policy(1.0, -0.02, DEFAULT_LIMITS, seed=0)


class TestGenerateDataset:
    def test_sample_count_exact(self):
        data = generate_dataset(QUIET, DEFAULT_LIMITS, 1.0, 0.02, 0.0, seed=0)
        assert len(data) == 50

    def test_hour_of_logging_count(self):
        data = generate_dataset(QUIET, DEFAULT_LIMITS, 3600.0, 0.02, 0.0, seed=0)
        assert len(data) == 180_000

    def test_forward_labels_match_analytic_accelerations(self):
        # the simulator holds acceleration constant within a tick, so the
        # per-tick rate increment divided by dt recovers it almost exactly
        data = generate_dataset(QUIET, DEFAULT_LIMITS, 40.0, 0.02, 0.0, seed=4)
        truth = total_accel_array(data.states, data.actions, QUIET)
        np.testing.assert_allclose(data.labels, truth, rtol=1e-9, atol=1e-9)

    def test_central_labels_blur_across_ticks(self):
        forward = generate_dataset(QUIET, DEFAULT_LIMITS, 40.0, 0.02, 0.0, seed=4)
        central = generate_dataset(
            QUIET, DEFAULT_LIMITS, 40.0, 0.02, 0.0, seed=4, label_mode="central"
        )
        truth = total_accel_array(central.states, central.actions, QUIET)
        err_c = np.sqrt(np.mean((central.labels - truth) ** 2))
        err_f = np.sqrt(np.mean((forward.labels - truth) ** 2))
        pooled = np.std(central.labels)
        assert err_f < err_c  # smoothing can only hurt on piecewise-constant input
        assert err_c < 0.25 * pooled

    def test_deterministic_per_seed(self):
        a = generate_dataset(QUIET, DEFAULT_LIMITS, 4.0, 0.02, 0.01, seed=7)
        b = generate_dataset(QUIET, DEFAULT_LIMITS, 4.0, 0.02, 0.01, seed=7)
        c = generate_dataset(QUIET, DEFAULT_LIMITS, 4.0, 0.02, 0.01, seed=8)
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert not np.array_equal(a.labels, c.labels)

    def test_rate_noise_perturbs_labels_and_recorded_rates(self):
        clean = generate_dataset(QUIET, DEFAULT_LIMITS, 4.0, 0.02, 0.0, seed=7)
        noisy = generate_dataset(QUIET, DEFAULT_LIMITS, 4.0, 0.02, 0.01, seed=7)
        assert not np.array_equal(clean.labels, noisy.labels)
        assert not np.array_equal(clean.states[:, [1, 3, 5]], noisy.states[:, [1, 3, 5]])
        # non-rate columns describe the same underlying rollout
        np.testing.assert_array_equal(clean.states[:, [0, 2, 4, 6, 7]], noisy.states[:, [0, 2, 4, 6, 7]])
        np.testing.assert_array_equal(clean.actions, noisy.actions)

    def test_noise_magnitude_shows_in_labels(self):
        noisy = generate_dataset(QUIET, DEFAULT_LIMITS, 40.0, 0.02, 0.01, seed=5)
        # yaw has no true signal, so its labels are pure differenced noise
        # with std sqrt(2) * 0.01 / 0.02
        expected = math.sqrt(2.0) * 0.01 / 0.02
        assert np.std(noisy.labels[:, 2]) == pytest.approx(expected, rel=0.1)

    def test_actions_recorded_within_rate_limits(self):
        data = generate_dataset(QUIET, DEFAULT_LIMITS, 20.0, 0.02, 0.0, seed=6)
        assert np.all(np.abs(data.actions[:, 0]) <= 5000.0)
        assert np.all(np.abs(data.actions[:, 1]) <= 6.5)
        # recorded states stay inside actuator position limits too
        assert np.all(data.states[:, 6] >= 0.0)
        assert np.all(data.states[:, 6] <= 1980.0)
        assert np.all(np.abs(data.states[:, 7]) <= 0.65)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_dataset(QUIET, DEFAULT_LIMITS, 0.02, 0.02, 0.0, seed=0)
        with pytest.raises(ValueError):
            generate_dataset(QUIET, DEFAULT_LIMITS, 1.0, 0.02, -0.1, seed=0)
        with pytest.raises(ValueError):
            generate_dataset(QUIET, DEFAULT_LIMITS, 1.0, 0.02, 0.0, seed=0, label_mode="spline")


class TestDataset:
    def test_sequence_protocol(self):
        states, actions, _ = synthetic_columns(12)
        data = Dataset(states, actions, np.zeros((12, 3)))
        assert len(data) == 12
        sample = data[3]
        assert isinstance(sample, Sample)
        np.testing.assert_array_equal(sample.state.as_array(), states[3])
        np.testing.assert_array_equal(sample.action.as_array(), actions[3])
        assert isinstance(data[2:5], Dataset)
        assert len(data[2:5]) == 3

    def test_from_samples_round_trip(self):
        states, actions, _ = synthetic_columns(5, seed=2)
        labels = np.arange(15, dtype=float).reshape(5, 3)
        data = Dataset(states, actions, labels)
        rebuilt = Dataset.from_samples(list(data))
        np.testing.assert_array_equal(rebuilt.states, states)
        np.testing.assert_array_equal(rebuilt.labels, labels)

    def test_inputs_concatenation(self):
        states, actions, _ = synthetic_columns(6)
        data = Dataset(states, actions, np.zeros((6, 3)))
        x = data.inputs()
        assert x.shape == (6, 10)
        np.testing.assert_array_equal(x[:, :8], states)
        np.testing.assert_array_equal(x[:, 8:], actions)

    def test_rejects_inconsistent_shapes(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((4, 8)), np.zeros((3, 2)), np.zeros((4, 3)))

    def test_rejects_non_finite(self):
        states, actions, _ = synthetic_columns(4)
        labels = np.zeros((4, 3))
        labels[1, 1] = math.inf
        with pytest.raises(ValueError):
            Dataset(states, actions, labels)


class TestTrainConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epochs": 0},
            {"batch_size": 0},
            {"learning_rate": 0.0},
            {"learning_rate": 1.5},
            {"val_fraction": 0.0},
            {"val_fraction": 1.0},
            {"momentum": 1.0},
            {"model_dt": 0.0},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(TrainingConfigError):
            TrainConfig(**kwargs)


class TestTrain:
    def test_deterministic_given_seeds(self):
        states, actions, rng = synthetic_columns(600, seed=3)
        labels = rng.normal(size=(600, 3))
        data = Dataset(states, actions, labels)
        cfg = TrainConfig(epochs=3, hidden_dims=(8, 8, 8))
        m1, h1 = train(data, cfg)
        m2, h2 = train(data, cfg)
        assert h1 == h2
        for a, b in zip(m1.weights + m1.biases, m2.weights + m2.biases):
            np.testing.assert_array_equal(a, b)

    def test_normalization_uses_training_split_only(self):
        states, actions, rng = synthetic_columns(200, seed=4)
        labels = rng.normal(size=(200, 3))
        data = Dataset(states, actions, labels)
        cfg = TrainConfig(epochs=1, hidden_dims=(4, 4, 4))
        model, _ = train(data, cfg)
        split_rng = np.random.default_rng(cfg.seed)
        perm = split_rng.permutation(200)
        n_val = int(round(200 * cfg.val_fraction))
        train_idx = perm[n_val:]
        x_train = data.inputs()[train_idx]
        np.testing.assert_array_equal(model.input_mean, x_train.mean(axis=0))
        np.testing.assert_array_equal(model.input_std, x_train.std(axis=0))

    def test_zero_variance_feature_is_named(self):
        states, actions, rng = synthetic_columns(100, seed=5)
        states[:, 7] = 0.31  # constant steering angle
        data = Dataset(states, actions, rng.normal(size=(100, 3)))
        with pytest.raises(TrainingConfigError, match="steer"):
            train(data, TrainConfig(epochs=1, hidden_dims=(4, 4, 4)))

    def test_zero_variance_label_gets_unit_scale(self):
        states, actions, rng = synthetic_columns(200, seed=6)
        labels = rng.normal(size=(200, 3))
        labels[:, 2] = 0.0
        data = Dataset(states, actions, labels)
        model, _ = train(data, TrainConfig(epochs=2, hidden_dims=(4, 4, 4)))
        assert model.output_std[2] == 1.0
        assert model.output_mean[2] == 0.0

    def test_constant_nonzero_label_gets_unit_scale(self):
        states, actions, rng = synthetic_columns(200, seed=12)
        labels = rng.normal(size=(200, 3))
        labels[:, 1] = 2.5
        data = Dataset(states, actions, labels)
        model, _ = train(data, TrainConfig(epochs=2, hidden_dims=(4, 4, 4)))
        assert model.output_std[1] == 1.0
        assert model.output_mean[1] == pytest.approx(2.5, rel=1e-12)

    def test_zero_acceleration_system_learned(self):
        states, actions, _ = synthetic_columns(4000, seed=1)
        data = Dataset(states, actions, np.zeros((4000, 3)))
        cfg = TrainConfig(epochs=50, learning_rate=1e-2, batch_size=64)
        model, history = train(data, cfg)
        assert history[-1][2] <= 1e-3
        pred = predict_accel_array(model, states, actions)
        assert np.abs(pred).max() <= 0.15

    def test_linear_target_sanity_floor(self):
        # an easy target must be fit well inside 50 epochs
        states, actions, rng = synthetic_columns(20000)
        x = np.concatenate([states, actions], axis=1)
        x_norm = (x - x.mean(axis=0)) / x.std(axis=0)
        labels = x_norm @ rng.normal(0, 1, (10, 3))
        data = Dataset(states, actions, labels)
        cfg = TrainConfig(epochs=50, learning_rate=1e-2, batch_size=64)
        _, history = train(data, cfg)
        assert min(h[1] for h in history) <= 1e-3

    def test_returned_model_is_best_validation_epoch(self):
        states, actions, rng = synthetic_columns(400, seed=8)
        labels = rng.normal(size=(400, 3))
        data = Dataset(states, actions, labels)
        cfg = TrainConfig(epochs=10, hidden_dims=(6, 6, 6))
        model, history = train(data, cfg)
        split_rng = np.random.default_rng(cfg.seed)
        perm = split_rng.permutation(400)
        n_val = int(round(400 * cfg.val_fraction))
        val_idx = perm[:n_val]
        pred = predict_accel_array(model, states[val_idx], actions[val_idx])
        val_mse = np.mean(
            ((pred - labels[val_idx]) / model.output_std) ** 2
        )
        assert val_mse == pytest.approx(min(h[2] for h in history), rel=1e-9)

    def test_history_shape_and_epoch_numbering(self):
        states, actions, rng = synthetic_columns(100, seed=9)
        data = Dataset(states, actions, rng.normal(size=(100, 3)))
        _, history = train(data, TrainConfig(epochs=4, hidden_dims=(4, 4, 4)))
        assert [h[0] for h in history] == [1, 2, 3, 4]
        assert all(math.isfinite(h[1]) and math.isfinite(h[2]) for h in history)

    def test_model_dt_propagates(self):
        states, actions, rng = synthetic_columns(100, seed=10)
        data = Dataset(states, actions, rng.normal(size=(100, 3)))
        model, _ = train(data, TrainConfig(epochs=1, hidden_dims=(4, 4, 4), model_dt=0.05))
        assert model.dt == 0.05

    def test_rejects_tiny_dataset(self):
        states, actions, _ = synthetic_columns(6)
        data = Dataset(states, actions, np.zeros((6, 3)))
        with pytest.raises(TrainingConfigError):
            train(data, TrainConfig(epochs=1))

    def test_rejects_split_without_training_data(self):
        states, actions, _ = synthetic_columns(10)
        data = Dataset(states, actions, np.ones((10, 3)))
        with pytest.raises(TrainingConfigError):
            train(data, TrainConfig(epochs=1, val_fraction=0.99))

    def test_accepts_sample_sequences(self):
        states, actions, rng = synthetic_columns(60, seed=11)
        samples = [
            Sample(
                state=VehicleState.from_array(states[i]),
                action=Action.from_array(actions[i]),
                label=AngularAccel(0.0, 0.0, 0.0),
            )
            for i in range(60)
        ]
        model, _ = train(samples, TrainConfig(epochs=1, hidden_dims=(4, 4, 4)))
        assert model.layer_dims == (10, 4, 4, 4, 3)


def random_model_and_sample(seed):
    states, actions, rng = synthetic_columns(1, seed=seed)
    data = Dataset(states, actions, rng.normal(size=(1, 3)))
    sample = data[0]
    big = Dataset(*synthetic_columns(50, seed=seed + 100)[:2], rng.normal(size=(50, 3)))
    model, _ = train(big, TrainConfig(epochs=1, hidden_dims=(8, 8, 8), seed=seed), model_init_seed=seed)
    return model, sample


class TestGradientCheck:
    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_analytic_matches_finite_differences(self, seed):
        model, sample = random_model_and_sample(seed)
        assert gradient_check(model, sample, epsilon=1e-5) < 1e-4

    def test_zero_residual_gives_zero_analytic_gradient(self):
        from midair.model import forward_normalized
        from midair.training import backprop

        model, sample = random_model_and_sample(7)
        x = np.concatenate([sample.state.as_array(), sample.action.as_array()])[None, :]
        x_norm = (x - model.input_mean) / model.input_std
        target = forward_normalized(model, x_norm)
        loss, grad_w, grad_b = backprop(model, x_norm, target)
        assert loss == 0.0
        for g in grad_w + grad_b:
            np.testing.assert_array_equal(g, np.zeros_like(g))

    def test_repeated_call_identical(self):
        model, sample = random_model_and_sample(9)
        assert gradient_check(model, sample) == gradient_check(model, sample)

    def test_model_parameters_untouched(self):
        model, sample = random_model_and_sample(11)
        before = [p.copy() for p in model.weights + model.biases]
        gradient_check(model, sample)
        for got, want in zip(model.weights + model.biases, before):
            np.testing.assert_array_equal(got, want)
