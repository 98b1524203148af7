import numpy as np
import pytest

from nirspain.dataio import WindowSet
from nirspain.layers import ModelSpec, build_model
from nirspain.trainer import (
    AdamState,
    EpochRecord,
    TrainConfig,
    TrainingDivergedError,
    adam_step,
    average_histories,
    clip_gradients,
    evaluate,
    read_history_csv,
    run_cv_experiment,
    train_one_model,
    write_history_csv,
)


def toy_windows(n_per_class=12, T=12, channels=4, noise=0.02, seed=0):
    """Four constant-signal levels plus jitter: linearly separable."""
    rng = np.random.default_rng(seed)
    levels = [0.4, 0.8, 1.2, 1.6]
    X, y = [], []
    for c, level in enumerate(levels):
        for _ in range(n_per_class):
            X.append(level + noise * rng.standard_normal((T, channels)))
            y.append(c)
    X = np.stack(X)
    y = np.asarray(y)
    perm = rng.permutation(len(y))
    return X[perm], y[perm]


def quick_cfg(**kw):
    defaults = dict(max_epochs=40, patience=20, batch_size=16, seed=3)
    defaults.update(kw)
    return TrainConfig(**defaults)


class TestAdam:
    def test_first_step_magnitude_is_learning_rate(self):
        params = [np.zeros(5)]
        grads = [np.full(5, 0.37)]
        st = AdamState(params, lr=0.001)
        adam_step(params, grads, st)
        np.testing.assert_allclose(-params[0], 0.001, atol=1e-6)

    def test_zero_gradient_leaves_parameters(self):
        params = [np.ones((2, 2))]
        st = AdamState(params)
        for _ in range(10):
            adam_step(params, [np.zeros((2, 2))], st)
        np.testing.assert_array_equal(params[0], 1.0)

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        grads_seq = [rng.standard_normal((3, 3)) for _ in range(20)]
        outs = []
        for _ in range(2):
            params = [np.ones((3, 3))]
            st = AdamState(params, lr=0.01)
            for g in grads_seq:
                adam_step(params, [g.copy()], st)
            outs.append(params[0].copy())
        np.testing.assert_array_equal(outs[0], outs[1])

    def test_second_moment_nonnegative_and_update_bounded(self):
        rng = np.random.default_rng(1)
        params = [rng.standard_normal(20)]
        st = AdamState(params, lr=0.001)
        grads = [np.abs(rng.standard_normal(20)) + 0.1]  # constant-sign
        prev = params[0].copy()
        for _ in range(50):
            adam_step(params, [g.copy() for g in grads], st)
            assert (st.v[0] >= 0).all()
            step = np.abs(params[0] - prev)
            assert (step <= 0.001 * 1.2).all()
            prev = params[0].copy()

    def test_shape_mismatch(self):
        params = [np.ones(3)]
        st = AdamState(params)
        with pytest.raises(ValueError, match="shape"):
            adam_step(params, [np.ones(4)], st)


class TestClipGradients:
    def test_below_threshold_untouched(self):
        g = [np.array([0.3, 0.4])]
        clip_gradients(g, 5.0)
        np.testing.assert_array_equal(g[0], [0.3, 0.4])

    def test_above_threshold_rescaled(self):
        g = [np.array([30.0, 40.0])]
        clip_gradients(g, 5.0)
        np.testing.assert_allclose(np.sqrt((g[0] ** 2).sum()), 5.0)

    def test_disabled_with_zero(self):
        g = [np.array([30.0, 40.0])]
        clip_gradients(g, 0)
        np.testing.assert_array_equal(g[0], [30.0, 40.0])


class TestTrainConfig:
    def test_patience_must_be_less_than_epochs(self):
        with pytest.raises(ValueError, match="patience"):
            TrainConfig(max_epochs=10, patience=10)

    def test_batch_size_positive(self):
        with pytest.raises(ValueError, match="batch_size"):
            TrainConfig(batch_size=0)


class TestTrainOneModel:
    def test_empty_split_rejected(self):
        X, y = toy_windows(2)
        with pytest.raises(ValueError, match="nonempty"):
            train_one_model(ModelSpec("mlp"), X, y, X[:0], y[:0], quick_cfg())

    def test_history_length_equals_stopped_epoch(self):
        X, y = toy_windows(4)
        spec = ModelSpec("mlp", layer_widths=(8, 8))
        _, hist, stopped = train_one_model(spec, X, y, X, y, quick_cfg(max_epochs=5, patience=4))
        assert len(hist) == stopped
        assert [r.epoch for r in hist] == list(range(1, stopped + 1))

    def test_plateau_stops_after_patience(self):
        # constant-noise task: val loss cannot keep improving, so early
        # stopping fires well before max_epochs
        rng = np.random.default_rng(0)
        X = rng.standard_normal((40, 8, 3))
        y = rng.integers(0, 4, 40)
        spec = ModelSpec("mlp", layer_widths=(4, 4), dropout_rate=0.0)
        cfg = quick_cfg(max_epochs=100, patience=5, seed=1)
        _, hist, stopped = train_one_model(spec, X, y, X[:10], y[:10], cfg)
        assert stopped < 100

    def test_best_model_by_validation_accuracy(self):
        X, y = toy_windows(6)
        spec = ModelSpec("mlp", layer_widths=(8, 8), dropout_rate=0.0)
        state, hist, _ = train_one_model(spec, X, y, X, y, quick_cfg(max_epochs=15, patience=10))
        best = max(r.val_acc for r in hist)
        _, final_acc, _ = evaluate(state, X, y)
        np.testing.assert_allclose(final_acc, best, atol=1e-12)

    def test_deterministic(self):
        X, y = toy_windows(4)
        spec = ModelSpec("lstm_fwd", layer_widths=(6, 4))
        cfg = quick_cfg(max_epochs=3, patience=2)
        s1, h1, _ = train_one_model(spec, X, y, X, y, cfg, seed=5)
        s2, h2, _ = train_one_model(spec, X, y, X, y, cfg, seed=5)
        for a, b in zip(s1.parameters(), s2.parameters()):
            np.testing.assert_array_equal(a, b)
        assert [r.val_loss for r in h1] == [r.val_loss for r in h2]

    @pytest.mark.parametrize("kind", ["mlp", "lstm_fwd", "lstm_bwd", "bilstm"])
    def test_separable_set_reaches_full_training_accuracy(self, kind):
        X, y = toy_windows(12)
        spec = ModelSpec(kind)
        cfg = quick_cfg(max_epochs=300, patience=50)
        _, hist, _ = train_one_model(spec, X, y, X, y, cfg, seed=0)
        assert max(r.train_acc for r in hist) == 1.0

    def test_training_loss_trends_down_on_separable_set(self):
        X, y = toy_windows(8)
        spec = ModelSpec("mlp", layer_widths=(8, 8))
        _, hist, _ = train_one_model(spec, X, y, X, y, quick_cfg(max_epochs=60, patience=59))
        losses = [r.train_loss for r in hist]
        window = 20
        means = [np.mean(losses[i : i + window]) for i in range(len(losses) - window + 1)]
        assert all(b <= a + 1e-9 for a, b in zip(means, means[1:]))

    def test_divergence_detected(self):
        X, y = toy_windows(4)
        X = X * 1e300  # force non-finite loss quickly
        spec = ModelSpec("mlp", layer_widths=(4, 4))
        with pytest.raises(TrainingDivergedError, match="epoch"):
            train_one_model(spec, X, y, X, y, quick_cfg(max_epochs=3, patience=2))


class TestAverageHistories:
    def test_padding_carries_last_value(self):
        h1 = [EpochRecord(1, 1.0, 1.0, 0.5, 0.5), EpochRecord(2, 0.5, 0.5, 0.6, 0.6)]
        h2 = [EpochRecord(1, 2.0, 2.0, 0.4, 0.4)]
        avg = average_histories([h1, h2])
        assert len(avg) == 2
        assert avg[0].train_loss == 1.5
        assert avg[1].train_loss == (0.5 + 2.0) / 2  # h2 carries epoch-1 value

    def test_epochs_renumbered(self):
        h = [[EpochRecord(1, 1, 1, 0, 0)], [EpochRecord(1, 2, 2, 0, 0)]]
        avg = average_histories(h)
        assert avg[0].epoch == 1


def small_windowset(n_trials=8, per_trial=6, T=10, channels=3, seed=0):
    rng = np.random.default_rng(seed)
    levels = [0.4, 0.8, 1.2, 1.6]
    X, y, origins = [], [], []
    for t in range(n_trials):
        cls = t % 4
        for w in range(per_trial):
            X.append(levels[cls] + 0.05 * rng.standard_normal((T, channels)))
            y.append(cls)
            origins.append((f"s{t:02d}", "t01", w))
    X, y = np.stack(X), np.asarray(y)
    from nirspain.dataio import split_and_fold

    return split_and_fold(X, y, origins, 0.7, n_folds=2, seed=seed)


class TestRunCvExperiment:
    def test_two_folds_two_trainings(self, tmp_path):
        ws = small_windowset()
        cfg = quick_cfg(max_epochs=4, patience=3, n_folds=2)
        reports = run_cv_experiment(
            [ModelSpec("mlp", layer_widths=(6, 4))], ws, cfg, out_dir=tmp_path
        )
        assert len(reports) == 1
        hist = read_history_csv(tmp_path / "history.csv")
        assert set(hist["mlp"].keys()) == {0, 1}
        assert (tmp_path / "mlp_fold0.ckpt").exists()
        assert (tmp_path / "mlp_fold1.ckpt").exists()
        assert (tmp_path / "report.json").exists()

    def test_report_metrics_in_percent_range(self, tmp_path):
        ws = small_windowset()
        cfg = quick_cfg(max_epochs=4, patience=3, n_folds=2)
        (r,) = run_cv_experiment([ModelSpec("mlp", layer_widths=(6, 4))], ws, cfg)
        assert 0 <= r.accuracy <= 100
        assert 0 <= r.sensitivity <= 100
        assert 0 <= r.specificity <= 100
        assert r.confusion.sum() == ws.test_mask.sum()

    def test_experiment_deterministic(self):
        ws = small_windowset()
        cfg = quick_cfg(max_epochs=3, patience=2, n_folds=2)
        specs = [ModelSpec("mlp", layer_widths=(6, 4))]
        a = run_cv_experiment(specs, ws, cfg)
        b = run_cv_experiment(specs, ws, cfg)
        assert a[0].accuracy == b[0].accuracy
        np.testing.assert_array_equal(a[0].confusion, b[0].confusion)

    def test_parallel_folds_match_serial(self):
        ws = small_windowset()
        cfg = quick_cfg(max_epochs=3, patience=2, n_folds=2)
        specs = [ModelSpec("mlp", layer_widths=(6, 4))]
        serial = run_cv_experiment(specs, ws, cfg, jobs=1)
        parallel = run_cv_experiment(specs, ws, cfg, jobs=2)
        assert serial[0].accuracy == parallel[0].accuracy
        np.testing.assert_array_equal(serial[0].confusion, parallel[0].confusion)


class TestHistoryCsv:
    def test_round_trip(self, tmp_path):
        rows = [
            ("mlp", 0, EpochRecord(1, 1.25, 1.5, 0.25, 0.3)),
            ("mlp", 1, EpochRecord(1, 1.0, 1.25, 0.5, 0.4)),
            ("bilstm", 0, EpochRecord(1, 0.75, 1.0, 0.75, 0.5)),
        ]
        path = tmp_path / "history.csv"
        write_history_csv(path, rows)
        again = read_history_csv(path)
        assert again["mlp"][1][0].val_acc == 0.4
        assert again["bilstm"][0][0].train_loss == 0.75
