"""Training loops: step sizes, state init, mode equivalence, logging."""

import math

import numpy as np
import pytest

from tropicnet.forest import TraceForest
from tropicnet.initializers import structured_init
from tropicnet.model import NumericalError, MinMaxModel
from tropicnet.trainer import (
    DenseEngine,
    SgdEngine,
    TrainConfig,
    benchmark,
    constant_step,
    init_state,
    polyak_step,
    train,
    train_avg_sgd,
    train_max,
    write_bench_csv,
)


def toy_data(rng, n=24, p=4, c=3):
    X = rng.normal(size=(n, p))
    y = rng.integers(0, c, size=n)
    return X, y


class TestStepSizes:
    def test_polyak_known_value(self):
        assert polyak_step(2.0, 0.0, 4.0) == 0.5

    def test_polyak_at_target(self):
        assert polyak_step(1.0, 1.0, 4.0) == 0.0

    def test_polyak_zero_gradient_guard(self):
        assert polyak_step(5.0, 0.0, 0.0) == 0.0
        assert polyak_step(5.0, 0.0, 1e-20) == 0.0

    def test_constant_known_values(self):
        assert constant_step(0.1, 10) == pytest.approx(0.011180, abs=1e-6)
        assert constant_step(2 * math.sqrt(2), 1) == pytest.approx(1.0, rel=1e-12)

    def test_constant_decreasing_in_classes(self):
        steps = [constant_step(0.1, c) for c in range(1, 12)]
        assert all(a > b for a, b in zip(steps, steps[1:]))


class TestConfig:
    def test_phase_switch_default_half(self):
        cfg = TrainConfig(iterations=1000)
        assert cfg.phase_switch == 500

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(objective="median")
        with pytest.raises(ValueError):
            TrainConfig(mode="blocked")
        with pytest.raises(ValueError):
            TrainConfig(iterations=10, phase_switch=20)
        with pytest.raises(ValueError):
            TrainConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            TrainConfig(skip_ratio=0)


class TestInitState:
    def test_single_sample_forest(self):
        rng = np.random.default_rng(0)
        X, y = toy_data(rng, n=1)
        model = structured_init(X, y, n_hidden=1, scale=2.0, n_classes=3,
                                anchor_indices=[0])
        state = init_state(model, X, y, TrainConfig(iterations=5))
        value, n_star = state.engine.max_loss()
        assert n_star == 0
        assert value == pytest.approx(state.engine.loss[0], abs=0)

    def test_loss_tree_root_equals_scan(self):
        rng = np.random.default_rng(1)
        X, y = toy_data(rng)
        model = structured_init(X, y, n_hidden=6, scale=2.0, seed=0, n_classes=3)
        state = init_state(model, X, y, TrainConfig(iterations=5))
        value, n_star = state.engine.max_loss()
        assert value == state.engine.loss.max()
        assert n_star == int(np.argmax(state.engine.loss))

    def test_rebuild_idempotence(self):
        rng = np.random.default_rng(2)
        X, y = toy_data(rng)
        model = structured_init(X, y, n_hidden=6, scale=2.0, seed=0, n_classes=3)
        a = init_state(model, X, y, TrainConfig(iterations=5))
        b = init_state(model, X, y, TrainConfig(iterations=5))
        np.testing.assert_array_equal(a.engine.loss, b.engine.loss)
        np.testing.assert_array_equal(a.engine.min_nodes, b.engine.min_nodes)

    def test_engine_dispatch(self):
        rng = np.random.default_rng(3)
        X, y = toy_data(rng)
        model = structured_init(X, y, n_hidden=4, scale=2.0, seed=0, n_classes=3)
        assert isinstance(
            init_state(model, X, y, TrainConfig(mode="dense", iterations=1)).engine,
            DenseEngine,
        )
        assert isinstance(
            init_state(model, X, y, TrainConfig(objective="avg", iterations=1)).engine,
            SgdEngine,
        )
        assert isinstance(
            init_state(model, X, y, TrainConfig(iterations=1)).engine, TraceForest
        )


class TestTrainMax:
    def test_one_step_decrease_without_tie_collisions(self):
        """One adaptive step from all-zero weights strictly reduces the max.

        At the fully tied zero start, samples of other labels share every
        winner, so the one-step guarantee only holds when no rival label is
        dragged along; the single-sample case isolates it.
        """
        rng = np.random.default_rng(4)
        X = rng.normal(size=(1, 4))
        y = np.array([1])
        model = MinMaxModel(np.zeros(8), np.zeros((8, 5)), np.zeros((5, 3)))
        state = init_state(model, X, y, TrainConfig(iterations=1, phase_switch=1))
        before = state.engine.max_loss()[0]
        assert before == pytest.approx(math.log(3), abs=1e-12)
        log = train_max(state)
        assert log.rows[-1].max_loss < before

    def test_mixed_labels_descend_within_a_few_steps(self):
        rng = np.random.default_rng(4)
        X, y = toy_data(rng)
        model = MinMaxModel(np.zeros(8), np.zeros((8, 5)), np.zeros((5, 3)))
        cfg = TrainConfig(iterations=50, phase_switch=25)
        state = init_state(model, X, y, cfg)
        log = train_max(state)
        assert log.rows[-1].max_loss < math.log(3)

    def test_mode_equivalence(self):
        """dense, sparse, and skip with ratio 1 share the loss trajectory."""
        rng = np.random.default_rng(5)
        X, y = toy_data(rng, n=32)
        trajectories = {}
        for mode in ("sparse", "dense", "sparse_skip_w0"):
            model = structured_init(X, y, n_hidden=6, scale=2.0, seed=1, n_classes=3)
            cfg = TrainConfig(mode=mode, iterations=120, phase_switch=60,
                              skip_ratio=1, log_every=1)
            log = train_max(init_state(model, X, y, cfg))
            trajectories[mode] = np.array([r.max_loss for r in log.rows])
        np.testing.assert_allclose(
            trajectories["sparse"], trajectories["dense"], atol=1e-8
        )
        np.testing.assert_allclose(
            trajectories["sparse"], trajectories["sparse_skip_w0"], atol=1e-8
        )

    def test_skip_ratio_counts_pattern_applications(self):
        rng = np.random.default_rng(6)
        X, y = toy_data(rng)
        model = structured_init(X, y, n_hidden=6, scale=2.0, seed=0, n_classes=3)
        cfg = TrainConfig(mode="sparse_skip_w0", iterations=100, skip_ratio=10,
                          phase_switch=50)
        state = init_state(model, X, y, cfg)
        train_max(state)
        assert state.w0_applications == 10

    def test_audit_every_runs_clean(self):
        rng = np.random.default_rng(7)
        X, y = toy_data(rng)
        model = structured_init(X, y, n_hidden=6, scale=2.0, seed=0, n_classes=3)
        cfg = TrainConfig(iterations=50, audit_every=10, phase_switch=25)
        train_max(init_state(model, X, y, cfg))  # any divergence would raise

    def test_loss_history_tracks_roots(self):
        rng = np.random.default_rng(8)
        X, y = toy_data(rng)
        model = structured_init(X, y, n_hidden=6, scale=2.0, seed=0, n_classes=3)
        cfg = TrainConfig(iterations=30, phase_switch=15, log_every=1)
        state = init_state(model, X, y, cfg)
        log = train_max(state)
        history = list(state.loss_history)
        assert len(history) == 31
        logged = [r.max_loss for r in log.rows]
        np.testing.assert_allclose(history, logged, atol=0)

    def test_nan_aborts_with_diagnostic(self):
        rng = np.random.default_rng(9)
        X, y = toy_data(rng)
        model = structured_init(X, y, n_hidden=6, scale=2.0, seed=0, n_classes=3)
        cfg = TrainConfig(iterations=5, phase_switch=5)
        state = init_state(model, X, y, cfg)
        state.engine.loss[3] = np.nan
        state.engine.loss_tree.assign([3], [np.nan])
        with pytest.raises(NumericalError, match="iteration"):
            train_max(state)

    def test_log_csv_format(self, tmp_path):
        rng = np.random.default_rng(10)
        X, y = toy_data(rng)
        model = structured_init(X, y, n_hidden=4, scale=2.0, seed=0, n_classes=3)
        cfg = TrainConfig(iterations=20, phase_switch=10, log_every=5)
        log = train_max(init_state(model, X, y, cfg))
        path = tmp_path / "log.csv"
        log.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "iter,max_loss,avg_loss,step_size,ms_per_iter"
        assert len(lines) == 1 + 5  # iterations 0,5,10,15 + final row at 20


class TestTrainAvgSgd:
    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(11)
        X, y = toy_data(rng)

        def run():
            model = structured_init(X, y, n_hidden=6, scale=2.0, seed=2, n_classes=3)
            cfg = TrainConfig(objective="avg", iterations=200, seed=42, log_every=50)
            state = init_state(model, X, y, cfg)
            log = train_avg_sgd(state)
            return [r.avg_loss for r in log.rows], state.model.w_max.copy()

        a_log, a_w = run()
        b_log, b_w = run()
        assert a_log == b_log
        np.testing.assert_array_equal(a_w, b_w)

    def test_average_loss_decreases_early(self):
        """Average loss over full passes drops over the first epochs."""
        rng = np.random.default_rng(12)
        X, y = toy_data(rng, n=40)
        model = MinMaxModel(
            rng.normal(scale=0.5, size=8),
            rng.normal(scale=0.5, size=(8, 6)),
            rng.normal(scale=0.5, size=(6, 3)),
        )
        cfg = TrainConfig(objective="avg", iterations=400, seed=0, log_every=40,
                          epsilon=0.5)
        state = init_state(model, X, y, cfg)
        log = train_avg_sgd(state)
        assert log.rows[-1].avg_loss < log.rows[0].avg_loss

    def test_dispatcher(self):
        rng = np.random.default_rng(13)
        X, y = toy_data(rng)
        model = structured_init(X, y, n_hidden=4, scale=2.0, seed=0, n_classes=3)
        cfg = TrainConfig(objective="avg", iterations=10, log_every=5)
        log = train(init_state(model, X, y, cfg))
        assert len(log.rows) >= 2


class TestBenchmark:
    def test_rows_and_csv(self, tmp_path):
        rng = np.random.default_rng(14)
        X, y = toy_data(rng, n=48)

        def make_model():
            return structured_init(X, y, n_hidden=8, scale=2.0, seed=3, n_classes=3)

        rows = benchmark(make_model, X, y, iterations=20)
        assert [r.mode for r in rows] == ["dense", "sparse", "sparse_skip_w0"]
        assert all(r.total_s > 0 for r in rows)
        assert rows[0].peak_forest_bytes < rows[1].peak_forest_bytes
        path = tmp_path / "bench.csv"
        write_bench_csv(rows, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "mode,total_s,s_per_iter,peak_forest_bytes"
        assert len(lines) == 4

    def test_ratio_grows_with_sample_count(self):
        """dense/sparse per-iteration ratio grows from N=200 to N=2000."""
        rng = np.random.default_rng(15)
        ratios = []
        for n in (200, 2000):
            X = rng.normal(size=(n, 16))
            y = rng.integers(0, 3, size=n)

            def make_model():
                return structured_init(X, y, n_hidden=16, scale=2.0, seed=0,
                                       n_classes=3)

            rows = benchmark(make_model, X, y, iterations=15,
                             modes=("dense", "sparse"))
            by_mode = {r.mode: r.s_per_iter for r in rows}
            ratios.append(by_mode["dense"] / by_mode["sparse"])
        assert ratios[1] > ratios[0]
