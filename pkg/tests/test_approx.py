"""Pyramid bank approximation: dual formulas, envelope bounds, classifier."""

import numpy as np
import pytest

from tropicnet.approx import (
    build_bank,
    build_classifier_bank,
    covering_radius,
    eval_h,
    eval_h_batch,
    eval_pyramid,
    pyramid_closed_form,
)
from tropicnet.initializers import structured_init
from tropicnet.metrics import model_scores


class TestBuildBank:
    def test_single_origin_point(self):
        bank = build_bank([[0.0]], [0.0], 1.0)
        np.testing.assert_array_equal(bank.biases, [[0.0, 0.0]])

    def test_bias_defining_identity(self):
        """bias[i, j] + lam_j(x^i) = f(x^i) for every pyramid and row."""
        rng = np.random.default_rng(0)
        grid = rng.normal(size=(7, 3))
        f_values = rng.normal(size=7)
        K = 2.5
        bank = build_bank(grid, f_values, K)
        signs = np.tile([K, -K], 3)
        for i in range(7):
            lam = np.repeat(grid[i], 2) * signs
            np.testing.assert_allclose(bank.biases[i] + lam, f_values[i], atol=1e-12)

    def test_rejects_duplicates_and_bad_constant(self):
        with pytest.raises(ValueError):
            build_bank([[0.0], [0.0]], [1.0, 2.0], 1.0)
        with pytest.raises(ValueError):
            build_bank([[0.0]], [1.0], -1.0)


class TestPyramidEvaluation:
    def test_peak_value(self):
        rng = np.random.default_rng(1)
        grid = rng.normal(size=(4, 2))
        f_values = rng.normal(size=4)
        bank = build_bank(grid, f_values, 3.0)
        for i in range(4):
            assert eval_pyramid(bank, i, grid[i]) == pytest.approx(f_values[i], abs=1e-12)

    def test_hand_computed_slope(self):
        bank = build_bank([[0.0]], [1.0], 2.0)
        assert eval_pyramid(bank, 0, [0.5]) == pytest.approx(0.0, abs=1e-15)

    def test_min_form_equals_closed_form(self):
        rng = np.random.default_rng(2)
        grid = rng.normal(size=(6, 4))
        bank = build_bank(grid, rng.normal(size=6), 1.7)
        for _ in range(500):
            x = rng.normal(size=4)
            i = int(rng.integers(6))
            assert eval_pyramid(bank, i, x) == pytest.approx(
                pyramid_closed_form(bank, i, x), abs=1e-12
            )


class TestEnvelope:
    def test_exact_on_grid_points(self):
        """Exactness needs K at least the Lipschitz constant of f on the grid."""
        rng = np.random.default_rng(3)
        grid = rng.uniform(size=(9, 2))
        f_values = rng.normal(size=9)
        quotients = [
            abs(f_values[i] - f_values[j]) / np.max(np.abs(grid[i] - grid[j]))
            for i in range(9) for j in range(i + 1, 9)
        ]
        bank = build_bank(grid, f_values, 1.01 * max(quotients))
        for i in range(9):
            assert eval_h(bank, grid[i]) == pytest.approx(f_values[i], abs=1e-12)

    def test_hand_example_identity_function(self):
        grid = [[0.0], [0.5], [1.0]]
        bank = build_bank(grid, [0.0, 0.5, 1.0], 1.0)
        assert eval_h(bank, [0.25]) == pytest.approx(0.25, abs=1e-12)

    def test_envelope_sandwich_for_lipschitz_target(self):
        """-2 K delta <= h - f <= 0 over sampled points, f 1-Lipschitz."""
        f = lambda x: np.abs(x - 0.3)
        grid = np.linspace(0.0, 1.0, 26)[:, None]
        bank = build_bank(grid, f(grid[:, 0]), 1.0)
        samples = np.linspace(0.0, 1.0, 1500)[:, None]
        h_values = eval_h_batch(bank, samples)
        errors = h_values - f(samples[:, 0])
        delta = covering_radius(grid, samples)
        assert np.all(errors <= 1e-12)
        assert np.all(errors >= -2 * 1.0 * delta - 1e-12)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(4)
        grid = rng.normal(size=(5, 3))
        bank = build_bank(grid, rng.normal(size=5), 1.2)
        points = rng.normal(size=(20, 3))
        batch = eval_h_batch(bank, points)
        for i, x in enumerate(points):
            assert batch[i] == pytest.approx(eval_h(bank, x), abs=1e-12)


class TestCoveringRadius:
    def test_known_radius(self):
        grid = np.array([[0.0], [1.0]])
        points = np.array([[0.5], [0.2]])
        assert covering_radius(grid, points) == pytest.approx(0.5)

    def test_zero_on_grid(self):
        grid = np.array([[0.0, 1.0], [2.0, 3.0]])
        assert covering_radius(grid, grid) == 0.0


class TestClassifierBank:
    def test_coincides_with_anchored_initializer(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(12, 3))
        y = rng.integers(0, 3, size=12)
        bank_model = build_classifier_bank(X, y, scale=4.0, n_classes=3)
        init_model = structured_init(
            X, y, n_hidden=12, scale=4.0, anchor_indices=np.arange(12), n_classes=3
        )
        np.testing.assert_array_equal(bank_model.w_pattern, init_model.w_pattern)
        np.testing.assert_array_equal(bank_model.w_min, init_model.w_min)
        np.testing.assert_array_equal(bank_model.w_max, init_model.w_max)

    def test_anchor_margins_positive(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(15, 4))
        y = rng.integers(0, 3, size=15)
        model = build_classifier_bank(X, y, scale=2.0, n_classes=3)
        scores = model_scores(model, X)
        true_scores = scores[np.arange(15), y]
        others = scores.copy()
        others[np.arange(15), y] = -np.inf
        margins = true_scores - others.max(axis=1)
        assert np.all(margins > 0)

    def test_two_sample_hand_example(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([0, 1])
        model = build_classifier_bank(X, y, scale=1.0, n_classes=2)
        scores = model_scores(model, X)
        np.testing.assert_array_equal(np.argmax(scores, axis=1), y)
        # own pyramid boosted: 0 + 1; rival class via the distant pyramid: -1 + 1
        assert scores[0, 0] == pytest.approx(1.0)
        assert scores[0, 1] == pytest.approx(0.0)
