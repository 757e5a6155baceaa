"""Piecewise-linear function approximation with a bank of pyramid units.

A pyramid centered at grid point x^i is the concave tent

    g_i(x) = f(x^i) - K * ||x - x^i||_inf,

realized in min-plus form as min_j(lam_j(x) + bias[i, j]) over the signed
expansion lam(x) = [K x_1, -K x_1, ..., K x_P, -K x_P]. The upper envelope
h(x) = max_i g_i(x) matches f exactly on the grid and stays within
2 * K * delta of any K-Lipschitz f, where delta is the covering radius of
the grid over the queried region.

The classifier variant shares one bank of pyramids across classes and adds
per-class +/-scale shifts; it coincides parameter-for-parameter with
initializers.structured_init using every sample as an anchor.
"""

from dataclasses import dataclass

import numpy as np

from .initializers import structured_init

__all__ = [
    "PyramidBank",
    "build_bank",
    "eval_pyramid",
    "pyramid_closed_form",
    "eval_h",
    "eval_h_batch",
    "covering_radius",
    "build_classifier_bank",
]


@dataclass
class PyramidBank:
    grid: np.ndarray        # (m, P) centers
    f_values: np.ndarray    # (m,) target values at the centers
    lipschitz: float        # slope K of every pyramid
    biases: np.ndarray      # (m, 2P), biases[i, j] = -lam_j(x^i) + f_values[i]

    @property
    def size(self):
        return self.grid.shape[0]

    @property
    def n_features(self):
        return self.grid.shape[1]


def _signed_expansion(x, lipschitz):
    """lam(x) = [K x_1, -K x_1, ..., K x_P, -K x_P], rows of shape (..., 2P)."""
    x = np.asarray(x, dtype=np.float64)
    doubled = np.repeat(x, 2, axis=-1)
    signs = np.tile([lipschitz, -lipschitz], x.shape[-1])
    return doubled * signs


def build_bank(grid, f_values, lipschitz):
    """Bank with one pyramid per grid point, peaking at (x^i, f(x^i))."""
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    f_values = np.asarray(f_values, dtype=np.float64)
    if lipschitz <= 0:
        raise ValueError("lipschitz constant must be positive")
    if grid.shape[0] != f_values.shape[0]:
        raise ValueError("grid and f_values length mismatch")
    if grid.shape[0] != np.unique(grid, axis=0).shape[0]:
        raise ValueError("grid points must be distinct")
    biases = -_signed_expansion(grid, lipschitz) + f_values[:, None]
    return PyramidBank(
        grid=grid, f_values=f_values, lipschitz=lipschitz, biases=biases
    )


def eval_pyramid(bank, i, x):
    """Pyramid i at x, evaluated through the min-plus form."""
    lam = _signed_expansion(np.atleast_1d(x), bank.lipschitz)
    return float(np.min(lam + bank.biases[i]))


def pyramid_closed_form(bank, i, x):
    """Pyramid i at x via the tent formula f_i - K * ||x - x^i||_inf."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return float(
        bank.f_values[i]
        - bank.lipschitz * np.max(np.abs(x - bank.grid[i]))
    )


def eval_h(bank, x):
    """Upper envelope max_i g_i(x)."""
    lam = _signed_expansion(np.atleast_1d(x), bank.lipschitz)
    return float(np.max(np.min(lam[None, :] + bank.biases, axis=1)))


def eval_h_batch(bank, X):
    """Envelope values for a batch of query points, shape (n,)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    # tent formula and min-plus form agree; the closed form vectorizes cheaply
    dists = np.max(
        np.abs(X[:, None, :] - bank.grid[None, :, :]), axis=2
    )  # (n, m)
    return np.max(bank.f_values[None, :] - bank.lipschitz * dists, axis=1)


def covering_radius(grid, points):
    """Max over `points` of the sup-norm distance to the nearest grid point."""
    grid = np.atleast_2d(np.asarray(grid, dtype=np.float64))
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    dists = np.max(np.abs(points[:, None, :] - grid[None, :, :]), axis=2)
    return float(np.max(np.min(dists, axis=1)))


def build_classifier_bank(samples, labels, scale, n_classes=None):
    """Classifier built from one shared pyramid per sample plus class shifts.

    Identical, parameter for parameter, to the anchored initializer with
    every sample used as an anchor.
    """
    samples = np.asarray(samples, dtype=np.float64)
    return structured_init(
        samples,
        np.asarray(labels, dtype=np.int64),
        n_hidden=samples.shape[0],
        scale=scale,
        anchor_indices=np.arange(samples.shape[0]),
        n_classes=n_classes,
    )
