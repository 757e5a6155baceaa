"""Weight initialization schemes.

The anchored scheme builds the network so that each hidden unit is an inverted
pyramid centered on one training sample: at its anchor the unit outputs
exactly 0, elsewhere -scale times the sup-norm distance to the anchor. The
class layer then boosts the anchor's class by +scale and penalizes the rest
by -scale, so every anchor is classified correctly before any training step.

Gaussian / uniform fills and the Glorot-uniform zero-hidden fill are the
random baselines the anchored scheme is compared against.
"""

from dataclasses import dataclass

import numpy as np

from .model import MinMaxModel, ZeroHiddenModel

__all__ = [
    "InitSpec",
    "structured_init",
    "gaussian_init",
    "uniform_init",
    "glorot_uniform_init",
    "create",
]


@dataclass
class InitSpec:
    kind: str = "structured"           # structured | gaussian | uniform | glorot
    scale: float = 4.0
    anchor_indices: list = None        # optional explicit anchors (structured)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("structured", "gaussian", "uniform", "glorot"):
            raise ValueError(f"unknown init kind {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")


def structured_init(X, y, n_hidden, scale, seed=0, anchor_indices=None, n_classes=None):
    """Anchor-sample initialization of the three-layer network.

    Anchors are drawn without replacement; pattern weights are +/-scale,
    min-layer column h cancels the expansion at anchor h, and the class row
    of anchor h gets +scale (its own class) / -scale (all others).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n_samples, n_features = X.shape
    if n_hidden > n_samples:
        raise ValueError(f"n_hidden={n_hidden} exceeds sample count {n_samples}")
    if n_classes is None:
        n_classes = int(np.max(y)) + 1
    if anchor_indices is None:
        rng = np.random.default_rng(seed)
        anchor_indices = rng.choice(n_samples, size=n_hidden, replace=False)
    anchor_indices = np.asarray(anchor_indices, dtype=np.int64)
    if anchor_indices.size != n_hidden:
        raise ValueError("anchor count must equal n_hidden")
    if len(set(anchor_indices.tolist())) != n_hidden:
        raise ValueError("anchor indices must be distinct")
    if np.any(anchor_indices < 0) or np.any(anchor_indices >= n_samples):
        raise ValueError("anchor index out of range")

    anchors = X[anchor_indices]                      # (H, P)
    w_pattern = np.empty(2 * n_features)
    w_pattern[0::2] = scale
    w_pattern[1::2] = -scale
    w_min = np.empty((2 * n_features, n_hidden))
    w_min[0::2, :] = -scale * anchors.T
    w_min[1::2, :] = scale * anchors.T
    w_max = np.full((n_hidden, n_classes), -scale)
    w_max[np.arange(n_hidden), y[anchor_indices]] = scale
    model = MinMaxModel(w_pattern=w_pattern, w_min=w_min, w_max=w_max)
    model.anchor_indices = anchor_indices
    return model


def _random_min_max(n_features, n_hidden, n_classes, draw):
    return MinMaxModel(
        w_pattern=draw((2 * n_features,)),
        w_min=draw((2 * n_features, n_hidden)),
        w_max=draw((n_hidden, n_classes)),
    )


def gaussian_init(n_features, n_hidden, n_classes, scale, seed=0):
    """All weight arrays i.i.d. N(0, scale^2); the expansion pattern stays fixed."""
    rng = np.random.default_rng(seed)
    return _random_min_max(
        n_features, n_hidden, n_classes, lambda s: rng.normal(0.0, scale, size=s)
    )


def uniform_init(n_features, n_hidden, n_classes, scale, seed=0):
    """All weight arrays i.i.d. U(-scale, scale)."""
    rng = np.random.default_rng(seed)
    return _random_min_max(
        n_features, n_hidden, n_classes, lambda s: rng.uniform(-scale, scale, size=s)
    )


def glorot_uniform_init(n_classes, n_features, seed=0):
    """Zero-hidden model with entries ~ U(-a, a), a = sqrt(6 / (P + C))."""
    rng = np.random.default_rng(seed)
    a = np.sqrt(6.0 / (n_features + n_classes))
    return ZeroHiddenModel(
        weights=rng.uniform(-a, a, size=(n_classes, n_features))
    )


def create(spec, X, y, n_hidden, n_classes=None):
    """Build a model for the given dataset according to an InitSpec."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if n_classes is None:
        n_classes = int(np.max(y)) + 1
    if spec.kind == "structured":
        return structured_init(
            X, y, n_hidden, spec.scale,
            seed=spec.seed, anchor_indices=spec.anchor_indices, n_classes=n_classes,
        )
    if spec.kind == "gaussian":
        return gaussian_init(X.shape[1], n_hidden, n_classes, spec.scale, seed=spec.seed)
    if spec.kind == "uniform":
        return uniform_init(X.shape[1], n_hidden, n_classes, spec.scale, seed=spec.seed)
    if spec.kind == "glorot":
        return glorot_uniform_init(n_classes, X.shape[1], seed=spec.seed)
    raise ValueError(f"unknown init kind {spec.kind!r}")
