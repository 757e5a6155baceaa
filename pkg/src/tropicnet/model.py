"""Tropical network architectures, forward evaluation and loss functions.

Two architectures are supported:

* a zero-hidden classifier: one (max,+) layer mapping features straight to
  class scores, then softmax;
* a three-layer network: a fixed-pattern signed feature expansion, a (min,+)
  hidden layer, and a (max,+) output layer, then softmax.

The signed expansion doubles each input feature into a (+, -) pair: expansion
row ``2j`` and ``2j+1`` both read input column ``j``, and the per-row
effective weights are stored as a single length-2P vector (the underlying
2P x P matrix has a frozen sparsity pattern, so only the diagonal-pair
entries are ever materialized).

``forward_trace`` builds per-sample tournament trees over every reduction so
that downstream code can read winners and apply leaf-level updates;
``batch_*`` helpers evaluate whole datasets with plain dense reductions and
serve as the from-scratch reference everywhere incremental state must be
audited.
"""

from dataclasses import dataclass

import numpy as np

from .sct import MaxTree, MinTree

__all__ = [
    "NumericalError",
    "ZeroHiddenModel",
    "MinMaxModel",
    "ForwardTrace",
    "morph_perceptron",
    "signed_features",
    "logsumexp",
    "forward_zero_hidden",
    "forward_trace",
    "sample_loss",
    "avg_loss",
    "max_loss",
    "batch_signed_features",
    "batch_hidden",
    "batch_scores",
    "batch_scores_zero_hidden",
    "losses_from_scores",
    "softmax_from_scores",
]


class NumericalError(RuntimeError):
    """A forward or training step produced a non-finite quantity."""


@dataclass
class ZeroHiddenModel:
    """Single (max,+) layer classifier: score_d(x) = max_p(x_p + weights[d,p])."""

    weights: np.ndarray  # (n_classes, n_features)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("weights must be a 2-D (classes x features) matrix")
        if self.n_classes < 2 or self.n_features < 1:
            raise ValueError("need at least 2 classes and 1 feature")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @property
    def n_classes(self):
        return self.weights.shape[0]

    @property
    def n_features(self):
        return self.weights.shape[1]


@dataclass
class MinMaxModel:
    """Signed expansion + (min,+) hidden layer + (max,+) class layer.

    w_pattern : (2P,) effective weights of the frozen expansion pattern
    w_min     : (2P, H) min-plus weights
    w_max     : (H, C) max-plus weights
    """

    w_pattern: np.ndarray
    w_min: np.ndarray
    w_max: np.ndarray

    def __post_init__(self):
        self.w_pattern = np.asarray(self.w_pattern, dtype=np.float64)
        self.w_min = np.asarray(self.w_min, dtype=np.float64)
        self.w_max = np.asarray(self.w_max, dtype=np.float64)
        if self.w_pattern.ndim != 1 or self.w_pattern.size % 2 != 0:
            raise ValueError("w_pattern must be a flat vector of even length 2P")
        if self.w_min.shape != (self.w_pattern.size, self.w_max.shape[0]):
            raise ValueError(
                f"w_min shape {self.w_min.shape} inconsistent with "
                f"2P={self.w_pattern.size}, H={self.w_max.shape[0]}"
            )
        for arr in (self.w_pattern, self.w_min, self.w_max):
            if not np.all(np.isfinite(arr)):
                raise ValueError("model weights must be finite")

    @property
    def n_features(self):
        return self.w_pattern.size // 2

    @property
    def n_hidden(self):
        return self.w_min.shape[1]

    @property
    def n_classes(self):
        return self.w_max.shape[1]

    @staticmethod
    def input_column(row):
        """Input column read by expansion row `row` (rows 2j, 2j+1 -> j)."""
        return row // 2


@dataclass
class ForwardTrace:
    """Per-sample cache of one forward pass, with live tournament trees.

    Invariants: hidden[h] == min_trees[h].root() value, scores[d] ==
    max_trees[d].root() value, and loss == lse - scores[label].
    """

    x: np.ndarray
    label: int
    signed: np.ndarray            # expansion output, length 2P
    min_trees: list               # H MinTrees over 2P leaves
    hidden: np.ndarray            # length H
    max_trees: list               # C MaxTrees over H leaves
    scores: np.ndarray            # length C
    lse: float
    loss: float

    @property
    def yhat(self):
        return np.exp(self.scores - self.lse)


def morph_perceptron(x, w, b):
    """Morphological perceptron activation: max(b, max_i(x_i + w_i))."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.shape != w.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {w.shape}")
    return float(max(b, np.max(x + w)))


def signed_features(model, x):
    """Signed expansion of one sample under the frozen pattern (length 2P)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise ValueError(f"expected {model.n_features} features, got {x.shape}")
    return model.w_pattern * np.repeat(x, 2)


def logsumexp(z):
    """Max-shifted log(sum(exp(z))), overflow-safe."""
    z = np.asarray(z, dtype=np.float64)
    m = np.max(z)
    return float(m + np.log(np.sum(np.exp(z - m))))


def forward_zero_hidden(model, x, label):
    """Scores, softmax probabilities and loss for one sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise ValueError(f"expected {model.n_features} features, got {x.shape}")
    scores = np.max(x[None, :] + model.weights, axis=1)
    lse = logsumexp(scores)
    yhat = np.exp(scores - lse)
    loss = lse - scores[label]
    return scores, yhat, float(loss)


def forward_trace(model, x, label):
    """Full forward pass of the three-layer network, returning a ForwardTrace.

    Builds one MinTree per hidden unit (leaves: signed[i] + w_min[i, h]) and
    one MaxTree per class (leaves: hidden[h] + w_max[h, d]).
    """
    signed = signed_features(model, x)
    min_trees = [MinTree(signed + model.w_min[:, h]) for h in range(model.n_hidden)]
    hidden = np.array([t.root()[0] for t in min_trees])
    max_trees = [MaxTree(hidden + model.w_max[:, d]) for d in range(model.n_classes)]
    scores = np.array([t.root()[0] for t in max_trees])
    lse = logsumexp(scores)
    loss = float(lse - scores[label])
    if not np.isfinite(loss):
        raise NumericalError(f"non-finite loss for sample (loss={loss})")
    return ForwardTrace(
        x=np.asarray(x, dtype=np.float64),
        label=int(label),
        signed=signed,
        min_trees=min_trees,
        hidden=hidden,
        max_trees=max_trees,
        scores=scores,
        lse=lse,
        loss=loss,
    )


def sample_loss(trace):
    return trace.loss


def avg_loss(traces):
    if len(traces) == 0:
        raise ValueError("no traces")
    return float(np.mean([t.loss for t in traces]))


def max_loss(traces):
    """Worst sample loss and its index (smallest index on ties)."""
    if len(traces) == 0:
        raise ValueError("no traces")
    losses = np.array([t.loss for t in traces])
    idx = int(np.argmax(losses))
    return float(losses[idx]), idx


# ---------------------------------------------------------------------------
# Dense batch evaluation (the from-scratch reference path)
# ---------------------------------------------------------------------------

def batch_signed_features(model, X):
    """Signed expansion for a whole sample matrix, shape (N, 2P)."""
    X = np.asarray(X, dtype=np.float64)
    return np.repeat(X, 2, axis=1) * model.w_pattern[None, :]


def batch_hidden(model, signed, sample_chunk=256):
    """Min-plus hidden layer over all samples: (N, H).

    Chunked over samples to keep the (chunk, 2P, H) broadcast temporary small.
    """
    n = signed.shape[0]
    out = np.empty((n, model.n_hidden))
    for lo in range(0, n, sample_chunk):
        hi = min(lo + sample_chunk, n)
        out[lo:hi] = np.min(
            signed[lo:hi, :, None] + model.w_min[None, :, :], axis=1
        )
    return out


def batch_scores(model, hidden, sample_chunk=4096):
    """Max-plus class scores over all samples: (N, C)."""
    n = hidden.shape[0]
    out = np.empty((n, model.n_classes))
    for lo in range(0, n, sample_chunk):
        hi = min(lo + sample_chunk, n)
        out[lo:hi] = np.max(
            hidden[lo:hi, :, None] + model.w_max[None, :, :], axis=1
        )
    return out


def batch_scores_zero_hidden(model, X, sample_chunk=1024):
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    out = np.empty((n, model.n_classes))
    for lo in range(0, n, sample_chunk):
        hi = min(lo + sample_chunk, n)
        out[lo:hi] = np.max(
            X[lo:hi, :, None] + model.weights.T[None, :, :], axis=1
        )
    return out


def losses_from_scores(scores, labels):
    """Row-wise max-shifted log-sum-exp and cross-entropy losses."""
    m = np.max(scores, axis=1)
    lse = m + np.log(np.sum(np.exp(scores - m[:, None]), axis=1))
    losses = lse - scores[np.arange(scores.shape[0]), labels]
    return lse, losses


def softmax_from_scores(scores):
    m = np.max(scores, axis=1, keepdims=True)
    e = np.exp(scores - m)
    return e / np.sum(e, axis=1, keepdims=True)
