"""Sparse subgradients of the worst-sample cross-entropy objective.

The objective max_n(-log yhat_{y_n}(x_n)) depends on the weights only through
the worst sample and, inside it, through the winning index of every max/min
reduction. Selecting one winner per reduction (smallest index on ties) yields
a subgradient with at most one entry per class and per layer:

* max layer: entry at (winner_hidden[d], d) with value yhat_d - 1{d == label};
* min layer: the same value routed to (winner_input[d], winner_hidden[d]),
  with colliding positions summed;
* expansion pattern: the min-layer value scaled by the input feature read by
  that row, again summed over collisions (off-pattern positions stay frozen).

The zero-hidden variant routes yhat_d - 1{d == label} to (d, winner_feature[d]).
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import forward_zero_hidden

__all__ = [
    "InternalError",
    "Layer",
    "GradEntry",
    "SparseGrad",
    "ActiveSet",
    "active_set",
    "active_set_zero_hidden",
    "subgrad_min_max",
    "subgrad_zero_hidden",
    "squared_norm",
]


class InternalError(RuntimeError):
    """Cached reduction state disagrees with itself."""


class Layer(Enum):
    PATTERN = "pattern"        # effective weights of the signed expansion
    MIN = "min_plus"           # (min,+) hidden layer
    MAX = "max_plus"           # (max,+) class layer
    DENSE = "zero_hidden"      # the single matrix of the zero-hidden model


@dataclass(frozen=True)
class GradEntry:
    layer: Layer
    index: tuple
    value: float


@dataclass
class SparseGrad:
    entries: list

    @property
    def squared_norm(self):
        return float(sum(e.value * e.value for e in self.entries))

    def by_layer(self, layer):
        return [e for e in self.entries if e.layer is layer]

    def densify(self, layer, shape):
        """Materialize one layer's entries into a dense array."""
        out = np.zeros(shape)
        for e in self.by_layer(layer):
            out[e.index] += e.value
        return out


@dataclass
class ActiveSet:
    """Winning indices through which the worst-sample loss is differentiated.

    For the three-layer network, winner_hidden[d] / winner_input[d] identify
    the active (max,+) and (min,+) leaves of class d at the worst sample; for
    the zero-hidden model winner_feature[d] is the active feature instead.
    """

    sample: int
    label: int
    winner_hidden: np.ndarray = None
    winner_input: np.ndarray = None
    winner_feature: np.ndarray = None


def active_set(traces, loss_tree):
    """Read the worst sample and its per-class winners from live trees.

    `traces` is a sequence of ForwardTrace, `loss_tree` a MaxTree over the
    per-sample losses. Raises InternalError if the tree is stale.
    """
    loss, n_star = loss_tree.root()
    trace = traces[n_star]
    if abs(loss_tree.leaf_value(n_star) - trace.loss) > 1e-9:
        raise InternalError(
            f"loss tree leaf {n_star} ({loss_tree.leaf_value(n_star)}) "
            f"disagrees with trace loss ({trace.loss})"
        )
    n_classes = len(trace.max_trees)
    winner_hidden = np.empty(n_classes, dtype=np.int64)
    winner_input = np.empty(n_classes, dtype=np.int64)
    for d in range(n_classes):
        winner_hidden[d] = trace.max_trees[d].root()[1]
        winner_input[d] = trace.min_trees[winner_hidden[d]].root()[1]
    return ActiveSet(
        sample=n_star,
        label=trace.label,
        winner_hidden=winner_hidden,
        winner_input=winner_input,
    )


def active_set_zero_hidden(model, X, y, sample=None):
    """Active set for the zero-hidden model.

    When `sample` is None the worst-loss sample is located by a scan
    (smallest index on ties); callers doing per-sample work pass it directly.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if sample is None:
        losses = np.array(
            [forward_zero_hidden(model, X[n], y[n])[2] for n in range(X.shape[0])]
        )
        sample = int(np.argmax(losses))
    x = X[sample]
    winner_feature = np.argmax(x[None, :] + model.weights, axis=1)
    return ActiveSet(
        sample=int(sample),
        label=int(y[sample]),
        winner_feature=winner_feature,
    )


def min_max_entries(yhat, label, x, winner_hidden, winner_input):
    """Shared entry construction for the three-layer subgradient."""
    n_classes = yhat.shape[0]
    entries = []
    min_acc = {}
    pattern_acc = {}
    for d in range(n_classes):
        v = float(yhat[d]) - (1.0 if d == label else 0.0)
        h = int(winner_hidden[d])
        i = int(winner_input[d])
        entries.append(GradEntry(Layer.MAX, (h, d), v))
        min_acc[(i, h)] = min_acc.get((i, h), 0.0) + v
        pattern_acc[i] = pattern_acc.get(i, 0.0) + float(x[i // 2]) * v
    for (i, h) in sorted(min_acc):
        entries.append(GradEntry(Layer.MIN, (i, h), min_acc[(i, h)]))
    for i in sorted(pattern_acc):
        entries.append(GradEntry(Layer.PATTERN, (i,), pattern_acc[i]))
    return entries


def subgrad_min_max(model, trace, active):
    """Sparse subgradient of the worst-sample loss at the current weights."""
    return SparseGrad(
        min_max_entries(
            trace.yhat, active.label, trace.x, active.winner_hidden, active.winner_input
        )
    )


def subgrad_zero_hidden(model, X, y, active):
    """Sparse subgradient for the zero-hidden model at the active sample."""
    X = np.asarray(X, dtype=np.float64)
    _, yhat, _ = forward_zero_hidden(model, X[active.sample], active.label)
    entries = []
    for d in range(model.n_classes):
        v = float(yhat[d]) - (1.0 if d == active.label else 0.0)
        entries.append(GradEntry(Layer.DENSE, (d, int(active.winner_feature[d])), v))
    return SparseGrad(entries)


def squared_norm(grad):
    return grad.squared_norm
