"""Evaluation metrics and the subgradient sparsity study.

gamma(x) is the fraction of exactly-nonzero coordinates; the subgradients
produced here are structurally zero off their support, so no epsilon is
applied (an epsilon would mask sparsity bugs).

The sparsity study contrasts two quantities on a Glorot-initialized
zero-hidden model: the gamma of the average of all per-sample loss
subgradients (whose supports union up and densify) versus the average of the
per-sample gammas (each of which has at most one entry per class).
"""

from dataclasses import dataclass

import numpy as np

from .initializers import glorot_uniform_init
from .model import (
    MinMaxModel,
    ZeroHiddenModel,
    batch_hidden,
    batch_scores,
    batch_scores_zero_hidden,
    batch_signed_features,
    losses_from_scores,
    softmax_from_scores,
)

__all__ = [
    "EvalReport",
    "gamma",
    "sparsity_study",
    "model_scores",
    "evaluate",
    "macro_f1_from_confusion",
    "write_eval_csv",
]

CONFIDENCE_BINS = 20


@dataclass
class EvalReport:
    max_loss: float
    avg_loss: float
    accuracy: float
    confusion: np.ndarray          # (C, C) counts, rows = true class
    macro_f1: float
    confidence_bins: np.ndarray    # CONFIDENCE_BINS counts of yhat_true
    excluded_classes: list         # zero-support classes left out of macro F1


def gamma(x):
    """Fraction of exactly-nonzero coordinates of a vector or array."""
    x = np.asarray(x)
    if x.size == 0:
        raise ValueError("gamma of an empty vector is undefined")
    return float(np.count_nonzero(x)) / x.size


def model_scores(model, X):
    """Class scores for either architecture, shape (N, C)."""
    if isinstance(model, ZeroHiddenModel):
        return batch_scores_zero_hidden(model, X)
    if isinstance(model, MinMaxModel):
        signed = batch_signed_features(model, X)
        return batch_scores(model, batch_hidden(model, signed))
    raise TypeError(f"unsupported model type {type(model).__name__}")


def evaluate(model, dataset):
    """Full-dataset evaluation report (losses, accuracy, confusion, F1)."""
    scores = model_scores(model, dataset.X)
    _, losses = losses_from_scores(scores, dataset.y)
    yhat = softmax_from_scores(scores)
    predictions = np.argmax(scores, axis=1)
    n_classes = dataset.n_classes
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (dataset.y, predictions), 1)
    macro_f1, excluded = macro_f1_from_confusion(confusion)
    confidence = yhat[np.arange(dataset.n_samples), dataset.y]
    bins, _ = np.histogram(confidence, bins=CONFIDENCE_BINS, range=(0.0, 1.0))
    return EvalReport(
        max_loss=float(np.max(losses)),
        avg_loss=float(np.mean(losses)),
        accuracy=float(np.mean(predictions == dataset.y)),
        confusion=confusion,
        macro_f1=macro_f1,
        confidence_bins=bins,
        excluded_classes=excluded,
    )


def macro_f1_from_confusion(confusion):
    """Mean per-class F1; classes with zero support are excluded and reported."""
    confusion = np.asarray(confusion, dtype=np.float64)
    tp = np.diag(confusion)
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    f1s, excluded = [], []
    for c in range(confusion.shape[0]):
        if support[c] == 0:
            excluded.append(c)
            continue
        precision = tp[c] / predicted[c] if predicted[c] > 0 else 0.0
        recall = tp[c] / support[c]
        f1s.append(
            0.0 if precision + recall == 0
            else 2 * precision * recall / (precision + recall)
        )
    return float(np.mean(f1s)) if f1s else 0.0, excluded


def per_sample_subgrad_stats(model, X, y, chunk=256):
    """Support-union and per-sample gammas of the zero-hidden subgradients.

    For sample n the loss subgradient has one candidate entry per class d, at
    (d, argmax_p(x_p + w[d, p])), with value yhat_d - 1{d == y_n}. Returns
    (dense average gradient, per-sample gamma vector).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, p = X.shape
    c = model.n_classes
    avg = np.zeros((c, p))
    gammas = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        block = X[lo:hi]                       # (b, p)
        act = block[:, None, :] + model.weights[None, :, :]   # (b, c, p)
        winners = np.argmax(act, axis=2)       # (b, c)
        scores = np.take_along_axis(act, winners[:, :, None], axis=2)[:, :, 0]
        yhat = softmax_from_scores(scores)
        values = yhat.copy()
        values[np.arange(hi - lo), y[lo:hi]] -= 1.0
        rows = np.repeat(np.arange(c)[None, :], hi - lo, axis=0)
        np.add.at(avg, (rows.ravel(), winners.ravel()), values.ravel() / n)
        gammas[lo:hi] = np.count_nonzero(values, axis=1) / (c * p)
    return avg, gammas


def sparsity_study(dataset, seed=0):
    """(gamma of the averaged subgradient, average of per-sample gammas)."""
    model = glorot_uniform_init(dataset.n_classes, dataset.n_features, seed=seed)
    avg, gammas = per_sample_subgrad_stats(model, dataset.X, dataset.y)
    return gamma(avg), float(np.mean(gammas))


def write_eval_csv(report, path):
    """Serialize an EvalReport as CSV blocks: metrics, confusion, histogram."""
    c = report.confusion.shape[0]
    with open(path, "w") as f:
        f.write("metric,value\n")
        f.write(f"max_loss,{report.max_loss!r}\n")
        f.write(f"avg_loss,{report.avg_loss!r}\n")
        f.write(f"accuracy,{report.accuracy!r}\n")
        f.write(f"macro_f1,{report.macro_f1!r}\n")
        f.write(f"excluded_classes,{' '.join(map(str, report.excluded_classes))}\n")
        f.write("\n")
        f.write("confusion," + ",".join(f"pred_{d}" for d in range(c)) + "\n")
        for t in range(c):
            f.write(f"true_{t}," + ",".join(map(str, report.confusion[t])) + "\n")
        f.write("\n")
        f.write("bin_low,bin_high,count\n")
        edges = np.linspace(0.0, 1.0, CONFIDENCE_BINS + 1)
        for b in range(CONFIDENCE_BINS):
            f.write(f"{edges[b]:.2f},{edges[b + 1]:.2f},{report.confidence_bins[b]}\n")
