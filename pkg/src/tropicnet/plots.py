"""Report figures rendered next to the delimited outputs.

Every CLI command that writes a CSV also drops a small matplotlib PNG beside
it (disable with plots=false). Figures are plain result displays: training
curve, confusion heatmap, confidence histogram, benchmark bars, envelope
overlay.
"""

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "save_loss_curve",
    "save_confusion",
    "save_confidence_hist",
    "save_bench",
    "save_approx",
    "save_sparsity",
]


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def save_loss_curve(rows, path, baseline=None):
    """Max/avg loss against iteration; optional dashed reference level."""
    its = [r.iteration for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.plot(its, [r.max_loss for r in rows], label="max loss", color="tab:blue")
    ax.plot(its, [r.avg_loss for r in rows], label="avg loss", color="tab:orange", alpha=0.8)
    if baseline is not None:
        ax.axhline(baseline, color="red", linestyle="--", linewidth=1,
                   label=f"uniform-prediction level {baseline:.3f}")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _finish(fig, path)


def save_confusion(confusion, path, class_names=None):
    confusion = np.asarray(confusion)
    c = confusion.shape[0]
    fig, ax = plt.subplots(figsize=(4.8, 4.2))
    im = ax.imshow(confusion, cmap="Blues")
    fig.colorbar(im, ax=ax, fraction=0.046)
    ticks = class_names if class_names else [str(i) for i in range(c)]
    ax.set_xticks(range(c), ticks, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(c), ticks, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    if c <= 12:
        peak = confusion.max() or 1
        for i in range(c):
            for j in range(c):
                ax.text(j, i, str(confusion[i, j]), ha="center", va="center",
                        fontsize=6, color="white" if confusion[i, j] > peak / 2 else "black")
    _finish(fig, path)


def save_confidence_hist(bins, path):
    bins = np.asarray(bins)
    edges = np.linspace(0.0, 1.0, bins.size + 1)
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.bar(edges[:-1], bins, width=np.diff(edges), align="edge",
           color="tab:blue", edgecolor="white")
    ax.set_xlabel("predicted probability of the true class")
    ax.set_ylabel("count")
    ax.grid(alpha=0.3, axis="y")
    _finish(fig, path)


def save_bench(rows, path):
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    modes = [r.mode for r in rows]
    times = [r.s_per_iter for r in rows]
    ax.bar(modes, times, color=["tab:green", "tab:blue", "tab:red"][: len(rows)])
    ax.set_ylabel("seconds / iteration")
    ax.set_yscale("log")
    for i, t in enumerate(times):
        ax.text(i, t, f"{t:.4f}", ha="center", va="bottom", fontsize=8)
    ax.grid(alpha=0.3, axis="y")
    _finish(fig, path)


def save_approx(x, f_values, h_values, path):
    """1-D envelope overlay; for higher dimensions plots error by sample rank."""
    x = np.asarray(x)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    if x.ndim == 1 or x.shape[1] == 1:
        xs = x.ravel()
        order = np.argsort(xs)
        ax.plot(xs[order], np.asarray(f_values)[order], label="target f", color="black")
        ax.plot(xs[order], np.asarray(h_values)[order], label="envelope h",
                color="tab:blue", alpha=0.85)
        ax.set_xlabel("x")
    else:
        err = np.abs(np.asarray(f_values) - np.asarray(h_values))
        ax.plot(np.sort(err)[::-1], color="tab:blue", label="|h - f| (sorted)")
        ax.set_xlabel("sample rank")
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    _finish(fig, path)


def save_sparsity(gamma_of_avg, avg_of_gamma, path):
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.bar(["gamma(avg grad)", "avg(gamma per sample)"], [gamma_of_avg, avg_of_gamma],
           color=["tab:red", "tab:green"])
    ax.set_ylabel("fraction of nonzero entries")
    for i, v in enumerate([gamma_of_avg, avg_of_gamma]):
        ax.text(i, v, f"{v:.3f}", ha="center", va="bottom", fontsize=9)
    ax.set_ylim(0, max(gamma_of_avg, avg_of_gamma) * 1.25 + 1e-3)
    ax.grid(alpha=0.3, axis="y")
    _finish(fig, path)
