"""Training loops: worst-sample subgradient descent and average-loss SGD.

The worst-sample path reads the current worst loss from the loss tree,
extracts the active winners, forms the (at most C entries per layer) sparse
subgradient, picks a step size, and repairs the live state along the touched
reduction paths. Step sizes follow a two-phase schedule: an adaptive ratio
(current loss minus target, over the squared subgradient norm) first, then a
small constant epsilon / (2 * sqrt(2C)).

Three interchangeable engines drive the same loop:

* TraceForest        - incremental tree repairs (the fast path);
* DenseEngine        - dense parameter updates plus full recomputation of
                       every forward pass each iteration (the benchmark
                       baseline; identical trajectories by construction);
* the skip variant   - TraceForest with expansion-layer updates applied only
                       every skip_ratio iterations.

The average-loss path draws one sample per iteration, runs a single forward
pass, applies the same per-sample sparse subgradient with a constant step,
and never stores the trace forest.
"""

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .forest import TraceForest, UpdateReport
from .model import (
    NumericalError,
    batch_hidden,
    batch_scores,
    batch_signed_features,
    losses_from_scores,
)
from .subgrad import ActiveSet, Layer, SparseGrad, min_max_entries

__all__ = [
    "TrainConfig",
    "TrainState",
    "LogRow",
    "TrainLog",
    "DenseEngine",
    "SgdEngine",
    "polyak_step",
    "constant_step",
    "init_state",
    "train_max",
    "train_avg_sgd",
    "train",
    "BenchRow",
    "benchmark",
    "write_bench_csv",
]

OBJECTIVES = ("max", "avg")
MODES = ("dense", "sparse", "sparse_skip_w0")


@dataclass
class TrainConfig:
    objective: str = "max"
    mode: str = "sparse"
    iterations: int = 1000
    phase_switch: int = None          # adaptive -> constant step; default half
    epsilon: float = 0.1
    target_loss: float = 0.0
    skip_ratio: int = 100
    log_every: int = 100
    audit_every: int = 0              # 0 disables the rebuild audit
    seed: int = 0

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.phase_switch is None:
            self.phase_switch = self.iterations // 2
        if self.phase_switch > self.iterations:
            raise ValueError("phase_switch must not exceed iterations")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.skip_ratio < 1:
            raise ValueError("skip_ratio must be >= 1")


@dataclass
class LogRow:
    iteration: int
    max_loss: float
    avg_loss: float
    step_size: float
    ms_per_iter: float


class TrainLog:
    """Training curve rows, CSV-serializable with a fixed header."""

    HEADER = "iter,max_loss,avg_loss,step_size,ms_per_iter"

    def __init__(self):
        self.rows = []

    def append(self, row):
        self.rows.append(row)

    def final_max_loss(self):
        return self.rows[-1].max_loss if self.rows else math.nan

    def write_csv(self, path):
        with open(path, "w") as f:
            f.write(self.HEADER + "\n")
            for r in self.rows:
                f.write(
                    f"{r.iteration},{r.max_loss!r},{r.avg_loss!r},"
                    f"{r.step_size!r},{r.ms_per_iter:.3f}\n"
                )


def polyak_step(loss_value, target_loss, squared_norm):
    """Adaptive step (loss - target) / ||grad||^2, guarded at zero gradient."""
    if squared_norm < 1e-18:
        return 0.0
    return max(0.0, loss_value - target_loss) / squared_norm


def constant_step(epsilon, n_classes):
    """Late-phase constant step epsilon / (2 * sqrt(2C))."""
    return epsilon / (2.0 * math.sqrt(2.0 * n_classes))


class DenseEngine:
    """Dense-update baseline: every step rewrites all parameters and redoes
    the full forward pass. Semantically identical to the sparse engines."""

    def __init__(self, model, X, y):
        self.model = model
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        self.n = self.X.shape[0]
        self._rebuild()

    def _rebuild(self):
        self.signed = batch_signed_features(self.model, self.X)
        self.hidden = batch_hidden(self.model, self.signed)
        self.scores = batch_scores(self.model, self.hidden)
        self.lse, self.loss = losses_from_scores(self.scores, self.y)

    def max_loss(self):
        n_star = int(np.argmax(self.loss))
        return float(self.loss[n_star]), n_star

    def yhat(self, row):
        return np.exp(self.scores[row] - self.lse[row])

    def active_set(self):
        _, n_star = self.max_loss()
        winner_hidden = np.argmax(
            self.hidden[n_star][:, None] + self.model.w_max, axis=0
        )
        winner_input = np.argmin(
            self.signed[n_star][:, None] + self.model.w_min[:, winner_hidden], axis=0
        )
        return ActiveSet(
            sample=n_star,
            label=int(self.y[n_star]),
            winner_hidden=winner_hidden.astype(np.int64),
            winner_input=winner_input.astype(np.int64),
        )

    def sparse_grad(self, active):
        return SparseGrad(
            min_max_entries(
                self.yhat(active.sample),
                active.label,
                self.X[active.sample],
                active.winner_hidden,
                active.winner_input,
            )
        )

    def apply_grad(self, grad, alpha, update_w0=True):
        report = UpdateReport(alpha=float(alpha))
        if alpha == 0.0 or not grad.entries:
            return report
        model = self.model
        dense_max = grad.densify(Layer.MAX, model.w_max.shape)
        dense_min = grad.densify(Layer.MIN, model.w_min.shape)
        dense_pattern = grad.densify(Layer.PATTERN, model.w_pattern.shape)
        model.w_max -= alpha * dense_max
        model.w_min -= alpha * dense_min
        model.w_pattern -= alpha * dense_pattern
        self._rebuild()
        report.w0_applied = True
        report.rows_refreshed = self.n
        return report

    def audit(self, tol=1e-6):
        return 0.0  # state is rebuilt from scratch every step

    def memory_bytes(self):
        return (
            self.signed.nbytes + self.hidden.nbytes + self.scores.nbytes
            + self.lse.nbytes + self.loss.nbytes
        )


class SgdEngine:
    """Single-sample engine for average-loss SGD; stores no per-sample state."""

    def __init__(self, model, X, y):
        self.model = model
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        self.n = self.X.shape[0]

    def sgd_step(self, row, alpha):
        """Forward one sample, apply its sparse subgradient; returns its loss."""
        model = self.model
        x = self.X[row]
        label = int(self.y[row])
        signed = model.w_pattern * np.repeat(x, 2)
        hidden = np.min(signed[:, None] + model.w_min, axis=0)
        scores = np.max(hidden[:, None] + model.w_max, axis=0)
        m = float(np.max(scores))
        lse = m + math.log(float(np.sum(np.exp(scores - m))))
        loss = lse - float(scores[label])
        if not math.isfinite(loss):
            raise NumericalError(f"non-finite loss {loss} at sample {row}")
        yhat = np.exp(scores - lse)
        winner_hidden = np.argmax(hidden[:, None] + model.w_max, axis=0)
        winner_input = np.argmin(
            signed[:, None] + model.w_min[:, winner_hidden], axis=0
        )
        if alpha != 0.0:
            for e in min_max_entries(yhat, label, x, winner_hidden, winner_input):
                if e.layer is Layer.MAX:
                    model.w_max[e.index] -= alpha * e.value
                elif e.layer is Layer.MIN:
                    model.w_min[e.index] -= alpha * e.value
                else:
                    model.w_pattern[e.index] -= alpha * e.value
        return loss

    def full_losses(self):
        signed = batch_signed_features(self.model, self.X)
        hidden = batch_hidden(self.model, signed)
        scores = batch_scores(self.model, hidden)
        _, losses = losses_from_scores(scores, self.y)
        return losses

    def memory_bytes(self):
        return 0


@dataclass
class TrainState:
    engine: object
    config: TrainConfig
    iteration: int = 0
    w0_applications: int = 0
    loss_history: deque = field(default_factory=lambda: deque(maxlen=4096))

    @property
    def model(self):
        return self.engine.model


def init_state(model, X, y, config):
    """Build the engine that matches the configured objective and mode."""
    if config.objective == "avg":
        engine = SgdEngine(model, X, y)
    elif config.mode == "dense":
        engine = DenseEngine(model, X, y)
    else:
        engine = TraceForest(model, X, y)
    return TrainState(engine=engine, config=config)


def train_max(state):
    """Worst-sample subgradient descent with the two-phase step schedule."""
    cfg = state.config
    engine = state.engine
    n_classes = engine.model.n_classes
    log = TrainLog()
    const_alpha = constant_step(cfg.epsilon, n_classes)
    t_mark = time.perf_counter()
    iters_since_mark = 0
    alpha = 0.0
    for it in range(state.iteration, cfg.iterations):
        loss_value, _ = engine.max_loss()
        if not math.isfinite(loss_value):
            raise NumericalError(
                f"non-finite max loss {loss_value} at iteration {it}"
            )
        state.loss_history.append(loss_value)
        if it % cfg.log_every == 0:
            now = time.perf_counter()
            ms = 1000.0 * (now - t_mark) / max(1, iters_since_mark)
            log.append(LogRow(it, loss_value, float(np.mean(engine.loss)), alpha, ms))
            t_mark, iters_since_mark = now, 0
        active = engine.active_set()
        grad = engine.sparse_grad(active)
        if it < cfg.phase_switch:
            alpha = polyak_step(loss_value, cfg.target_loss, grad.squared_norm)
        else:
            alpha = const_alpha
        update_w0 = cfg.mode != "sparse_skip_w0" or it % cfg.skip_ratio == 0
        report = engine.apply_grad(grad, alpha, update_w0=update_w0)
        if report.w0_applied:
            state.w0_applications += 1
        if cfg.audit_every and (it + 1) % cfg.audit_every == 0:
            engine.audit(tol=1e-6)
        state.iteration = it + 1
        iters_since_mark += 1
    final_loss, _ = engine.max_loss()
    state.loss_history.append(final_loss)
    now = time.perf_counter()
    ms = 1000.0 * (now - t_mark) / max(1, iters_since_mark)
    log.append(
        LogRow(state.iteration, final_loss, float(np.mean(engine.loss)), alpha, ms)
    )
    return log


def train_avg_sgd(state):
    """Uniform-sample SGD on the average loss with a constant step."""
    cfg = state.config
    engine = state.engine
    if not isinstance(engine, SgdEngine):
        raise ValueError("average-loss training expects an SgdEngine state")
    rng = np.random.default_rng(cfg.seed)
    alpha = constant_step(cfg.epsilon, engine.model.n_classes)
    log = TrainLog()
    t_mark = time.perf_counter()
    iters_since_mark = 0
    for it in range(state.iteration, cfg.iterations):
        if it % cfg.log_every == 0:
            losses = engine.full_losses()
            now = time.perf_counter()
            ms = 1000.0 * (now - t_mark) / max(1, iters_since_mark)
            log.append(
                LogRow(it, float(np.max(losses)), float(np.mean(losses)), alpha, ms)
            )
            t_mark, iters_since_mark = now, 0
        row = int(rng.integers(engine.n))
        engine.sgd_step(row, alpha)
        state.iteration = it + 1
        iters_since_mark += 1
    losses = engine.full_losses()
    now = time.perf_counter()
    ms = 1000.0 * (now - t_mark) / max(1, iters_since_mark)
    log.append(
        LogRow(state.iteration, float(np.max(losses)), float(np.mean(losses)), alpha, ms)
    )
    return log


def train(state):
    if state.config.objective == "avg":
        return train_avg_sgd(state)
    return train_max(state)


@dataclass
class BenchRow:
    mode: str
    total_s: float
    s_per_iter: float
    peak_forest_bytes: int


def benchmark(make_model, X, y, iterations=300, modes=MODES, config_kwargs=None):
    """Time the three update modes for a fixed iteration budget.

    `make_model` must return a freshly initialized model on every call so the
    arms start from identical weights. Returns one BenchRow per mode.
    """
    rows = []
    for mode in modes:
        model = make_model()
        cfg = TrainConfig(
            objective="max",
            mode=mode,
            iterations=iterations,
            log_every=max(1, iterations),
            **(config_kwargs or {}),
        )
        state = init_state(model, X, y, cfg)
        peak = state.engine.memory_bytes()
        start = time.perf_counter()
        train_max(state)
        elapsed = time.perf_counter() - start
        rows.append(
            BenchRow(
                mode=mode,
                total_s=elapsed,
                s_per_iter=elapsed / max(1, iterations),
                peak_forest_bytes=int(peak),
            )
        )
    return rows


def write_bench_csv(rows, path):
    with open(path, "w") as f:
        f.write("mode,total_s,s_per_iter,peak_forest_bytes\n")
        for r in rows:
            f.write(f"{r.mode},{r.total_s:.6f},{r.s_per_iter:.6f},{r.peak_forest_bytes}\n")
