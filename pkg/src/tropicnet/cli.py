"""Command-line entry points.

Subcommands: train, eval, bench, sparsity-report, approx-demo. Every command
reads an optional key=value config file plus repeatable --set overrides,
writes its CSV artifacts (and PNG figures unless plots=false) into --out, and
drops a resolved-config snapshot beside them.
"""

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from . import approx as approx_mod
from . import checkpoint, config, data, initializers, metrics, trainer
from .model import NumericalError

__all__ = ["main"]


def _load_spec(args):
    pairs = config.parse_file(args.config) if args.config else {}
    pairs = config.apply_overrides(pairs, args.set)
    return config.resolve(pairs)


def _out_dir(args, verb):
    out = Path(args.out if args.out else f"runs/{verb}")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _normalize(dataset, spec, default):
    scheme = spec.normalize if spec.normalize != "auto" else default
    return data.normalize(dataset, scheme)


def load_dataset(spec):
    """(train, test) split according to the data keys of the run spec."""
    if spec.dataset == "iris":
        path = spec.iris_path or data.builtin_iris_path()
        ds = _normalize(data.load_iris_csv(path), spec, "none")
        return data.split(ds, spec.train_fraction, spec.seed)
    if spec.dataset == "mnist":
        if not spec.mnist_images or not spec.mnist_labels:
            raise config.ConfigError(
                "dataset=mnist requires mnist_images and mnist_labels paths"
            )
        train = _normalize(
            data.load_idx(spec.mnist_images, spec.mnist_labels), spec, "unit_byte"
        )
        if spec.mnist_test_images and spec.mnist_test_labels:
            test = _normalize(
                data.load_idx(spec.mnist_test_images, spec.mnist_test_labels),
                spec, "unit_byte",
            )
            return train, test
        return data.split(train, spec.train_fraction, spec.seed)
    if spec.dataset == "synthetic":
        train = data.synthetic_digits(spec.synthetic_train, seed=spec.seed)
        test = data.synthetic_digits(spec.synthetic_test, seed=spec.seed + 1)
        return _normalize(train, spec, "none"), _normalize(test, spec, "none")
    raise config.ConfigError(f"unknown dataset {spec.dataset!r}")


def build_model(spec, train):
    init_spec = initializers.InitSpec(kind=spec.init, scale=spec.k, seed=spec.seed)
    return initializers.create(
        init_spec, train.X, train.y, n_hidden=spec.H, n_classes=train.n_classes
    )


def _train_config(spec):
    return trainer.TrainConfig(
        objective=spec.objective,
        mode=spec.mode,
        iterations=spec.iterations,
        phase_switch=spec.resolved_phase_switch(),
        epsilon=spec.epsilon,
        target_loss=spec.target_loss,
        skip_ratio=spec.skip_ratio,
        log_every=spec.log_every,
        audit_every=spec.audit_every,
        seed=spec.seed,
    )


def cmd_train(args):
    spec = _load_spec(args)
    out = _out_dir(args, "train")
    train_set, test_set = load_dataset(spec)
    model = build_model(spec, train_set)
    state = trainer.init_state(model, train_set.X, train_set.y, _train_config(spec))
    log = trainer.train(state)
    log.write_csv(out / "trainlog.csv")
    checkpoint.save_model(state.model, out / "model.tnet")
    report = metrics.evaluate(state.model, test_set)
    metrics.write_eval_csv(report, out / "eval.csv")
    config.snapshot(spec, out / "config.resolved")
    if spec.plots:
        from . import plots

        plots.save_loss_curve(
            log.rows, out / "loss_curve.png", baseline=math.log(train_set.n_classes)
        )
        plots.save_confusion(report.confusion, out / "confusion.png", test_set.names)
        plots.save_confidence_hist(report.confidence_bins, out / "confidence_hist.png")
    print(
        f"train: final max loss {log.final_max_loss():.4f}, "
        f"test accuracy {report.accuracy:.4f} -> {out}"
    )
    return 0


def cmd_eval(args):
    spec = _load_spec(args)
    out = _out_dir(args, "eval")
    model = checkpoint.load_model(args.checkpoint)
    train_set, test_set = load_dataset(spec)
    target = test_set if args.split == "test" else train_set
    report = metrics.evaluate(model, target)
    metrics.write_eval_csv(report, out / "eval.csv")
    config.snapshot(spec, out / "config.resolved")
    if spec.plots:
        from . import plots

        plots.save_confusion(report.confusion, out / "confusion.png", target.names)
        plots.save_confidence_hist(report.confidence_bins, out / "confidence_hist.png")
    print(
        f"eval[{args.split}]: accuracy {report.accuracy:.4f}, "
        f"max loss {report.max_loss:.4f}, macro-F1 {report.macro_f1:.4f} -> {out}"
    )
    return 0


def cmd_bench(args):
    spec = _load_spec(args)
    out = _out_dir(args, "bench")
    if spec.dataset == "synthetic":
        train = data.synthetic_digits(spec.bench_samples, seed=spec.seed)
        train = _normalize(train, spec, "none")
    else:
        train, _ = load_dataset(spec)
    make_model = lambda: initializers.structured_init(
        train.X, train.y, n_hidden=spec.bench_hidden, scale=spec.k,
        seed=spec.seed, n_classes=train.n_classes,
    )
    rows = trainer.benchmark(
        make_model, train.X, train.y,
        iterations=spec.bench_iterations,
        config_kwargs={"skip_ratio": spec.skip_ratio, "epsilon": spec.epsilon,
                       "phase_switch": spec.bench_iterations // 2},
    )
    trainer.write_bench_csv(rows, out / "bench.csv")
    config.snapshot(spec, out / "config.resolved")
    if spec.plots:
        from . import plots

        plots.save_bench(rows, out / "bench.png")
    for r in rows:
        print(f"bench: {r.mode:>15s}  {r.total_s:9.2f} s total  "
              f"{r.s_per_iter:9.5f} s/iter  forest {r.peak_forest_bytes / 1e6:8.1f} MB")
    print(f"-> {out}")
    return 0


def cmd_sparsity_report(args):
    spec = _load_spec(args)
    out = _out_dir(args, "sparsity")
    if spec.dataset == "synthetic":
        ds = _normalize(
            data.synthetic_digits(spec.synthetic_train, seed=spec.seed), spec, "none"
        )
    else:
        train_set, _ = load_dataset(spec)
        ds = train_set
    gamma_of_avg, avg_of_gamma = metrics.sparsity_study(ds, seed=spec.seed)
    with open(out / "sparsity.csv", "w") as f:
        f.write("metric,value\n")
        f.write(f"gamma_of_avg_grad,{gamma_of_avg!r}\n")
        f.write(f"avg_of_gamma_per_sample,{avg_of_gamma!r}\n")
        f.write(f"n_samples,{ds.n_samples}\n")
        f.write(f"n_features,{ds.n_features}\n")
        f.write(f"n_classes,{ds.n_classes}\n")
    config.snapshot(spec, out / "config.resolved")
    if spec.plots:
        from . import plots

        plots.save_sparsity(gamma_of_avg, avg_of_gamma, out / "sparsity.png")
    print(
        f"sparsity: gamma(avg grad) = {gamma_of_avg:.4f}, "
        f"avg gamma = {avg_of_gamma:.4f} -> {out}"
    )
    return 0


def _read_points_csv(path):
    """CSV with feature columns and a final f column; header optional."""
    xs, fs = [], []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                values = [float(v) for v in row]
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise data.ParseError(f"{path}:{lineno}: non-numeric row")
            if len(values) < 2:
                raise data.ParseError(f"{path}:{lineno}: need x columns plus f")
            xs.append(values[:-1])
            fs.append(values[-1])
    if not xs:
        raise data.ParseError(f"{path}: no data rows")
    return np.array(xs), np.array(fs)


def cmd_approx_demo(args):
    spec = _load_spec(args)
    out = _out_dir(args, "approx")
    grid_path = args.grid or spec.approx_grid
    samples_path = args.samples or spec.approx_samples
    if not grid_path or not samples_path:
        raise config.ConfigError(
            "approx-demo requires grid and samples CSVs "
            "(--grid/--samples or approx_grid/approx_samples keys)"
        )
    grid, f_grid = _read_points_csv(grid_path)
    samples, f_samples = _read_points_csv(samples_path)
    bank = approx_mod.build_bank(grid, f_grid, spec.approx_lipschitz)
    h_values = approx_mod.eval_h_batch(bank, samples)
    errors = np.abs(h_values - f_samples)
    delta = approx_mod.covering_radius(grid, samples)
    with open(out / "approx.csv", "w") as fh:
        cols = [f"x{i}" for i in range(samples.shape[1])]
        fh.write(",".join(cols + ["f", "h", "error"]) + "\n")
        for x, fv, hv, ev in zip(samples, f_samples, h_values, errors):
            fh.write(",".join(repr(v) for v in x) + f",{fv!r},{hv!r},{ev!r}\n")
    with open(out / "approx_summary.csv", "w") as fh:
        fh.write("metric,value\n")
        fh.write(f"lipschitz,{spec.approx_lipschitz!r}\n")
        fh.write(f"covering_radius,{delta!r}\n")
        fh.write(f"error_bound,{2 * spec.approx_lipschitz * delta!r}\n")
        fh.write(f"sup_error,{float(np.max(errors))!r}\n")
    config.snapshot(spec, out / "config.resolved")
    if spec.plots:
        from . import plots

        plots.save_approx(samples, f_samples, h_values, out / "approx.png")
    print(
        f"approx: sup error {float(np.max(errors)):.5f} vs bound "
        f"{2 * spec.approx_lipschitz * delta:.5f} -> {out}"
    )
    return 0


def _add_common(p):
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.add_argument("--out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tropicnet",
        description="Train and inspect max-plus/min-plus networks.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train", help="train a model and write log/checkpoint/report")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time dense vs sparse vs skip update modes")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sparsity-report", help="subgradient sparsity statistics")
    _add_common(p)
    p.set_defaults(func=cmd_sparsity_report)

    p = sub.add_parser("approx-demo", help="pyramid-envelope approximation demo")
    _add_common(p)
    p.add_argument("--grid", help="CSV of grid points (x columns + f)")
    p.add_argument("--samples", help="CSV of evaluation points (x columns + f)")
    p.set_defaults(func=cmd_approx_demo)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (config.ConfigError, data.ParseError, checkpoint.CheckpointError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
