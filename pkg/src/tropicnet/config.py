"""Flat key=value run configuration.

A config file holds one `key = value` pair per line (# comments allowed);
CLI --set overrides are applied on top, then every value is type-checked
against the schema below. Unknown keys are rejected. Every command writes the
fully resolved mapping next to its outputs so a run can be reproduced from
the snapshot alone.
"""

import os
from dataclasses import dataclass, fields

__all__ = ["ConfigError", "RunSpec", "parse_file", "apply_overrides", "resolve", "snapshot"]


class ConfigError(ValueError):
    pass


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {s!r}")


@dataclass
class RunSpec:
    # training objective and engine
    objective: str = "max"                # max | avg
    mode: str = "sparse"                  # dense | sparse | sparse_skip_w0
    iterations: int = 50000
    phase_switch: int = -1                # -1: switch at iterations // 2
    epsilon: float = 0.1
    target_loss: float = 0.0
    skip_ratio: int = 100
    k: float = 4.0                        # init scale
    H: int = 20                           # hidden units
    seed: int = 0
    log_every: int = 100
    audit_every: int = 0
    init: str = "structured"              # structured | gaussian | uniform
    # data
    dataset: str = "iris"                 # iris | mnist | synthetic
    iris_path: str = ""                   # empty: bundled file
    mnist_images: str = ""
    mnist_labels: str = ""
    mnist_test_images: str = ""
    mnist_test_labels: str = ""
    synthetic_train: int = 2000
    synthetic_test: int = 1000
    train_fraction: float = 0.7
    normalize: str = "auto"               # auto | none | unit_byte
    # infrastructure
    workers: int = 0                      # 0: all cores; TROPICNET_WORKERS overrides
    plots: bool = True
    # benchmark command
    bench_iterations: int = 300
    bench_samples: int = 10000
    bench_hidden: int = 100
    # approximation demo command
    approx_grid: str = ""
    approx_samples: str = ""
    approx_lipschitz: float = 1.0

    def resolved_phase_switch(self):
        return self.iterations // 2 if self.phase_switch < 0 else self.phase_switch

    def resolved_workers(self):
        env = os.environ.get("TROPICNET_WORKERS")
        if env is not None:
            return int(env)
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


_FIELDS = {f.name: f.type for f in fields(RunSpec)}
_PARSERS = {"int": int, "float": float, "str": str, "bool": _bool}


def parse_file(path):
    """Read `key = value` lines into a dict of raw strings."""
    pairs = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            pairs[key.strip()] = value.strip()
    return pairs


def apply_overrides(pairs, overrides):
    """Apply repeatable --set key=value arguments on top of file pairs."""
    merged = dict(pairs)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        merged[key.strip()] = value.strip()
    return merged


def resolve(pairs):
    """Type-check raw pairs against the schema and build a RunSpec."""
    spec = RunSpec()
    for key, raw in pairs.items():
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        parser = _PARSERS[_FIELDS[key] if isinstance(_FIELDS[key], str) else _FIELDS[key].__name__]
        try:
            setattr(spec, key, parser(raw))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})")
    _validate(spec)
    return spec


def _validate(spec):
    if spec.objective not in ("max", "avg"):
        raise ConfigError(f"objective must be max or avg, got {spec.objective!r}")
    if spec.mode not in ("dense", "sparse", "sparse_skip_w0"):
        raise ConfigError(f"unknown mode {spec.mode!r}")
    if spec.init not in ("structured", "gaussian", "uniform"):
        raise ConfigError(f"unknown init {spec.init!r}")
    if spec.dataset not in ("iris", "mnist", "synthetic"):
        raise ConfigError(f"unknown dataset {spec.dataset!r}")
    if spec.normalize not in ("auto", "none", "unit_byte"):
        raise ConfigError(f"unknown normalize scheme {spec.normalize!r}")
    if spec.epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    if spec.k <= 0:
        raise ConfigError("k must be positive")
    if not 0.0 < spec.train_fraction < 1.0:
        raise ConfigError("train_fraction must be in (0, 1)")
    if spec.skip_ratio < 1:
        raise ConfigError("skip_ratio must be >= 1")


def snapshot(spec, path):
    """Write the fully resolved configuration, one key=value per line."""
    with open(path, "w") as f:
        for fld in fields(RunSpec):
            value = getattr(spec, fld.name)
            f.write(f"{fld.name} = {value}\n")
        f.write(f"# resolved phase_switch = {spec.resolved_phase_switch()}\n")
        f.write(f"# resolved workers = {spec.resolved_workers()}\n")
