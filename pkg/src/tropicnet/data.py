"""Dataset loading, splitting, normalization and a synthetic digit generator.

Loaders return a Dataset with float64 features (N, P) and integer labels.
IDX files follow the classic big-endian layout (magic 0x803 for images with
n/rows/cols dims, 0x801 for labels); pixels come back raw in [0, 255] and are
scaled separately via normalize(..., "unit_byte").

The synthetic generator renders 28x28 seven-segment digits with random
affine jitter, stroke thickness, intensity and pixel noise. It exists so the
image-scale pipelines stay runnable in environments without the real digit
corpus; point the loaders at genuine IDX files to use real data.
"""

import csv
import struct
from dataclasses import dataclass
from importlib import resources

import numpy as np

__all__ = [
    "Dataset",
    "ParseError",
    "load_idx",
    "write_idx",
    "load_iris_csv",
    "save_csv",
    "builtin_iris_path",
    "split",
    "normalize",
    "synthetic_digits",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class ParseError(ValueError):
    """Malformed dataset file; message carries the byte offset or line number."""


@dataclass
class Dataset:
    X: np.ndarray           # (N, P) float64
    y: np.ndarray           # (N,) int64 in [0, n_classes)
    n_classes: int
    names: list = None      # optional class names

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X must be (N, P) with one label per row")
        if self.X.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("features must be finite")
        if np.any(self.y < 0) or np.any(self.y >= self.n_classes):
            raise ValueError("labels out of range")

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]


def _read_exact(f, count, offset, what):
    data = f.read(count)
    if len(data) != count:
        raise ParseError(
            f"truncated {what} at byte offset {offset}: "
            f"wanted {count} bytes, got {len(data)}"
        )
    return data


def load_idx(images_path, labels_path):
    """Parse an IDX image/label file pair into a Dataset (raw byte values)."""
    with open(images_path, "rb") as f:
        header = _read_exact(f, 16, 0, "image header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IMAGE_MAGIC:
            raise ParseError(
                f"bad image magic 0x{magic:08x} at byte offset 0 in {images_path}"
            )
        payload = _read_exact(f, count * rows * cols, 16, "image payload")
        images = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows * cols)
    with open(labels_path, "rb") as f:
        header = _read_exact(f, 8, 0, "label header")
        magic, label_count = struct.unpack(">II", header)
        if magic != LABEL_MAGIC:
            raise ParseError(
                f"bad label magic 0x{magic:08x} at byte offset 0 in {labels_path}"
            )
        payload = _read_exact(f, label_count, 8, "label payload")
        labels = np.frombuffer(payload, dtype=np.uint8)
    if count != label_count:
        raise ParseError(
            f"image count {count} does not match label count {label_count}"
        )
    return Dataset(
        X=images.astype(np.float64),
        y=labels.astype(np.int64),
        n_classes=int(labels.max()) + 1 if label_count else 0,
    )


def write_idx(images, labels, images_path, labels_path):
    """Write a (N, rows, cols) uint8 image stack and labels as IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    if images.ndim != 3 or images.shape[0] != labels.shape[0]:
        raise ValueError("images must be (N, rows, cols) with matching labels")
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, *images.shape))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def load_iris_csv(path):
    """Four real features plus a string label per row; labels map alphabetically."""
    rows = []
    labels = []
    with open(path, newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or (lineno == 1 and not _is_float(row[0])):
                continue  # optional header
            if len(row) != 5:
                raise ParseError(f"line {lineno}: expected 5 fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row[:4]])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: non-numeric feature ({exc})")
            labels.append(row[4].strip())
    if not rows:
        raise ParseError("no data rows found")
    names = sorted(set(labels))
    index = {name: i for i, name in enumerate(names)}
    return Dataset(
        X=np.array(rows),
        y=np.array([index[v] for v in labels]),
        n_classes=len(names),
        names=names,
    )


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def save_csv(dataset, path):
    """Write features plus label-name column; inverse of load_iris_csv."""
    names = dataset.names or [str(c) for c in range(dataset.n_classes)]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for x, label in zip(dataset.X, dataset.y):
            w.writerow([repr(float(v)) for v in x] + [names[label]])


def builtin_iris_path():
    """Path of the vendored Iris CSV."""
    return str(resources.files("tropicnet") / "_datasets" / "iris.csv")


def split(dataset, train_fraction, seed):
    """Seeded permutation split into disjoint train/test covering the dataset."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = rng.permutation(dataset.n_samples)
    cut = int(round(dataset.n_samples * train_fraction))
    tr, te = order[:cut], order[cut:]
    make = lambda idx: Dataset(
        X=dataset.X[idx], y=dataset.y[idx],
        n_classes=dataset.n_classes, names=dataset.names,
    )
    return make(tr), make(te)


def normalize(dataset, scheme):
    """'none' is identity; 'unit_byte' maps byte pixels to [0, 1].

    unit_byte refuses inputs that already look unit-scaled (max <= 1), so a
    double application fails loudly instead of silently shrinking the data.
    """
    if scheme == "none":
        return dataset
    if scheme == "unit_byte":
        peak = float(np.max(dataset.X))
        if peak <= 1.0:
            raise ValueError(
                f"unit_byte expects byte-scaled features, but max value is {peak}"
            )
        return Dataset(
            X=dataset.X / 255.0, y=dataset.y,
            n_classes=dataset.n_classes, names=dataset.names,
        )
    raise ValueError(f"unknown normalization scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Synthetic digits
# ---------------------------------------------------------------------------

# Seven-segment endpoints on a 28x28 canvas: (x0, y0, x1, y1).
_SEGMENTS = {
    "A": (9.0, 5.0, 19.0, 5.0),
    "B": (19.0, 5.0, 19.0, 14.0),
    "C": (19.0, 14.0, 19.0, 23.0),
    "D": (9.0, 23.0, 19.0, 23.0),
    "E": (9.0, 14.0, 9.0, 23.0),
    "F": (9.0, 5.0, 9.0, 14.0),
    "G": (9.0, 14.0, 19.0, 14.0),
}

_DIGIT_SEGMENTS = [
    "ABCDEF",   # 0
    "BC",       # 1
    "ABGED",    # 2
    "ABGCD",    # 3
    "FGBC",     # 4
    "AFGCD",    # 5
    "AFGECD",   # 6
    "ABC",      # 7
    "ABCDEFG",  # 8
    "ABCDFG",   # 9
]

_SIDE = 28


def _segment_distance(points, seg):
    """Distance of each (x, y) point to a line segment."""
    x0, y0, x1, y1 = seg
    p0 = np.array([x0, y0])
    d = np.array([x1 - x0, y1 - y0])
    length2 = float(d @ d)
    rel = points - p0
    t = np.clip((rel @ d) / length2, 0.0, 1.0) if length2 > 0 else 0.0
    closest = p0 + np.outer(t, d) if length2 > 0 else p0[None, :]
    return np.sqrt(np.sum((points - closest) ** 2, axis=1))


def synthetic_digits(n_samples, seed=0, noise=0.10):
    """Deterministic 28x28 digit-like dataset with values in [0, 1].

    Renders jittered seven-segment glyphs: random rotation, shift, scale,
    stroke width and intensity per image, modulated by a low-frequency
    illumination gradient and per-pixel speckle (scanner-style artifacts),
    plus uniform background noise. Classes are balanced up to remainder.
    """
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:_SIDE, 0:_SIDE]
    pixels = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
    center = np.array([_SIDE / 2, _SIDE / 2])

    labels = np.arange(n_samples) % 10
    rng.shuffle(labels)
    X = np.empty((n_samples, _SIDE * _SIDE))
    for idx in range(n_samples):
        digit = labels[idx]
        angle = rng.uniform(-0.25, 0.25)
        shift = rng.uniform(-3.0, 3.0, size=2)
        scale = rng.uniform(0.80, 1.15)
        sigma = rng.uniform(0.9, 1.7)
        amplitude = rng.uniform(0.80, 1.0)
        cos_a, sin_a = np.cos(angle), np.sin(angle)
        rot = np.array([[cos_a, -sin_a], [sin_a, cos_a]])
        # map canvas pixels into glyph coordinates (inverse transform)
        rel = (pixels - center - shift) / scale
        glyph_pts = rel @ rot + center
        img = np.zeros(pixels.shape[0])
        for name in _DIGIT_SEGMENTS[digit]:
            dist = _segment_distance(glyph_pts, _SEGMENTS[name])
            np.maximum(img, amplitude * np.exp(-(dist / sigma) ** 2), out=img)
        # uneven illumination across the page plus per-pixel speckle
        direction = rng.normal(size=2)
        direction /= np.linalg.norm(direction)
        ramp = (pixels - center) @ direction / _SIDE
        img *= (1.0 - rng.uniform(0.0, 0.35) * (ramp + 0.5))
        img *= rng.uniform(0.82, 1.0, size=img.shape)
        img += rng.uniform(0.0, noise, size=img.shape)
        X[idx] = np.clip(img, 0.0, 1.0)
    return Dataset(X=X, y=labels.astype(np.int64), n_classes=10)
