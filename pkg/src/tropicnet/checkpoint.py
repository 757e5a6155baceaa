"""Binary model checkpoints.

Layout (little-endian): magic b"TNET", u32 format version, u8 model kind
(0 = three-layer min/max network, 1 = zero-hidden), then one record per
weight array — u32 rank, u32 dims[rank], float64 payload in row-major order.
The three-layer kind stores (pattern, min, max) in that order; the
zero-hidden kind stores its single matrix.
"""

import struct

import numpy as np

from .model import MinMaxModel, ZeroHiddenModel

__all__ = ["MAGIC", "FORMAT_VERSION", "save_model", "load_model", "CheckpointError"]

MAGIC = b"TNET"
FORMAT_VERSION = 1
KIND_MIN_MAX = 0
KIND_ZERO_HIDDEN = 1


class CheckpointError(ValueError):
    """Malformed or unsupported checkpoint file."""


def _write_array(f, arr):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    f.write(struct.pack("<I", arr.ndim))
    f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    f.write(arr.astype("<f8").tobytes())


def _read_array(f):
    (rank,) = struct.unpack("<I", f.read(4))
    dims = struct.unpack(f"<{rank}I", f.read(4 * rank))
    count = int(np.prod(dims)) if rank else 1
    payload = f.read(8 * count)
    if len(payload) != 8 * count:
        raise CheckpointError("truncated array payload")
    return np.frombuffer(payload, dtype="<f8").reshape(dims).copy()


def save_model(model, path):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        if isinstance(model, MinMaxModel):
            f.write(struct.pack("<B", KIND_MIN_MAX))
            _write_array(f, model.w_pattern)
            _write_array(f, model.w_min)
            _write_array(f, model.w_max)
        elif isinstance(model, ZeroHiddenModel):
            f.write(struct.pack("<B", KIND_ZERO_HIDDEN))
            _write_array(f, model.weights)
        else:
            raise CheckpointError(f"cannot checkpoint {type(model).__name__}")


def load_model(path):
    with open(path, "rb") as f:
        if f.read(4) != MAGIC:
            raise CheckpointError(f"{path}: bad magic")
        (version,) = struct.unpack("<I", f.read(4))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        (kind,) = struct.unpack("<B", f.read(1))
        if kind == KIND_MIN_MAX:
            return MinMaxModel(
                w_pattern=_read_array(f), w_min=_read_array(f), w_max=_read_array(f)
            )
        if kind == KIND_ZERO_HIDDEN:
            return ZeroHiddenModel(weights=_read_array(f))
        raise CheckpointError(f"{path}: unknown model kind {kind}")
