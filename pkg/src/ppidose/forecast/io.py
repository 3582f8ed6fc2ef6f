"""Versioned binary weight file.

Layout (little-endian):
    magic   8 bytes  b"GMPC-BNN"
    version u32
    hidden  u32, t_hist u32, t_fut u32
    dropout f64, meal_max f64, dose_max f64
    n_tensors u32, then per tensor (fixed parameter order):
        ndim u32, dims u32 * ndim, data f64 row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from .lstm import LstmParams
from .model import PARAM_KEYS, ModelWeights, get_param

MAGIC = b"GMPC-BNN"
FORMAT_VERSION = 1


def _write_tensor(fh, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(struct.pack("<I", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    fh.write(arr.tobytes(order="C"))


def _read_tensor(fh) -> np.ndarray:
    (ndim,) = struct.unpack("<I", fh.read(4))
    dims = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
    count = int(np.prod(dims)) if ndim else 1
    data = np.frombuffer(fh.read(8 * count), dtype="<f8").astype(np.float64)
    return data.reshape(dims)


def save_weights(weights: ModelWeights, path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIII", FORMAT_VERSION, weights.hidden_size,
                             weights.t_hist, weights.t_fut))
        fh.write(struct.pack("<ddd", weights.dropout, weights.meal_max,
                             weights.dose_max))
        fh.write(struct.pack("<I", len(PARAM_KEYS)))
        for key in PARAM_KEYS:
            _write_tensor(fh, get_param(weights, key))


def load_weights(path) -> ModelWeights:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ConfigurationError(f"{path}: not a weight file (bad magic {magic!r})")
        version, hidden, t_hist, t_fut = struct.unpack("<IIII", fh.read(16))
        if version != FORMAT_VERSION:
            raise ConfigurationError(f"{path}: unsupported format version {version}")
        dropout, meal_max, dose_max = struct.unpack("<ddd", fh.read(24))
        (n_tensors,) = struct.unpack("<I", fh.read(4))
        if n_tensors != len(PARAM_KEYS):
            raise ConfigurationError(f"{path}: expected {len(PARAM_KEYS)} tensors, "
                                     f"found {n_tensors}")
        tensors = {key: _read_tensor(fh) for key in PARAM_KEYS}
    weights = ModelWeights(
        enc=LstmParams(tensors["enc.wx"], tensors["enc.wh"], tensors["enc.b"]),
        dec=LstmParams(tensors["dec.wx"], tensors["dec.wh"], tensors["dec.b"]),
        w_out=tensors["head.w"], b_out=tensors["head.b"],
        dropout=dropout, t_hist=t_hist, t_fut=t_fut,
        meal_max=meal_max, dose_max=dose_max)
    if weights.hidden_size != hidden:
        raise ConfigurationError(f"{path}: tensor shapes disagree with header hidden "
                                 f"size {hidden}")
    return weights
