"""File formats: the TTS1 binary series container, CSV ingestion, and the
JSON encodings of models and fit results.

TTS1 layout (all integers little-endian):

====================  ========================================
magic                 4 bytes, ``b"TTS1"``
version               u32, currently 1
K                     u32, tensor order
dims                  K x u32
T                     u64, series length
payload               T * prod(dims) little-endian float64
====================  ========================================

Each payload slice is stored in vec order (mode-0 index fastest),
time-major, so a write/read round trip is bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import CpFactorModel
from .validation import check_series

MAGIC = b"TTS1"
VERSION = 1
DEFAULT_MAX_ELEMENTS = 1 << 31  # refuse absurd headers before allocating


class FormatError(ValueError):
    """A series file is malformed or truncated."""


def write_series(series, path) -> None:
    """Write a (T, d_1, ..., d_K) series to a TTS1 file."""
    x = check_series(series, min_t=1)
    t_len = x.shape[0]
    dims = x.shape[1:]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(struct.pack("<Q", t_len))
        axes = (0,) + tuple(range(x.ndim - 1, 0, -1))
        payload = np.ascontiguousarray(x.transpose(axes), dtype="<f8")
        fh.write(payload.tobytes())


def read_series(path, max_elements: int = DEFAULT_MAX_ELEMENTS) -> np.ndarray:
    """Read a TTS1 file back into a (T, d_1, ..., d_K) array."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise FormatError(f"{path}: not a TTS1 file (bad magic)")
    version, order = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported TTS1 version {version}")
    if order < 1:
        raise FormatError(f"{path}: tensor order must be positive")
    head = 12 + 4 * order + 8
    if len(raw) < head:
        raise FormatError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{order}I", raw, 12)
    (t_len,) = struct.unpack_from("<Q", raw, 12 + 4 * order)
    if any(d < 1 for d in dims) or t_len < 1:
        raise FormatError(f"{path}: nonpositive dimension in header")
    total = int(t_len) * int(np.prod([int(d) for d in dims], dtype=object))
    if total > max_elements:
        raise FormatError(
            f"{path}: header declares {total} elements, over the "
            f"{max_elements} budget"
        )
    expected = head + 8 * total
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - head} bytes, expected {8 * total}"
        )
    flat = np.frombuffer(raw, dtype="<f8", offset=head)
    x = flat.reshape((t_len,) + tuple(reversed(dims)))
    axes = (0,) + tuple(range(x.ndim - 1, 0, -1))
    return np.ascontiguousarray(x.transpose(axes))


def read_csv_matrix_series(path, rows: int, cols: int) -> np.ndarray:
    """Read a CSV of flattened matrix slices into a (T, rows, cols) series.

    Each record is one time slice of ``rows * cols`` values in vec order
    (row index fastest).  Parse problems report 1-based line numbers.
    """
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    slices = []
    with open(path, "r", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != rows * cols:
                raise FormatError(
                    f"{path}:{lineno}: expected {rows * cols} values, "
                    f"got {len(fields)}"
                )
            try:
                values = np.array([float(f) for f in fields])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            slices.append(values.reshape((rows, cols), order="F"))
    if not slices:
        raise FormatError(f"{path}: no data rows")
    return np.stack(slices)


def write_csv_matrix_series(series, path) -> None:
    """Inverse of :func:`read_csv_matrix_series` for K=2 series."""
    x = check_series(series, order=2, min_t=1)
    with open(path, "w", newline="") as fh:
        for t in range(x.shape[0]):
            flat = x[t].reshape(-1, order="F")
            fh.write(",".join(repr(float(v)) for v in flat))
            fh.write("\n")


def model_to_dict(model: CpFactorModel) -> dict:
    out = {
        "schema": "tfmcp-model/1",
        "dims": list(model.dims),
        "r": model.r,
        "weights": [float(w) for w in model.weights],
        "loadings": [a.tolist() for a in model.loadings],
    }
    out["factors"] = None if model.factors is None else model.factors.tolist()
    return out


def model_from_dict(data: dict) -> CpFactorModel:
    try:
        loadings = [np.asarray(a, dtype=float) for a in data["loadings"]]
        weights = np.asarray(data["weights"], dtype=float)
        factors = data.get("factors")
    except KeyError as exc:
        raise FormatError(f"model JSON is missing field {exc}") from None
    return CpFactorModel(
        weights=weights,
        loadings=loadings,
        factors=None if factors is None else np.asarray(factors, dtype=float),
    )


def write_model(model: CpFactorModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2) + "\n")


def read_model(path) -> CpFactorModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def fit_result_to_dict(result, *, extras: dict | None = None) -> dict:
    """Frozen JSON encoding of a fit result (field names are stable)."""
    out = {
        "schema": "tfmcp-fit-result/1",
        "method": result.method,
        "dims": list(result.dims),
        "r": result.r,
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "trace": [float(v) for v in result.trace],
        "lambda_hat": None
        if result.lambda_hat is None
        else [float(v) for v in result.lambda_hat],
        "weights": [float(w) for w in result.weights],
        "loadings": [a.tolist() for a in result.loadings],
        "factors": result.factors.tolist(),
        "messages": list(result.messages),
    }
    if extras:
        out.update(extras)
    return out
