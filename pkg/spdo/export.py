"""Files: SPDO flat binary matrices, CSV matrices, and shape coefficient tables.

SPDO layout: 16-byte header (magic ``SPDO``, then version, rows, cols as
little-endian u32) followed by rows*cols little-endian float64 in row-major order.
"""
from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from .errors import SpdoInputError
from .kernels import ShapeFunction, shape_decay_fit

log = logging.getLogger("spdo.export")

MAGIC = b"SPDO"
VERSION = 1
HEADER = np.dtype([("magic", "S4"), ("version", "<u4"), ("rows", "<u4"), ("cols", "<u4")])


def write_spdo(path: Path | str, array) -> Path:
    """Write a vector (as one column) or a matrix."""
    data = np.asarray(array, dtype="<f8")
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise SpdoInputError(f"SPDO files hold matrices, got an array of shape {data.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([(MAGIC, VERSION, data.shape[0], data.shape[1])], dtype=HEADER)
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(np.ascontiguousarray(data).tobytes())
    return path


def read_spdo(path: Path | str) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.itemsize:
        raise SpdoInputError(f"{path}: too short for an SPDO header")
    header = np.frombuffer(raw[: HEADER.itemsize], dtype=HEADER)[0]
    if bytes(header["magic"]) != MAGIC:
        raise SpdoInputError(f"{path}: not an SPDO file (magic {bytes(header['magic'])!r})")
    if int(header["version"]) != VERSION:
        raise SpdoInputError(f"{path}: unsupported SPDO version {int(header['version'])}")
    rows, cols = int(header["rows"]), int(header["cols"])
    body = raw[HEADER.itemsize :]
    if len(body) != rows * cols * 8:
        raise SpdoInputError(f"{path}: expected {rows}x{cols} float64 values, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).copy()


def write_matrix_csv(path: Path | str, array) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.atleast_2d(np.asarray(array, dtype=float)), delimiter=",", fmt="%.17g")
    return path


def read_matrix_csv(path: Path | str) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))


# ── Shape tables ────────────────────────────────────────


def write_shape_csv(path: Path | str, shape: ShapeFunction) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["l", "phi_hat"])
        for l, value in enumerate(shape.coeffs):
            writer.writerow([l, repr(float(value))])
    return path


def read_shape_csv(path: Path | str, *, n: int = 3, tau: float | None = None, name: str | None = None) -> ShapeFunction:
    """Load an (l, phi_hat) table; without ``tau`` the decay exponent is fitted."""
    path = Path(path)
    if not path.exists():
        raise SpdoInputError(f"shape table not found: {path}")
    values: dict[int, float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip() in ("l", "ℓ"):
                continue
            try:
                values[int(row[0])] = float(row[1])
            except (ValueError, IndexError):
                raise SpdoInputError(f"{path}:{lineno}: expected 'l,phi_hat', got {row!r}") from None
    if sorted(values) != list(range(len(values))):
        raise SpdoInputError(f"{path}: degrees must run 0..L without gaps")
    coeffs = np.array([values[l] for l in range(len(values))])
    if np.any(coeffs < 0):
        raise SpdoInputError(f"{path}: negative coefficient at l={int(np.flatnonzero(coeffs < 0)[0])}")
    shape = ShapeFunction(name=name or path.stem, n=n, coeffs=coeffs, tau=tau if tau is not None else 0.0)
    if tau is None:
        fitted = shape_decay_fit(shape).tau_hat
        log.info("Shape '%s': fitted tau=%.4f.", shape.name, fitted)
        shape = ShapeFunction(name=shape.name, n=n, coeffs=coeffs, tau=fitted)
    return shape
