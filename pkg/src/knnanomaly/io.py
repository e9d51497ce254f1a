"""CSV/JSON readers and an all-or-nothing output writer."""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .density import Dataset, DensityEstimate

__all__ = [
    "read_points",
    "points_csv",
    "density_csv",
    "density_sidecar",
    "read_column",
    "file_digest",
    "OutputSet",
]


def read_points(path, header: bool = False) -> Dataset:
    """One point per row, comma separated, optionally behind a header line."""
    path = Path(path)
    try:
        pts = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if pts.size == 0:
        raise ValueError(f"{path}: no data rows")
    return Dataset(pts, str(path))


def read_column(path, header: bool = False) -> np.ndarray:
    """Flat vector from a single-column CSV."""
    data = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    if data.shape[1] != 1:
        raise ValueError(f"{path}: expected one column, found {data.shape[1]}")
    return data[:, 0]


def _table_text(table: np.ndarray, header=None, fmt: str = "%.17g") -> str:
    buf = io.StringIO()
    np.savetxt(buf, np.atleast_2d(table), delimiter=",", fmt=fmt,
               header="" if header is None else ",".join(header), comments="")
    return buf.getvalue()


def points_csv(points, header=None) -> str:
    return _table_text(np.asarray(points, dtype=float), header)


def density_csv(est: DensityEstimate, header: bool = False) -> str:
    """Coordinates followed by a ``pdf`` column."""
    table = np.column_stack([est.eval_points, est.values])
    cols = [f"x{j}" for j in range(est.dim)] + ["pdf"] if header else None
    return _table_text(table, cols)


def density_sidecar(est: DensityEstimate, **extra) -> dict:
    out = {
        "k": est.k,
        "M": est.m_ref,
        "dim": est.dim,
        "n_eval": len(est),
        "boundary_corrected": est.corrected,
        "renormalized": est.renormalized,
        "n_saturated": int(est.saturated.sum()) if est.saturated is not None else 0,
    }
    out.update(extra)
    return out


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class OutputSet:
    """Collects output files and writes them all at once.

    Each file is written to a temporary sibling first; only when every
    temporary is complete are they moved into place with ``os.replace``, so
    a failure leaves no partial outputs behind.
    """

    def __init__(self):
        self._pending: dict = {}

    def add_text(self, path, text: str) -> Path:
        path = Path(path)
        self._pending[path] = text
        return path

    def add_json(self, path, obj) -> Path:
        return self.add_text(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")

    @property
    def paths(self) -> list:
        return list(self._pending)

    def commit(self) -> list:
        staged = []
        try:
            for path, text in self._pending.items():
                path.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
                staged.append((tmp, path))
                with os.fdopen(fd, "w", newline="") as fh:
                    fh.write(text)
        except BaseException:
            for tmp, _ in staged:
                if os.path.exists(tmp):
                    os.unlink(tmp)
            raise
        for tmp, path in staged:
            os.replace(tmp, path)
        written = [p for _, p in staged]
        self._pending.clear()
        return written
