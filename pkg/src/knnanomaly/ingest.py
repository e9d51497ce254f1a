"""RSSI log ingestion: parse, synchronize, detrend, split.

Canonical raw format is a CSV with header ``time,tx,rx,rssi``: one row per
received packet, ``time`` in seconds, ``tx``/``rx`` integer sensor ids and
``rssi`` in dB. Measurements arrive asynchronously per directed sensor pair;
:func:`synchronize` interpolates every pair onto a shared time grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "RAW_HEADER",
    "RawFormatError",
    "RawRecord",
    "MeasurementMatrix",
    "parse_raw",
    "write_raw",
    "convert_columns",
    "synchronize",
    "remove_local_means",
    "split_normal_test",
    "align_ground_truth",
    "read_truth",
    "write_truth",
    "make_rssi_fixture",
]

RAW_HEADER = ("time", "tx", "rx", "rssi")


class RawFormatError(ValueError):
    """Raised for a malformed raw log; ``lines`` holds offending line numbers."""

    def __init__(self, message: str, lines: Sequence[int] = ()):
        super().__init__(message)
        self.lines = list(lines)


class RawRecord(NamedTuple):
    timestamp: float
    tx_sensor: int
    rx_sensor: int
    rssi: float


@dataclass(frozen=True)
class MeasurementMatrix:
    """Synchronous ``T x P`` matrix, one column per directed sensor pair.

    ``extrapolated[t, j]`` is set where grid time ``t`` lay outside the
    observed time span of pair ``j`` and the nearest endpoint was copied.
    """

    times: np.ndarray
    values: np.ndarray
    pair_index: tuple
    extrapolated: Optional[np.ndarray] = field(default=None, repr=False)
    detrend_window: Optional[int] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape != (t.size, len(self.pair_index)):
            raise ValueError(f"values shape {v.shape} does not match {t.size} times x {len(self.pair_index)} pairs")
        if not np.all(np.isfinite(v)):
            raise ValueError("measurement matrix contains non-finite entries")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "pair_index", tuple((int(a), int(b)) for a, b in self.pair_index))

    @property
    def n_instants(self) -> int:
        return self.times.size

    @property
    def n_pairs(self) -> int:
        return len(self.pair_index)

    @property
    def sensors(self) -> list:
        return sorted({s for pair in self.pair_index for s in pair})

    def columns(self) -> list:
        return [f"{tx}_{rx}" for tx, rx in self.pair_index]

    def rows(self, index) -> "MeasurementMatrix":
        ext = None if self.extrapolated is None else self.extrapolated[index]
        return MeasurementMatrix(self.times[index], self.values[index], self.pair_index, ext,
                                 self.detrend_window)

    def manifest(self) -> dict:
        ext = self.extrapolated
        return {
            "S": len(self.sensors),
            "P": self.n_pairs,
            "T": self.n_instants,
            "grid": [float(self.times[0]), float(self.times[-1])] if self.n_instants else [],
            "window": self.detrend_window,
            "extrapolated_entries": int(ext.sum()) if ext is not None else 0,
            "extrapolated_pairs": [self.columns()[j] for j in np.flatnonzero(ext.any(axis=0))] if ext is not None else [],
        }

    def to_csv(self, path) -> None:
        header = ",".join(["time"] + self.columns())
        table = np.column_stack([self.times, self.values])
        np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "MeasurementMatrix":
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
        if not header or header[0].strip() != "time":
            raise ValueError(f"{path}: first column must be 'time'")
        pairs = []
        for name in header[1:]:
            tx, _, rx = name.strip().partition("_")
            pairs.append((int(tx), int(rx)))
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(table[:, 0], table[:, 1:], tuple(pairs))


def parse_raw(path) -> list:
    """Read a canonical raw log into records, in file order.

    All malformed rows are collected and reported together with their line
    numbers. A header-only file gives an empty list.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"raw log not found: {path}")
    records = []
    problems = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != RAW_HEADER:
            raise RawFormatError(f"{path}: missing header {','.join(RAW_HEADER)}", [1])
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                if len(row) != 4:
                    raise ValueError(f"expected 4 fields, got {len(row)}")
                t, rssi = float(row[0]), float(row[3])
                tx, rx = int(row[1]), int(row[2])
                if not (math.isfinite(t) and math.isfinite(rssi)):
                    raise ValueError("non-finite value")
                if tx == rx:
                    raise ValueError(f"sensor {tx} measuring itself")
            except ValueError as exc:
                problems.append((line_no, str(exc)))
                continue
            records.append(RawRecord(t, tx, rx, rssi))
    if problems:
        shown = "; ".join(f"line {n}: {msg}" for n, msg in problems[:10])
        more = f" (+{len(problems) - 10} more)" if len(problems) > 10 else ""
        raise RawFormatError(f"{path}: {len(problems)} malformed row(s): {shown}{more}",
                             [n for n, _ in problems])
    return records


def write_raw(records, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RAW_HEADER)
        for r in records:
            w.writerow([repr(float(r.timestamp)), int(r.tx_sensor), int(r.rx_sensor), repr(float(r.rssi))])


def convert_columns(src, dst, time_col: str, tx_col: str, rx_col: str, rssi_col: str,
                    delimiter: str = ",") -> int:
    """Rewrite any delimited log with named columns into the canonical format.

    Returns the number of rows written.
    """
    with open(src, newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        missing = {time_col, tx_col, rx_col, rssi_col} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{src}: missing columns {sorted(missing)}")
        records = [
            RawRecord(float(row[time_col]), int(row[tx_col]), int(row[rx_col]), float(row[rssi_col]))
            for row in reader
        ]
    write_raw(records, dst)
    return len(records)


def synchronize(records, grid) -> MeasurementMatrix:
    """Linearly interpolate every directed pair onto ``grid``.

    Sensors are those appearing in any record and every ordered pair of
    distinct sensors must have at least two records. Outside a pair's
    observed span the nearest endpoint value is used and flagged.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a non-empty strictly increasing vector")
    by_pair = {}
    for r in records:
        by_pair.setdefault((int(r.tx_sensor), int(r.rx_sensor)), []).append((r.timestamp, r.rssi))
    sensors = sorted({s for pair in by_pair for s in pair})
    pairs = [(a, b) for a in sensors for b in sensors if a != b]
    values = np.empty((grid.size, len(pairs)))
    extrapolated = np.zeros((grid.size, len(pairs)), dtype=bool)
    for j, pair in enumerate(pairs):
        obs = by_pair.get(pair, [])
        if len(obs) < 2:
            raise ValueError(f"pair {pair[0]}->{pair[1]} has {len(obs)} record(s); need at least 2")
        arr = np.array(obs, dtype=float)
        t, inverse = np.unique(arr[:, 0], return_inverse=True)
        v = np.bincount(inverse, weights=arr[:, 1]) / np.bincount(inverse)
        if t.size < 2:
            raise ValueError(f"pair {pair[0]}->{pair[1]} has records at a single time")
        values[:, j] = np.interp(grid, t, v)
        extrapolated[:, j] = (grid < t[0]) | (grid > t[-1])
    return MeasurementMatrix(grid, values, tuple(pairs), extrapolated)


def remove_local_means(matrix: MeasurementMatrix, window: int = 51) -> MeasurementMatrix:
    """Subtract each column's centred moving average over ``window`` instants.

    Near the ends the window is truncated to the instants that exist.
    """
    T = matrix.n_instants
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    if window > T:
        raise ValueError(f"window {window} exceeds the {T} available instants")
    half = window // 2
    csum = np.vstack([np.zeros(matrix.n_pairs), np.cumsum(matrix.values, axis=0)])
    t = np.arange(T)
    lo = np.maximum(t - half, 0)
    hi = np.minimum(t + half + 1, T)
    means = (csum[hi] - csum[lo]) / (hi - lo)[:, None]
    return MeasurementMatrix(matrix.times, matrix.values - means, matrix.pair_index,
                             matrix.extrapolated, window)


def split_normal_test(matrix: MeasurementMatrix, boundary_index: int = 50) -> tuple:
    """First ``boundary_index`` instants are normal, the rest are under test."""
    T = matrix.n_instants
    if not 1 <= boundary_index < T:
        raise ValueError(f"boundary {boundary_index} must lie in [1, {T - 1}]")
    return matrix.rows(slice(0, boundary_index)), matrix.rows(slice(boundary_index, T))


def align_ground_truth(truth_raw, matrix, offset: int = 0) -> np.ndarray:
    """Slice a raw truth series to line up with ``matrix``'s instants.

    Entries ``offset + 1 .. offset + T`` (1-based) are returned, i.e. the
    Python slice ``truth_raw[offset:offset + T]``.
    """
    truth = np.asarray(truth_raw, dtype=bool).ravel()
    T = matrix.n_instants if isinstance(matrix, MeasurementMatrix) else int(matrix)
    if offset < 0 or offset + T > truth.size:
        raise ValueError(f"offset {offset} + {T} instants exceeds truth length {truth.size}")
    return truth[offset:offset + T].copy()


def read_truth(path) -> np.ndarray:
    vals = np.loadtxt(path, delimiter=",", ndmin=1)
    if not np.all(np.isin(vals, (0, 1))):
        raise ValueError(f"{path}: ground truth must be 0/1")
    return vals.astype(bool)


def write_truth(truth, path) -> None:
    np.savetxt(path, np.asarray(truth, dtype=int), fmt="%d")


def make_rssi_fixture(
    n_sensors: int = 14,
    n_instants: int = 200,
    motion: tuple = (120, 140),
    noise_sd: float = 1.0,
    motion_sd: float = 6.0,
    affected_fraction: float = 0.3,
    jitter: float = 0.3,
    seed: int = 0,
):
    """Synthetic asynchronous RSSI log mimicking a walk-through experiment.

    Each directed pair reports once per second with timing jitter. Readings
    are a per-pair baseline between -75 and -40 dB, a slow common drift and
    Gaussian noise of ``noise_sd``. During the 1-based ``motion`` instants a
    person obstructs ``affected_fraction`` of the links, which then fade with
    extra zero-mean fluctuation of ``motion_sd`` (so 6 noise sd by default).

    Returns ``(records, truth)``; ``truth`` has one flag per integer instant
    ``0 .. n_instants - 1`` on the synchronization grid.
    """
    rng = np.random.default_rng(seed)
    sensors = list(range(1, n_sensors + 1))
    pairs = [(a, b) for a in sensors for b in sensors if a != b]
    baseline = rng.uniform(-75.0, -40.0, size=len(pairs))
    affected = rng.random(len(pairs)) < affected_fraction
    start, stop = motion
    truth = np.zeros(n_instants, dtype=bool)
    truth[start - 1:stop] = True
    records = []
    ticks = np.arange(n_instants, dtype=float)
    for j, (tx, rx) in enumerate(pairs):
        times = ticks + rng.uniform(-jitter, jitter, size=n_instants)
        drift = 2.0 * np.sin(2.0 * np.pi * times / n_instants)
        rssi = baseline[j] + drift + noise_sd * rng.standard_normal(n_instants)
        if affected[j]:
            moving = truth[np.clip(np.rint(times).astype(int), 0, n_instants - 1)]
            rssi[moving] += motion_sd * rng.standard_normal(int(moving.sum()))
        records.extend(RawRecord(float(t), tx, rx, float(v)) for t, v in zip(times, rssi))
    records.sort(key=lambda r: r.timestamp)
    return records, truth
