"""Bhattacharyya distance and Kullback-Leibler divergence.

The windowed Bhattacharyya profile treats the pdf values inside each window
as a sample and compares the two windows through their means and variances.
It localises *where* on the measurement axis two densities disagree, which
a whole-set entropy comparison cannot do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "VARIANCE_FLOOR",
    "GaussianSummary",
    "DistanceProfile",
    "KLResult",
    "bhattacharyya",
    "bhattacharyya_1d",
    "windowed_bhattacharyya",
    "kl_divergence",
]

# substituted for an exactly-zero window variance
VARIANCE_FLOOR = 2e-5


@dataclass(frozen=True)
class GaussianSummary:
    """Mean vector and covariance matrix of a dataset."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        c = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if m.ndim != 1 or c.shape != (m.size, m.size):
            raise ValueError(f"covariance shape {c.shape} does not match mean length {m.size}")
        if not np.allclose(c, c.T, rtol=1e-12, atol=0.0):
            raise ValueError("covariance is not symmetric")
        try:
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise ValueError("covariance is not positive definite") from None
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", c)

    @classmethod
    def from_samples(cls, points) -> "GaussianSummary":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls(pts.mean(axis=0), np.atleast_2d(np.cov(pts, rowvar=False, ddof=1)))

    @property
    def dim(self) -> int:
        return self.mean.size


def bhattacharyya(p: GaussianSummary, q: GaussianSummary) -> float:
    """Bhattacharyya distance between two Gaussian summaries.

    ``1/8 dm' S^-1 dm + 1/2 ln(det S / sqrt(det Sp det Sq))`` with
    ``S = (Sp + Sq) / 2``. Symmetric in its arguments.
    """
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    dm = p.mean - q.mean
    avg = 0.5 * (p.covariance + q.covariance)
    maha = float(dm @ np.linalg.solve(avg, dm))
    _, logdet_avg = np.linalg.slogdet(avg)
    _, logdet_p = np.linalg.slogdet(p.covariance)
    _, logdet_q = np.linalg.slogdet(q.covariance)
    return max(0.0, 0.125 * maha + 0.5 * (logdet_avg - 0.5 * (logdet_p + logdet_q)))


def bhattacharyya_1d(m1: float, v1: float, m2: float, v2: float) -> float:
    """Scalar form of :func:`bhattacharyya` for two means and variances."""
    if not (v1 > 0 and v2 > 0):
        raise ValueError("variances must be positive")
    s = v1 + v2
    return 0.125 * (m1 - m2) ** 2 * (2.0 / s) + 0.5 * math.log((s / 2.0) / math.sqrt(v1 * v2))


@dataclass(frozen=True)
class DistanceProfile:
    window_starts: np.ndarray
    distances: np.ndarray
    window_len: int
    grid_size: int
    stride: Optional[int] = None
    floor_hits: int = 0
    grid_bounds: tuple = field(default=(None, None))

    def __len__(self) -> int:
        return self.distances.shape[0]

    def metadata(self) -> dict:
        return {
            "window_len": self.window_len,
            "stride": self.stride or self.window_len,
            "grid_size": self.grid_size,
            "grid_bounds": list(self.grid_bounds),
            "floor_hits": self.floor_hits,
            "n_windows": len(self),
        }


def windowed_bhattacharyya(pdf_a, pdf_b, grid, window_len: int,
                           stride: Optional[int] = None) -> DistanceProfile:
    """Per-window Bhattacharyya distances between two pdfs on a common grid.

    Windows are ``[i, i + window_len)`` for ``i = 0, stride, 2*stride, ...``
    while the window fits; ``stride`` defaults to ``window_len``
    (consecutive, non-overlapping). Window statistics are the sample mean and
    the ``n - 1`` sample variance of the pdf values it covers.
    """
    a = np.asarray(pdf_a, dtype=float)
    b = np.asarray(pdf_b, dtype=float)
    g = np.asarray(grid, dtype=float)
    if not (a.shape == b.shape == g.shape) or a.ndim != 1:
        raise ValueError(f"pdf_a, pdf_b and grid must be equal-length vectors: {a.shape}, {b.shape}, {g.shape}")
    size = g.size
    if window_len < 2:
        raise ValueError("window_len must be at least 2")
    if window_len > size:
        raise ValueError(f"window_len {window_len} exceeds grid size {size}")
    step = window_len if stride is None else int(stride)
    if step < 1:
        raise ValueError("stride must be positive")
    starts = np.arange(0, size - window_len + 1, step)
    idx = starts[:, None] + np.arange(window_len)[None, :]
    wa, wb = a[idx], b[idx]
    ma, mb = wa.mean(axis=1), wb.mean(axis=1)
    va, vb = wa.var(axis=1, ddof=1), wb.var(axis=1, ddof=1)
    floor_hits = int(np.count_nonzero(va == 0) + np.count_nonzero(vb == 0))
    va = np.where(va == 0, VARIANCE_FLOOR, va)
    vb = np.where(vb == 0, VARIANCE_FLOOR, vb)
    s = va + vb
    dist = 0.125 * (ma - mb) ** 2 * (2.0 / s) + 0.5 * np.log((s / 2.0) / np.sqrt(va * vb))
    return DistanceProfile(
        window_starts=g[starts],
        distances=np.maximum(dist, 0.0),
        window_len=window_len,
        grid_size=size,
        stride=stride,
        floor_hits=floor_hits,
        grid_bounds=(float(g[0]), float(g[-1])),
    )


@dataclass(frozen=True)
class KLResult:
    """KL divergence value; ``n_floored`` counts bins where q was floored."""

    value: float
    n_floored: int = 0

    def __float__(self) -> float:
        return self.value


def kl_divergence(pdf_p, pdf_q, grid, q_floor: float = 1e-12) -> KLResult:
    """Riemann-sum KL divergence ``sum p ln(p / q) dx`` over bins with ``p > 0``.

    Both densities should already integrate to one on the uniform ``grid``.
    Where ``p > 0`` but ``q == 0``, q is replaced by ``q_floor``.
    """
    p = np.asarray(pdf_p, dtype=float)
    q = np.asarray(pdf_q, dtype=float)
    g = np.asarray(grid, dtype=float)
    if not (p.shape == q.shape == g.shape) or p.ndim != 1:
        raise ValueError("pdf_p, pdf_q and grid must be equal-length vectors")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("densities must be nonnegative")
    if g.size < 2:
        dx = 1.0
    else:
        steps = np.diff(g)
        dx = float(steps.mean())
        if dx <= 0 or not np.allclose(steps, dx, rtol=1e-6, atol=0.0):
            raise ValueError("grid is not uniform")
    support = p > 0
    floored = support & (q == 0)
    qs = np.where(floored, q_floor, q)[support]
    ps = p[support]
    value = float(np.sum(ps * np.log(ps / qs)) * dx)
    return KLResult(value=value, n_floored=int(floored.sum()))
