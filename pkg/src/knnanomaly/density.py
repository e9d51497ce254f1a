"""Data-split k-nearest-neighbour density estimation.

The reference half of a split dataset defines the density; the evaluation
half is where the density is queried. Distances are brute-force Euclidean,
computed in row chunks so memory stays bounded for a few thousand points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

__all__ = [
    "Dataset",
    "SplitDataset",
    "DensityEstimate",
    "SupportBounds",
    "split_dataset",
    "default_k",
    "kth_nn_distance",
    "kth_nn_distances",
    "ball_volume",
    "estimate_density",
    "boundary_correct",
    "renormalize",
    "cell_grid",
    "grid_estimate",
    "resample_on_grid",
]

# elements per squared-distance block (~32 MB of float64)
_CHUNK_ELEMENTS = 4_000_000


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    elif arr.ndim != 2:
        raise ValueError(f"points must be 1-D or 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of d-dimensional points.

    ``points`` is stored as an ``(n, d)`` float array; a flat sequence is
    read as n one-dimensional points.
    """

    points: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        pts = _as_points(self.points)
        if pts.shape[1] < 1:
            raise ValueError("dimension must be at least 1")
        if not np.all(np.isfinite(pts)):
            bad = int(np.argwhere(~np.isfinite(pts))[0, 0])
            raise ValueError(f"non-finite coordinate in point {bad}")
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, index, provenance: Optional[str] = None) -> "Dataset":
        return Dataset(self.points[index], self.provenance if provenance is None else provenance)


@dataclass(frozen=True)
class SplitDataset:
    reference: Dataset
    evaluation: Dataset
    fraction: float
    reference_index: np.ndarray = field(repr=False, default=None)
    evaluation_index: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class SupportBounds:
    """Per-axis support limits; use ``-inf``/``inf`` for an unbounded side."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        both = np.isfinite(lo) & np.isfinite(hi)
        if np.any(lo[both] >= hi[both]):
            raise ValueError("lower bound must be below upper bound on every axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unbounded(cls, dim: int) -> "SupportBounds":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    @classmethod
    def box(cls, lower: float, upper: float, dim: int) -> "SupportBounds":
        return cls(np.full(dim, float(lower)), np.full(dim, float(upper)))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def margin(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the nearest finite bound (inf if none)."""
        pts = _as_points(points)
        with np.errstate(invalid="ignore"):
            below = pts - self.lower
            above = self.upper - pts
        return np.minimum(below, above).min(axis=1)


@dataclass(frozen=True)
class DensityEstimate:
    """Density values at a set of evaluation points, plus estimator metadata.

    ``radii`` holds the k-th neighbour distance of every evaluation point and
    ``saturated`` marks points whose radius was zero (duplicate saturation);
    those points carry a value borrowed from the nearest unsaturated point.
    """

    eval_points: np.ndarray
    values: np.ndarray
    k: int
    m_ref: int
    dim: int
    corrected: bool = False
    renormalized: bool = False
    radii: Optional[np.ndarray] = field(default=None, repr=False)
    saturated: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return self.values.shape[0]


def default_k(m_ref: int) -> int:
    """Square-root rule for the neighbour count, ``ceil(sqrt(m_ref))``."""
    if m_ref < 1:
        raise ValueError("reference size must be positive")
    return math.isqrt(m_ref - 1) + 1 if m_ref > 1 else 1


def split_dataset(data: Dataset, fraction: float = 0.5, seed: int = 0) -> SplitDataset:
    """Randomly partition ``data`` into reference and evaluation parts.

    The evaluation part receives ``floor(fraction * n)`` points, the
    reference part the rest. The assignment is a uniform permutation drawn
    from ``numpy.random.default_rng(seed)``.
    """
    n = len(data)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    n_eval = int(math.floor(fraction * n))
    if n_eval == 0 or n_eval == n:
        raise ValueError(f"fraction {fraction} leaves an empty part for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    eval_idx = np.sort(perm[:n_eval])
    ref_idx = np.sort(perm[n_eval:])
    return SplitDataset(
        reference=data.subset(ref_idx),
        evaluation=data.subset(eval_idx),
        fraction=fraction,
        reference_index=ref_idx,
        evaluation_index=eval_idx,
    )


def _squared_distance_blocks(queries: np.ndarray, reference: np.ndarray):
    n, m = queries.shape[0], reference.shape[0]
    step = max(1, _CHUNK_ELEMENTS // max(m, 1))
    for start in range(0, n, step):
        q = queries[start:start + step]
        d2 = np.zeros((q.shape[0], m))
        for j in range(q.shape[1]):
            diff = q[:, j, None] - reference[None, :, j]
            d2 += diff * diff
        yield start, d2


def kth_nn_distances(queries, reference, k: int) -> np.ndarray:
    """k-th nearest-neighbour Euclidean distance for every query point.

    Ties count with multiplicity, so a reference point duplicated twice
    occupies two neighbour slots.
    """
    q = _as_points(queries)
    ref = reference.points if isinstance(reference, Dataset) else _as_points(reference)
    if q.shape[1] != ref.shape[1]:
        raise ValueError(f"dimension mismatch: queries d={q.shape[1]}, reference d={ref.shape[1]}")
    if k < 1:
        raise ValueError("k must be positive")
    if k > ref.shape[0]:
        raise ValueError(f"k={k} exceeds reference size {ref.shape[0]}")
    out = np.empty(q.shape[0])
    for start, d2 in _squared_distance_blocks(q, ref):
        out[start:start + d2.shape[0]] = np.partition(d2, k - 1, axis=1)[:, k - 1]
    return np.sqrt(out)


def kth_nn_distance(query, reference, k: int) -> float:
    """Scalar convenience wrapper around :func:`kth_nn_distances`."""
    q = np.atleast_1d(np.asarray(query, dtype=float))[None, :]
    return float(kth_nn_distances(q, reference, k)[0])


def ball_volume(radius, dim: int):
    """Volume of a Euclidean ball: ``pi**(d/2) / Gamma(d/2 + 1) * r**d``."""
    if dim < 1:
        raise ValueError("dim must be positive")
    r = np.asarray(radius, dtype=float)
    if np.any(r < 0):
        raise ValueError("radius must be nonnegative")
    c_d = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)
    vol = c_d * r ** dim
    return float(vol) if vol.ndim == 0 else vol


def _nearest_donor(points: np.ndarray, targets: np.ndarray, donors: np.ndarray) -> np.ndarray:
    """Index (into ``points``) of the nearest donor for each target index.

    Ties go to the lowest donor index because ``argmin`` returns the first hit
    and ``donors`` is ascending.
    """
    donor_pts = points[donors]
    picked = np.empty(targets.shape[0], dtype=int)
    for start, d2 in _squared_distance_blocks(points[targets], donor_pts):
        picked[start:start + d2.shape[0]] = donors[np.argmin(d2, axis=1)]
    return picked


def estimate_density(eval_points, reference, k: Optional[int] = None) -> DensityEstimate:
    """k-NN density ``(k - 1) / (M * V_d(r_k))`` at each evaluation point.

    ``M`` is the reference size and ``r_k`` the distance from the query to
    its k-th nearest reference point. A query whose k-th distance is zero
    (k or more reference duplicates) is marked saturated and takes the value
    of the nearest query with a positive radius.
    """
    ref = reference if isinstance(reference, Dataset) else Dataset(reference)
    pts = eval_points.points if isinstance(eval_points, Dataset) else _as_points(eval_points)
    m = len(ref)
    if k is None:
        k = default_k(m)
    if k < 2:
        raise ValueError(f"k must be at least 2 (numerator k-1), got {k}")
    if m < k:
        raise ValueError(f"reference size {m} is smaller than k={k}")
    radii = kth_nn_distances(pts, ref, k)
    saturated = radii == 0.0
    values = np.empty_like(radii)
    ok = ~saturated
    values[ok] = (k - 1) / (m * ball_volume(radii[ok], ref.dim))
    if saturated.any():
        donors = np.flatnonzero(ok)
        if donors.size == 0:
            raise ValueError("every evaluation point is saturated (k-th neighbour distance 0)")
        targets = np.flatnonzero(saturated)
        values[targets] = values[_nearest_donor(pts, targets, donors)]
    return DensityEstimate(
        eval_points=pts,
        values=values,
        k=k,
        m_ref=m,
        dim=ref.dim,
        radii=radii,
        saturated=saturated,
    )


def boundary_correct(
    estimate: DensityEstimate,
    reference,
    bounds: SupportBounds,
    k: Optional[int] = None,
) -> DensityEstimate:
    """Replace values whose k-NN ball crosses a support bound.

    Each such point receives the value of the nearest evaluation point whose
    ball lies entirely inside ``bounds``. Raises if no such interior point
    exists.
    """
    if bounds.dim != estimate.dim:
        raise ValueError(f"bounds have dimension {bounds.dim}, estimate has {estimate.dim}")
    k = estimate.k if k is None else k
    radii = estimate.radii
    if radii is None or k != estimate.k:
        radii = kth_nn_distances(estimate.eval_points, reference, k)
    crossing = radii > bounds.margin(estimate.eval_points)
    values = estimate.values.copy()
    if crossing.any():
        interior = ~crossing
        if estimate.saturated is not None:
            interior &= ~estimate.saturated
        donors = np.flatnonzero(interior)
        if donors.size == 0:
            raise ValueError("no interior point: every k-NN ball intersects the support boundary")
        targets = np.flatnonzero(crossing)
        values[targets] = estimate.values[_nearest_donor(estimate.eval_points, targets, donors)]
    return replace(estimate, values=values, corrected=True)


def _uniform_step(x: np.ndarray) -> float:
    steps = np.diff(x)
    step = float(steps.mean())
    if step <= 0 or not np.allclose(steps, step, rtol=1e-6, atol=0.0):
        raise ValueError("evaluation points do not form a uniform grid")
    return step


def renormalize(estimate: DensityEstimate) -> DensityEstimate:
    """Scale a 1-D grid estimate so its rectangle-rule integral is one.

    The integral is ``sum(values) * dx`` with ``dx`` the grid step, i.e. each
    grid point stands for a cell of width ``dx`` centred on it.
    """
    if estimate.dim != 1:
        raise ValueError("renormalize supports 1-D estimates only")
    x = estimate.eval_points[:, 0]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    if np.unique(xs).size < 2:
        raise ValueError("need at least two distinct evaluation points")
    integral = float(estimate.values.sum() * _uniform_step(xs))
    if not integral > 0:
        raise ValueError("estimate integrates to zero")
    return replace(estimate, values=estimate.values / integral, renormalized=True)


def cell_grid(lower: float, upper: float, size: int) -> np.ndarray:
    """``size`` cell centres covering ``[lower, upper]`` in equal cells."""
    if size < 2:
        raise ValueError("grid needs at least two cells")
    if not upper > lower:
        raise ValueError("grid upper limit must exceed the lower limit")
    width = (upper - lower) / size
    return lower + width * (np.arange(size) + 0.5)


def grid_estimate(
    reference,
    k: Optional[int] = None,
    size: int = 2048,
    lower: Optional[float] = None,
    upper: Optional[float] = None,
    bounds: Optional[SupportBounds] = None,
) -> DensityEstimate:
    """1-D estimate on a uniform cell-centred grid over the reference range."""
    ref = reference if isinstance(reference, Dataset) else Dataset(reference)
    if ref.dim != 1:
        raise ValueError("grid estimates are 1-D only")
    x = ref.points[:, 0]
    lo = float(x.min()) if lower is None else lower
    hi = float(x.max()) if upper is None else upper
    est = estimate_density(cell_grid(lo, hi, size), ref, k)
    if bounds is not None:
        est = boundary_correct(est, ref, bounds)
    return est


def resample_on_grid(estimate: DensityEstimate, grid) -> np.ndarray:
    """Linear interpolation of a 1-D estimate onto ``grid``, zero outside.

    Repeated evaluation points are merged by averaging their values.
    """
    if estimate.dim != 1:
        raise ValueError("resample_on_grid supports 1-D estimates only")
    xs, inverse = np.unique(estimate.eval_points[:, 0], return_inverse=True)
    if xs.size < 2:
        raise ValueError("need at least two distinct evaluation points")
    ys = np.bincount(inverse, weights=estimate.values) / np.bincount(inverse)
    g = np.asarray(grid, dtype=float)
    if np.any(np.diff(g) < 0):
        raise ValueError("grid must be sorted ascending")
    out = np.interp(g, xs, ys)
    out[(g < xs[0]) | (g > xs[-1])] = 0.0
    return out
