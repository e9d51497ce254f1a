"""End-to-end estimation pipelines built from the lower-level modules.

``entropy_pipeline`` is the data-split plug-in estimator: split the sample,
estimate the density of the reference half at the evaluation half, optionally
boundary-correct and (in 1-D) renormalize, then average ``-ln f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .density import (
    Dataset,
    DensityEstimate,
    SupportBounds,
    boundary_correct,
    default_k,
    estimate_density,
    grid_estimate,
    renormalize,
    resample_on_grid,
    split_dataset,
)
from .detection import DetectionReport, detect_series, threshold_from_training
from .entropy import (
    EntropyEstimate,
    EstimateEnsemble,
    bias_corrected_entropy,
    plug_in_entropy,
)

__all__ = [
    "DEFAULT_GRID_SIZE",
    "EntropyResult",
    "split_density",
    "entropy_pipeline",
    "entropy_ensemble",
    "normalization_constant",
    "density_on_common_grid",
    "instant_entropies",
    "temporal_detection",
]

# cells in the 1-D normalization grid
DEFAULT_GRID_SIZE = 2048


@dataclass(frozen=True)
class EntropyResult:
    """Uncorrected and bias-corrected estimates from one pipeline run."""

    plug_in: EntropyEstimate
    corrected: EntropyEstimate
    density: DensityEstimate
    normalizer: float = 1.0

    def to_dict(self) -> dict:
        return {
            "plug_in": self.plug_in.value,
            "corrected": self.corrected.value,
            "k": self.plug_in.k,
            "n": self.plug_in.n_eval,
            "m": self.plug_in.m_ref,
            "renormalized": self.plug_in.renormalized,
            "boundary_corrected": self.density.corrected,
            "normalizer": self.normalizer,
            "n_saturated": int(self.density.saturated.sum()) if self.density.saturated is not None else 0,
        }


def normalization_constant(reference: Dataset, k: int, bounds: Optional[SupportBounds] = None,
                           grid_size: int = DEFAULT_GRID_SIZE) -> float:
    """Rectangle-rule integral of the 1-D estimate over the reference range."""
    est = grid_estimate(reference, k, size=grid_size, bounds=bounds)
    x = est.eval_points[:, 0]
    return float(est.values.sum() * (x[1] - x[0]))


def split_density(
    data: Dataset,
    fraction: float = 0.5,
    seed: int = 0,
    k: Optional[int] = None,
    bounds: Optional[SupportBounds] = None,
    renormalized: Optional[bool] = None,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> tuple:
    """Density of the reference half evaluated on the evaluation half.

    Returns ``(estimate, normalizer)``. When renormalizing (the 1-D
    default) the values are divided by the integral of the same estimator
    over a uniform grid spanning the reference data.
    """
    split = split_dataset(data, fraction, seed)
    ref = split.reference
    k = default_k(len(ref)) if k is None else k
    est = estimate_density(split.evaluation, ref, k)
    if bounds is not None:
        est = boundary_correct(est, ref, bounds)
    if renormalized is None:
        renormalized = data.dim == 1
    normalizer = 1.0
    if renormalized:
        if data.dim != 1:
            raise ValueError("renormalization is only available in 1-D")
        normalizer = normalization_constant(ref, k, bounds, grid_size)
        est = DensityEstimate(
            eval_points=est.eval_points,
            values=est.values / normalizer,
            k=est.k,
            m_ref=est.m_ref,
            dim=est.dim,
            corrected=est.corrected,
            renormalized=True,
            radii=est.radii,
            saturated=est.saturated,
        )
    return est, normalizer


def entropy_pipeline(
    data: Dataset,
    fraction: float = 0.5,
    seed: int = 0,
    k: Optional[int] = None,
    bounds: Optional[SupportBounds] = None,
    renormalized: Optional[bool] = None,
    grid_size: int = DEFAULT_GRID_SIZE,
) -> EntropyResult:
    """Data-split plug-in entropy of ``data``, with and without bias correction."""
    est, normalizer = split_density(data, fraction, seed, k, bounds, renormalized, grid_size)
    raw = plug_in_entropy(est)
    return EntropyResult(raw, bias_corrected_entropy(raw), est, normalizer)


def entropy_ensemble(make_data, realizations: int, seed: int = 0, corrected: bool = False,
                     **pipeline_kw) -> EstimateEnsemble:
    """Run the pipeline on ``make_data(seed_i)`` for ``seed_i = seed + i``.

    The same ``seed_i`` drives the split of realization ``i``.
    """
    ests = []
    for i in range(realizations):
        s = seed + i
        res = entropy_pipeline(make_data(s), seed=s, **pipeline_kw)
        ests.append(res.corrected if corrected else res.plug_in)
    return EstimateEnsemble(tuple(ests))


def density_on_common_grid(
    data_a: Dataset,
    data_b: Dataset,
    fraction: float = 0.5,
    seed: int = 0,
    k: Optional[int] = None,
    grid_size: Optional[int] = None,
    bounds: Optional[SupportBounds] = None,
) -> tuple:
    """Estimate two 1-D densities and place both on one uniform grid.

    Each density is the data-split estimate at its own evaluation points,
    linearly interpolated onto a grid spanning the union of both datasets
    and set to zero outside its own range. Both are then renormalized on that
    grid. Returns ``(grid, pdf_a, pdf_b, k)``; the grid size defaults to the
    larger dataset size.
    """
    if data_a.dim != 1 or data_b.dim != 1:
        raise ValueError("common-grid densities are 1-D only")
    size = max(len(data_a), len(data_b)) if grid_size is None else grid_size
    est_a, _ = split_density(data_a, fraction, seed, k, bounds, renormalized=False)
    est_b, _ = split_density(data_b, fraction, seed + 1, k, bounds, renormalized=False)
    lo = min(data_a.points.min(), data_b.points.min())
    hi = max(data_a.points.max(), data_b.points.max())
    grid = np.linspace(lo, hi, size)
    step = grid[1] - grid[0]
    pdfs = []
    for est in (est_a, est_b):
        vals = resample_on_grid(est, grid)
        pdfs.append(vals / (vals.sum() * step))
    return grid, pdfs[0], pdfs[1], est_a.k


def instant_entropies(values, fraction: float = 0.5, seed: int = 0, k: Optional[int] = None,
                      corrected: bool = True, grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Entropy of each row of ``values`` treated as a 1-D sample.

    Row ``t`` is split with seed ``seed + t``.
    """
    rows = np.asarray(values, dtype=float)
    out = np.empty(rows.shape[0])
    for t, row in enumerate(rows):
        res = entropy_pipeline(Dataset(row), fraction, seed + t, k, grid_size=grid_size)
        out[t] = (res.corrected if corrected else res.plug_in).value
    return out


def temporal_detection(values, boundary: int = 50, alpha: float = 0.05, ground_truth=None,
                       seed: int = 0, corrected: bool = True, two_sided: bool = False,
                       **kw) -> DetectionReport:
    """Per-instant entropy detection with a threshold learned on the first instants.

    Instants ``[0, boundary)`` are the normal condition. Every instant's
    entropy is normalized by the normal instants' mean and sample sd, the
    threshold is fit on the normalized normal scores, and the instants after
    ``boundary`` are tested. ``ground_truth`` is aligned with those tested
    instants.
    """
    ent = instant_entropies(values, seed=seed, corrected=corrected, **kw)
    if not 2 <= boundary < ent.size:
        raise ValueError(f"boundary {boundary} must leave at least two normal and one test instant")
    train = ent[:boundary]
    sd = train.std(ddof=1)
    if not sd > 0:
        raise ValueError("normal-condition entropies have zero variance")
    z = (ent - train.mean()) / sd
    threshold = threshold_from_training(z[:boundary], alpha)
    return detect_series(z[boundary:], threshold, ground_truth,
                         indices=np.arange(boundary, ent.size), two_sided=two_sided)
