"""Thresholded anomaly decisions on score series and distance profiles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .divergence import DistanceProfile

__all__ = [
    "Threshold",
    "DetectionReport",
    "threshold_from_training",
    "detect_series",
    "scan_statistic",
    "detect_windows",
]


@dataclass(frozen=True)
class Threshold:
    """Upper decision threshold ``mu + z_{alpha/2} * sigma``."""

    value: float
    alpha: float
    mu: float
    sigma: float

    @property
    def z(self) -> float:
        return float(norm.isf(self.alpha / 2.0))

    def to_dict(self) -> dict:
        return {"value": self.value, "alpha": self.alpha, "mu": self.mu, "sigma": self.sigma, "z": self.z}


def threshold_from_training(training_scores, alpha: float = 0.05) -> Threshold:
    """Threshold from the mean and sample sd (``n - 1``) of normal-condition scores."""
    scores = np.asarray(training_scores, dtype=float).ravel()
    if scores.size < 2:
        raise ValueError("need at least two training scores")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    mu = float(scores.mean())
    sigma = float(scores.std(ddof=1))
    z = float(norm.isf(alpha / 2.0))
    return Threshold(value=mu + z * sigma, alpha=alpha, mu=mu, sigma=sigma)


@dataclass(frozen=True)
class DetectionReport:
    indices: np.ndarray
    scores: np.ndarray
    flags: np.ndarray
    threshold: Threshold
    ground_truth: Optional[np.ndarray] = None
    two_sided: bool = False

    def __len__(self) -> int:
        return self.scores.shape[0]

    def rates(self) -> tuple:
        """``(false_alarm, detection)`` against the attached ground truth."""
        if self.ground_truth is None:
            raise ValueError("report has no ground truth")
        truth = self.ground_truth
        if truth.all() or not truth.any():
            raise ValueError("ground truth must contain both classes")
        fa = float(np.count_nonzero(self.flags & ~truth) / np.count_nonzero(~truth))
        det = float(np.count_nonzero(self.flags & truth) / np.count_nonzero(truth))
        return fa, det

    def table(self) -> np.ndarray:
        """Rows of ``(index, score, flag, truth)``; truth is NaN when absent."""
        truth = np.full(len(self), np.nan) if self.ground_truth is None else self.ground_truth.astype(float)
        return np.column_stack([self.indices, self.scores, self.flags.astype(float), truth])

    def to_dict(self) -> dict:
        out = {
            "threshold": self.threshold.to_dict(),
            "two_sided": self.two_sided,
            "indices": self.indices.tolist(),
            "scores": self.scores.tolist(),
            "flags": self.flags.tolist(),
            "n_flagged": int(self.flags.sum()),
        }
        if self.ground_truth is not None:
            out["ground_truth"] = self.ground_truth.tolist()
            if self.ground_truth.any() and not self.ground_truth.all():
                out["false_alarm"], out["detection"] = self.rates()
        return out


def detect_series(scores, threshold: Threshold, ground_truth=None, indices=None,
                  two_sided: bool = False) -> DetectionReport:
    """Flag every score strictly above ``threshold.value``.

    With ``two_sided`` a score also flags when it falls strictly below
    ``mu - z * sigma``.
    """
    s = np.asarray(scores, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("no scores")
    truth = None
    if ground_truth is not None:
        truth = np.asarray(ground_truth, dtype=bool).ravel()
        if truth.shape != s.shape:
            raise ValueError(f"ground truth length {truth.size} does not match {s.size} scores")
    idx = np.arange(s.size) if indices is None else np.asarray(indices, dtype=int)
    flags = s > threshold.value
    if two_sided:
        flags |= s < 2.0 * threshold.mu - threshold.value
    return DetectionReport(idx, s, flags, threshold, truth, two_sided)


def scan_statistic(scores, ground_truth) -> np.ndarray:
    """Scores divided by their largest magnitude, paired with 0/1 truth.

    Returns an ``(n, 2)`` array of ``(scaled_score, truth)`` rows.
    """
    s = np.asarray(scores, dtype=float).ravel()
    truth = np.asarray(ground_truth, dtype=float).ravel()
    if s.shape != truth.shape:
        raise ValueError(f"length mismatch: {s.size} scores, {truth.size} truth values")
    peak = np.abs(s).max() if s.size else 0.0
    if peak == 0:
        raise ValueError("all scores are zero")
    return np.column_stack([s / peak, truth])


def detect_windows(profile: DistanceProfile, threshold_value: float) -> list:
    """``(x_start, distance)`` of every window whose distance exceeds the threshold."""
    if threshold_value < 0 or math.isnan(threshold_value):
        raise ValueError("threshold must be nonnegative")
    hit = profile.distances > threshold_value
    return [(float(x), float(d)) for x, d in zip(profile.window_starts[hit], profile.distances[hit])]
