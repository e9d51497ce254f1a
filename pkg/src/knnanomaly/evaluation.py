"""ROC curves, normal q-q diagnostics and sample-size sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .entropy import EstimateEnsemble, confidence_interval

__all__ = [
    "RocCurve",
    "QqDiagnostic",
    "SweepRow",
    "roc_curve",
    "qq_against_normal",
    "convergence_sweep",
]


@dataclass(frozen=True)
class RocCurve:
    false_alarm: np.ndarray
    detection: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.false_alarm, self.detection])

    def at(self, threshold: float) -> tuple:
        """Operating point for a threshold on the swept list."""
        hit = np.flatnonzero(self.thresholds == threshold)
        if hit.size == 0:
            raise KeyError(f"threshold {threshold} is not on the curve")
        i = hit[0]
        return float(self.false_alarm[i]), float(self.detection[i])


def roc_curve(scores, labels) -> RocCurve:
    """Exact ROC from every distinct score, flagging ``score > threshold``.

    Thresholds run from ``+inf`` (nothing flagged) down through the distinct
    scores to ``-inf`` (everything flagged). Equal scores flag together, so
    the trapezoid AUC counts tied positive/negative pairs as one half.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels, dtype=bool).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("labels must contain both classes")
    distinct = np.unique(s)[::-1]
    thresholds = np.concatenate([[np.inf], distinct, [-np.inf]])
    # flagged counts at threshold t are counts of scores strictly above t
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    pos_cum = np.concatenate([[0], np.cumsum(y[order])])
    above = np.searchsorted(-s_sorted, -thresholds, side="left")
    tp = pos_cum[above]
    fp = above - tp
    det = tp / n_pos
    fa = fp / n_neg
    auc = float(np.sum(np.diff(fa) * (det[1:] + det[:-1]) / 2.0))
    return RocCurve(false_alarm=fa, detection=det, thresholds=thresholds, auc=auc)


@dataclass(frozen=True)
class QqDiagnostic:
    sample_quantiles: np.ndarray
    normal_quantiles: np.ndarray
    correlation: float


def qq_against_normal(samples) -> QqDiagnostic:
    """Sorted samples against standard normal quantiles at ``(i - 0.5) / n``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 3:
        raise ValueError("q-q diagnostic needs at least three samples")
    if x[0] == x[-1]:
        raise ValueError("all samples are equal")
    q = norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    r = float(np.corrcoef(q, x)[0, 1])
    return QqDiagnostic(sample_quantiles=x, normal_quantiles=q, correlation=r)


@dataclass(frozen=True)
class SweepRow:
    size: int
    mean: float
    variance: float
    ci_lower: float
    ci_upper: float
    true_value: float
    estimates: tuple = ()

    def as_record(self) -> dict:
        return {
            "size": self.size,
            "mean": self.mean,
            "variance": self.variance,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "true_value": self.true_value,
        }


def convergence_sweep(
    estimator: Callable[[int, int], float],
    sizes: Sequence[int],
    realizations: int,
    truth: float = math.nan,
    seed: int = 0,
    level: float = 0.95,
    executor=None,
) -> list:
    """Repeat ``estimator(size, seed)`` R times per size and summarise.

    The realization ``i`` at size index ``j`` runs with seed
    ``seed + j * realizations + i``. ``executor`` is any object with a
    ``map`` method (e.g. a ``concurrent.futures`` pool); rows come back in
    size order either way.
    """
    sizes = list(sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly ascending")
    if realizations < 2:
        raise ValueError("need at least two realizations")
    mapper = map if executor is None else executor.map
    rows = []
    for j, size in enumerate(sizes):
        seeds = [seed + j * realizations + i for i in range(realizations)]

        def run(s, size=size):
            try:
                return float(estimator(size, s))
            except Exception as exc:
                raise RuntimeError(f"pipeline failed at size={size}, seed={s}: {exc}") from exc

        values = list(mapper(run, seeds))
        ens = EstimateEnsemble.from_values(values)
        lo, hi = confidence_interval(ens, level) if ens.variance > 0 else (ens.mean, ens.mean)
        rows.append(SweepRow(size, ens.mean, ens.variance, lo, hi, float(truth), tuple(values)))
    return rows
