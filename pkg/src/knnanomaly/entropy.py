"""Plug-in Shannon entropy estimates and their sampling statistics.

All entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .density import DensityEstimate

__all__ = [
    "digamma",
    "bias_correction",
    "EntropyEstimate",
    "EstimateEnsemble",
    "RateModel",
    "plug_in_entropy",
    "bias_corrected_entropy",
    "gaussian_entropy_closed_form",
    "beta_entropy_closed_form",
    "normalized_scores",
    "confidence_interval",
    "predicted_rates",
]

# Bernoulli-number coefficients B_2n / (2n) of the asymptotic expansion
_PSI_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x: float) -> float:
    """Digamma function for real ``x > 0``.

    Shifts ``x`` up to at least 10 with ``psi(x) = psi(x + 1) - 1/x`` and
    evaluates the asymptotic series there; absolute error is below 1e-13.
    """
    x = float(x)
    if not x > 0 or not math.isfinite(x):
        raise ValueError(f"digamma is implemented for finite x > 0, got {x}")
    shift = 0.0
    while x < 10.0:
        shift -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for c in _PSI_SERIES:
        series += c * power
        power *= inv2
    return shift + math.log(x) - 0.5 / x - series


def bias_correction(k: int) -> float:
    """Additive correction ``ln(k - 1) - psi(k - 1)`` for a k-NN plug-in estimate."""
    if k < 2:
        raise ValueError(f"bias correction needs k >= 2, got {k}")
    return math.log(k - 1) - digamma(k - 1)


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    k: Optional[int] = None
    n_eval: Optional[int] = None
    m_ref: Optional[int] = None
    bias_corrected: bool = False
    renormalized: bool = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "k": self.k,
            "n": self.n_eval,
            "m": self.m_ref,
            "corrected": self.bias_corrected,
            "renormalized": self.renormalized,
        }


@dataclass(frozen=True)
class EstimateEnsemble:
    """Independent entropy estimates from R realizations.

    ``variance`` uses the R - 1 denominator.
    """

    estimates: tuple
    mean: float = field(init=False)
    variance: float = field(init=False)

    def __post_init__(self):
        ests = tuple(self.estimates)
        if len(ests) < 1:
            raise ValueError("ensemble needs at least one estimate")
        vals = np.array([e.value for e in ests], dtype=float)
        object.__setattr__(self, "estimates", ests)
        object.__setattr__(self, "mean", float(vals.mean()))
        object.__setattr__(self, "variance", float(vals.var(ddof=1)) if vals.size > 1 else 0.0)

    @classmethod
    def from_values(cls, values: Sequence[float], **meta) -> "EstimateEnsemble":
        return cls(tuple(EntropyEstimate(float(v), **meta) for v in values))

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.estimates], dtype=float)

    def __len__(self) -> int:
        return len(self.estimates)

    def to_dict(self) -> dict:
        first = self.estimates[0]
        return {
            "estimates": [e.value for e in self.estimates],
            "mean": self.mean,
            "variance": self.variance,
            "k": first.k,
            "n": first.n_eval,
            "m": first.m_ref,
            "corrected": first.bias_corrected,
        }


@dataclass(frozen=True)
class RateModel:
    """Leading-order constants of the bias and variance rates."""

    c1: float = 0.0
    c2: float = 0.0
    c4: float = 0.0
    c5: float = 0.0
    dim: int = 1


def plug_in_entropy(
    density_values,
    *,
    k: Optional[int] = None,
    m_ref: Optional[int] = None,
    renormalized: bool = False,
) -> EntropyEstimate:
    """Sample average of ``-ln f(x_n)`` over the evaluation points.

    ``density_values`` may be a :class:`DensityEstimate`, in which case its
    k, reference size and renormalization flag are carried over.
    """
    if isinstance(density_values, DensityEstimate):
        est = density_values
        k, m_ref, renormalized = est.k, est.m_ref, est.renormalized
        values = est.values
    else:
        values = np.asarray(density_values, dtype=float).ravel()
    if values.size == 0:
        raise ValueError("no density values")
    bad = ~(np.isfinite(values) & (values > 0))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"density value at index {i} is not finite and positive: {values[i]}")
    return EntropyEstimate(
        value=float(np.mean(-np.log(values))),
        k=k,
        n_eval=int(values.size),
        m_ref=m_ref,
        renormalized=renormalized,
    )


def bias_corrected_entropy(est: EntropyEstimate) -> EntropyEstimate:
    if est.bias_corrected:
        raise ValueError("estimate is already bias corrected")
    if est.k is None or est.k < 2:
        raise ValueError(f"bias correction needs k >= 2, got {est.k}")
    return EntropyEstimate(
        value=est.value + bias_correction(est.k),
        k=est.k,
        n_eval=est.n_eval,
        m_ref=est.m_ref,
        bias_corrected=True,
        renormalized=est.renormalized,
    )


def gaussian_entropy_closed_form(sigma2: float) -> float:
    """Entropy of a univariate normal, ``0.5 * ln(2 pi e sigma2)``."""
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    return 0.5 * math.log(2.0 * math.pi * math.e * sigma2)


def beta_entropy_closed_form(alpha: float, beta: float) -> float:
    if not (alpha > 0 and beta > 0):
        raise ValueError(f"beta parameters must be positive, got ({alpha}, {beta})")
    log_b = math.lgamma(alpha) + math.lgamma(beta) - math.lgamma(alpha + beta)
    return (
        log_b
        - (alpha - 1.0) * digamma(alpha)
        - (beta - 1.0) * digamma(beta)
        + (alpha + beta - 2.0) * digamma(alpha + beta)
    )


def _ensemble_values(ensemble) -> np.ndarray:
    if isinstance(ensemble, EstimateEnsemble):
        return ensemble.values
    return np.asarray(ensemble, dtype=float).ravel()


def normalized_scores(ensemble) -> np.ndarray:
    """Centre and scale estimates by the ensemble mean and sample sd."""
    vals = _ensemble_values(ensemble)
    if vals.size < 2:
        raise ValueError("need at least two estimates")
    var = vals.var(ddof=1)
    if not var > 0:
        raise ValueError("ensemble variance is zero")
    return (vals - vals.mean()) / math.sqrt(var)


def confidence_interval(ensemble, level: float = 0.95) -> tuple:
    """Normal-theory interval for the ensemble mean, ``mean +- z sqrt(var / R)``."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    vals = _ensemble_values(ensemble)
    if vals.size < 2:
        raise ValueError("need at least two estimates")
    var = vals.var(ddof=1)
    if not var > 0:
        raise ValueError("ensemble variance is zero")
    z = norm.ppf(0.5 + level / 2.0)
    half = z * math.sqrt(var / vals.size)
    mean = float(vals.mean())
    return mean - half, mean + half


def predicted_rates(model: RateModel, k: int, m: int, n: int) -> tuple:
    """Leading-order ``(bias, variance)`` of the plug-in estimator."""
    if k < 1 or m < 1 or n < 1:
        raise ValueError("k, m and n must be positive")
    bias = model.c1 * (k / m) ** (1.0 / model.dim) + model.c2 / k
    variance = model.c4 / n + model.c5 / m
    return bias, variance
