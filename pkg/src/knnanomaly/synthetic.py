"""Seeded test distributions, their analytic densities, and anomaly injection.

Every generator draws from ``numpy.random.default_rng(seed)`` (PCG64), so a
given seed reproduces a dataset bit for bit on any platform numpy supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import Dataset

__all__ = [
    "ANOMALY_KINDS",
    "AnomalySpec",
    "MixtureSpec",
    "gen_gaussian",
    "gen_beta",
    "gen_mixture",
    "analytic_pdf",
    "mixture_entropy",
    "inject_anomalies",
]

ANOMALY_KINDS = (
    "extreme",
    "missing",
    "constant_increment",
    "variable_increment",
    "repetition",
    "subtle_shift",
)


@dataclass(frozen=True)
class AnomalySpec:
    kind: str = "extreme"
    fraction: float = 0.05
    magnitude: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.kind!r}; expected one of {ANOMALY_KINDS}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction must lie in (0, 1], got {self.fraction}")


@dataclass(frozen=True)
class MixtureSpec:
    """Beta-product plus uniform mixture on the unit cube."""

    p: float = 0.8
    beta_alpha: float = 4.0
    beta_beta: float = 4.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"mixing ratio must lie in [0, 1], got {self.p}")
        if not (self.beta_alpha > 0 and self.beta_beta > 0):
            raise ValueError("beta parameters must be positive")


def _check_n(n: int, dim: int):
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")


def gen_gaussian(n: int, dim: int = 1, mu=0.0, sigma2: float = 1.0, seed: int = 0) -> Dataset:
    """``n`` points with independent ``N(mu_j, sigma2)`` coordinates."""
    _check_n(n, dim)
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (dim,))
    rng = np.random.default_rng(seed)
    pts = mu + math.sqrt(sigma2) * rng.standard_normal((n, dim))
    return Dataset(pts, f"gaussian(n={n}, dim={dim}, mu={mu.tolist()}, sigma2={sigma2}, seed={seed})")


def gen_beta(n: int, dim: int = 1, alpha: float = 4.0, beta: float = 4.0, seed: int = 0) -> Dataset:
    """``n`` points with independent Beta(alpha, beta) coordinates."""
    _check_n(n, dim)
    if not (alpha > 0 and beta > 0):
        raise ValueError(f"beta parameters must be positive, got ({alpha}, {beta})")
    rng = np.random.default_rng(seed)
    pts = rng.beta(alpha, beta, size=(n, dim))
    return Dataset(pts, f"beta(n={n}, dim={dim}, alpha={alpha}, beta={beta}, seed={seed})")


def gen_mixture(n: int, spec: MixtureSpec = MixtureSpec(), dim: int = 2, seed: int = 0,
                return_labels: bool = False):
    """Draw each point from the Beta product with probability ``p``, else uniformly.

    The Beta draws come from the same stream :func:`gen_beta` uses for
    ``seed``, so ``p = 1`` reproduces it exactly. Component labels and
    uniform draws use an independent stream keyed on ``(seed, 1)``.
    """
    _check_n(n, dim)
    beta_pts = gen_beta(n, dim, spec.beta_alpha, spec.beta_beta, seed).points
    aux = np.random.default_rng([seed, 1])
    from_beta = aux.random(n) < spec.p
    uniform_pts = aux.random((n, dim))
    pts = np.where(from_beta[:, None], beta_pts, uniform_pts)
    data = Dataset(
        pts,
        f"mixture(n={n}, dim={dim}, p={spec.p}, alpha={spec.beta_alpha}, "
        f"beta={spec.beta_beta}, seed={seed})",
    )
    return (data, from_beta) if return_labels else data


def _beta_pdf(x: np.ndarray, a: float, b: float) -> np.ndarray:
    log_b = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    with np.errstate(divide="ignore"):
        return np.exp((a - 1) * np.log(x) + (b - 1) * np.log1p(-x) - log_b)


def analytic_pdf(kind: str, params: dict, x) -> np.ndarray:
    """Exact density of a generator's distribution at ``x``.

    Coordinates are independent, so d-dimensional densities are products of
    marginals. ``params["dim"]`` (default 1) decides how a flat ``x`` is
    read: n scalar points when dim is 1, one point otherwise. A scalar or a
    single point gives a float; anything else an array.
    """
    arr = np.asarray(x, dtype=float)
    dim = int(params.get("dim", 1))
    single = arr.ndim == 0 or (arr.ndim == 1 and dim > 1)
    if arr.ndim == 2:
        pts = arr
    elif single:
        pts = arr.reshape(1, -1)
    else:
        pts = arr[:, None]
    if kind == "gaussian":
        mu = np.asarray(params.get("mu", 0.0), dtype=float)
        s2 = float(params.get("sigma2", 1.0))
        z = (pts - mu) ** 2 / s2
        dens = np.prod(np.exp(-0.5 * z) / math.sqrt(2 * math.pi * s2), axis=1)
    elif kind in ("beta", "mixture"):
        if np.any((pts < 0) | (pts > 1)):
            raise ValueError(f"{kind} density is supported on [0, 1]^d only")
        a = float(params.get("alpha", params.get("beta_alpha", 4.0)))
        b = float(params.get("beta", params.get("beta_beta", 4.0)))
        dens = np.prod(_beta_pdf(pts, a, b), axis=1)
        if kind == "mixture":
            p = float(params.get("p", 0.8))
            dens = p * dens + (1.0 - p)
    else:
        raise ValueError(f"unknown distribution kind {kind!r}")
    return float(dens[0]) if single else dens


def mixture_entropy(spec: MixtureSpec = MixtureSpec(), dim: int = 2, cells: int = 2000) -> float:
    """Differential entropy of the mixture by midpoint quadrature on the unit cube.

    Only ``dim`` 1 and 2 are supported; ``cells`` is the count per axis.
    """
    if dim not in (1, 2):
        raise ValueError("quadrature entropy is available for dim 1 or 2")
    x = (np.arange(cells) + 0.5) / cells
    marginal = _beta_pdf(x, spec.beta_alpha, spec.beta_beta)
    beta_part = marginal if dim == 1 else np.multiply.outer(marginal, marginal)
    f = spec.p * beta_part + (1.0 - spec.p)
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(f > 0, f * np.log(f), 0.0)
    return float(-integrand.sum() / cells**dim)


def inject_anomalies(data: Dataset, spec: AnomalySpec):
    """Corrupt ``ceil(fraction * n)`` randomly chosen points.

    Returns the modified dataset and a boolean truth mask. ``sd`` below is
    the per-coordinate sample standard deviation of the clean data.

    - extreme: shift by ``+-magnitude * sd`` (sign drawn per point)
    - missing: set to 0
    - constant_increment: add ``magnitude``
    - variable_increment: add ``U(0, magnitude)``
    - repetition: copy another randomly chosen point
    - subtle_shift: add ``magnitude`` to every point; all truth entries set
    """
    n = len(data)
    pts = data.points.copy()
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "subtle_shift":
        pts += spec.magnitude
        truth = np.ones(n, dtype=bool)
        return Dataset(pts, f"{data.provenance} + subtle_shift({spec.magnitude})"), truth
    count = math.ceil(spec.fraction * n)
    if spec.fraction * n < 1:
        raise ValueError(f"fraction {spec.fraction} selects no point of {n}")
    idx = np.sort(rng.choice(n, size=count, replace=False))
    if spec.kind == "extreme":
        sd = data.points.std(axis=0, ddof=1) if n > 1 else np.ones(data.dim)
        sign = np.where(rng.random((count, 1)) < 0.5, -1.0, 1.0)
        pts[idx] += sign * spec.magnitude * sd
    elif spec.kind == "missing":
        pts[idx] = 0.0
    elif spec.kind == "constant_increment":
        pts[idx] += spec.magnitude
    elif spec.kind == "variable_increment":
        pts[idx] += rng.uniform(0.0, spec.magnitude, size=(count, data.dim))
    elif spec.kind == "repetition":
        if n < 2:
            raise ValueError("repetition needs at least two points")
        src = rng.integers(0, n - 1, size=count)
        src = src + (src >= idx)  # never copy a point onto itself
        pts[idx] = data.points[src]
    truth = np.zeros(n, dtype=bool)
    truth[idx] = True
    return Dataset(pts, f"{data.provenance} + {spec.kind}({spec.fraction}, {spec.magnitude})"), truth
