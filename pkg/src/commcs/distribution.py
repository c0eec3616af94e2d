"""Categorical value distributions on [0, 1].

Histograms over evenly spaced bin centers represent the distribution of the
next state's value.  Bin centers sit at i/(|Z|-1) so that with 9 bins they
are exactly {0, 1/8, ..., 1}, aligning with 8-rollout MC estimates.  The
module also provides the Gaussian-to-histogram projection, discrete moment
sums, and a quadrature oracle used to cross-check the discrete formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

__all__ = [
    "CategoricalValueDistribution",
    "GaussianSpec",
    "MomentPair",
    "NormalizationError",
    "bin_centers",
    "expectation",
    "moment_sums",
    "discrete_moments",
    "project_gaussian",
    "project_density",
    "continuous_moments_oracle",
    "exact_dv1_from_children",
]

_SUM_TOL = 1e-12


class NormalizationError(ValueError):
    """Raised when a density does not integrate to 1 on [0, 1]."""


def bin_centers(num_bins: int) -> np.ndarray:
    """Evenly spaced bin centers on [0, 1] with endpoints included."""
    if num_bins < 2:
        raise ValueError(f"need at least 2 bins, got {num_bins}")
    return np.linspace(0.0, 1.0, num_bins)


@dataclass(frozen=True)
class CategoricalValueDistribution:
    """Probabilities over evenly spaced bin centers on [0, 1]."""

    bin_centers: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.bin_centers, dtype=float)
        p = np.asarray(self.probabilities, dtype=float)
        if z.ndim != 1 or z.size < 2:
            raise ValueError("bin_centers must be a 1-d array of length >= 2")
        if p.shape != z.shape:
            raise ValueError("probabilities must match bin_centers in shape")
        if not np.allclose(z, np.linspace(0.0, 1.0, z.size), rtol=0.0, atol=1e-12):
            raise ValueError("bin centers must be evenly spaced on [0, 1]")
        if p.min() < -1e-15:
            raise ValueError(f"probabilities must be nonnegative, min={p.min()}")
        p = np.maximum(p, 0.0)
        if abs(p.sum() - 1.0) > _SUM_TOL:
            raise NormalizationError(f"probabilities must sum to 1, got {p.sum()!r}")
        z = z.copy()
        z.flags.writeable = False
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "bin_centers", z)
        object.__setattr__(self, "probabilities", p)

    @property
    def num_bins(self) -> int:
        return self.bin_centers.size

    @property
    def spacing(self) -> float:
        return 1.0 / (self.bin_centers.size - 1)


@dataclass(frozen=True)
class GaussianSpec:
    """A Gaussian over next-state values.

    ``delta_scale`` says how many standard deviations the observed gap
    between the two estimates represents; the effective spread used for
    projection is ``sigma / delta_scale``.
    """

    mu: float
    sigma: float
    delta_scale: int = 1

    def __post_init__(self) -> None:
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if self.delta_scale not in (1, 2, 3):
            raise ValueError(f"delta_scale must be 1, 2 or 3, got {self.delta_scale}")


@dataclass(frozen=True)
class MomentPair:
    """E[sigma^2_m | s] and V[V_m | s] of a next-value distribution."""

    expected_bernoulli_variance: float
    value_variance: float

    def __post_init__(self) -> None:
        if not -1e-12 <= self.expected_bernoulli_variance <= 0.25 + 1e-12:
            raise ValueError(
                "expected_bernoulli_variance must lie in [0, 0.25], "
                f"got {self.expected_bernoulli_variance!r}"
            )
        if self.value_variance < -1e-12:
            raise ValueError("value_variance must be nonnegative")


def expectation(dist: CategoricalValueDistribution) -> float:
    """Mean of the histogram, clamped to [0, 1] against rounding."""
    return float(np.clip(dist.probabilities @ dist.bin_centers, 0.0, 1.0))


def moment_sums(dist: CategoricalValueDistribution) -> tuple[float, float]:
    """First and second raw moments (sum p z, sum p z^2) of a histogram."""
    z = dist.bin_centers
    p = dist.probabilities
    return float(p @ z), float(p @ (z * z))


def discrete_moments(dist: CategoricalValueDistribution, v_n: float) -> MomentPair:
    """Discrete bin sums for E[sigma^2_m] and V[V_m] around ``v_n``."""
    z = dist.bin_centers
    p = dist.probabilities
    e_bern = float(p @ (z * (1.0 - z)))
    v_var = float(p @ ((z - v_n) ** 2))
    return MomentPair(expected_bernoulli_variance=e_bern, value_variance=v_var)


def project_gaussian(spec: GaussianSpec, num_bins: int) -> CategoricalValueDistribution:
    """Project a Gaussian onto the histogram bins.

    Interior bin masses are CDF differences over [z_i - xi/2, z_i + xi/2];
    the two tails are absorbed into the edge bins so total mass is exactly 1.
    Zero effective spread yields a point mass on the bin center nearest mu,
    with ties broken toward the lower bin.
    """
    z = bin_centers(num_bins)
    xi = 1.0 / (num_bins - 1)
    s = spec.sigma / spec.delta_scale
    if s == 0.0:
        probs = np.zeros(num_bins)
        probs[int(np.argmin(np.abs(z - spec.mu)))] = 1.0
        return CategoricalValueDistribution(z, probs)
    edges = np.empty(num_bins + 1)
    edges[0] = -np.inf
    edges[-1] = np.inf
    edges[1:-1] = z[:-1] + xi / 2.0
    with np.errstate(over="ignore"):
        cdf = ndtr((edges - spec.mu) / s)
    return CategoricalValueDistribution(z, np.diff(cdf))


def project_density(
    density: Callable[[float], float], num_bins: int
) -> CategoricalValueDistribution:
    """Project a [0, 1]-supported density onto the histogram bins by quadrature.

    Bin intervals are clipped to [0, 1], so the edge bins carry half-width
    intervals and no mass is lost.
    """
    z = bin_centers(num_bins)
    xi = 1.0 / (num_bins - 1)
    total, _ = integrate.quad(density, 0.0, 1.0, epsabs=1e-10, limit=200)
    if abs(total - 1.0) > 1e-6:
        raise NormalizationError(f"density integrates to {total!r}, expected 1")
    probs = np.empty(num_bins)
    for i, center in enumerate(z):
        lo = max(0.0, center - xi / 2.0)
        hi = min(1.0, center + xi / 2.0)
        probs[i], _ = integrate.quad(density, lo, hi, epsabs=1e-10, limit=200)
    probs /= probs.sum()
    return CategoricalValueDistribution(z, probs)


def continuous_moments_oracle(
    density: Callable[[float], float], v_n: float
) -> MomentPair:
    """Quadrature reference for the discrete moment sums.

    Integrates f(x) x(1-x) and f(x) (x - v_n)^2 over [0, 1] by adaptive
    quadrature; rejects densities that are not normalized within 1e-6.
    """
    total, _ = integrate.quad(density, 0.0, 1.0, epsabs=1e-10, limit=200)
    if abs(total - 1.0) > 1e-6:
        raise NormalizationError(f"density integrates to {total!r}, expected 1")
    e_bern, _ = integrate.quad(
        lambda x: density(x) * x * (1.0 - x), 0.0, 1.0, epsabs=1e-8, limit=200
    )
    v_var, _ = integrate.quad(
        lambda x: density(x) * (x - v_n) ** 2, 0.0, 1.0, epsabs=1e-8, limit=200
    )
    return MomentPair(
        expected_bernoulli_variance=min(max(e_bern, 0.0), 0.25),
        value_variance=max(v_var, 0.0),
    )


def exact_dv1_from_children(
    child_values: Sequence[float],
    child_probs: Sequence[float],
    num_bins: int,
) -> CategoricalValueDistribution:
    """Bin the exact child-value distribution of a state.

    Each child's probability mass lands in the half-open interval
    (z_i - xi/2, z_i + xi/2] containing its value; a value of exactly 0
    belongs to the first bin.
    """
    values = np.asarray(child_values, dtype=float)
    probs = np.asarray(child_probs, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValueError("child_values must be a nonempty 1-d sequence")
    if probs.shape != values.shape:
        raise ValueError("child_probs must match child_values in length")
    if probs.min() < 0.0:
        raise ValueError("child_probs must be nonnegative")
    if abs(probs.sum() - 1.0) > _SUM_TOL:
        raise ValueError(f"child_probs must sum to 1, got {probs.sum()!r}")
    if values.min() < 0.0 or values.max() > 1.0:
        raise ValueError("child_values must lie in [0, 1]")
    z = bin_centers(num_bins)
    xi = 1.0 / (num_bins - 1)
    boundaries = z[:-1] + xi / 2.0
    idx = np.searchsorted(boundaries, values, side="left")
    out = np.zeros(num_bins)
    np.add.at(out, idx, probs)
    return CategoricalValueDistribution(z, out)
