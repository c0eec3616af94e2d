"""Monte Carlo estimation kernel for binary returns.

A state value in {0,1}-reward trees is a success probability, so averaging
sampled returns is binomial sampling in disguise.  This module holds the
estimator, its variance, the Fisher information / CRLB report, and the
rollout sampler everything else builds on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RolloutRecord",
    "VarianceReport",
    "require_unit",
    "mc_estimate",
    "mc_variance",
    "sample_rollouts",
    "fisher_and_crlb",
]


def require_unit(value: float, name: str = "value") -> float:
    """Validate that ``value`` lies in [0, 1] and return it."""
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return float(value)


@dataclass(frozen=True)
class RolloutRecord:
    """A binomial observation: ``successes`` successful returns out of ``trials``."""

    trials: int
    successes: int

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.successes <= self.trials:
            raise ValueError(
                f"successes must lie in [0, {self.trials}], got {self.successes}"
            )


@dataclass(frozen=True)
class VarianceReport:
    """Estimator variance alongside Fisher information and the CRLB.

    ``fisher_info`` is ``math.inf`` for degenerate success probabilities
    (0 or 1), in which case the CRLB is 0.
    """

    variance: float
    fisher_info: float
    crlb: float

    def __post_init__(self) -> None:
        if self.variance < 0.0:
            raise ValueError("variance must be nonnegative")
        if self.crlb < 0.0:
            raise ValueError("crlb must be nonnegative")


def mc_estimate(record: RolloutRecord) -> float:
    """Empirical success rate of a rollout record."""
    return record.successes / record.trials


def mc_variance(p: float, trials: int) -> float:
    """Variance p(1-p)/N of the empirical success rate at true probability p."""
    require_unit(p, "p")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    return p * (1.0 - p) / trials


def sample_rollouts(p: float, trials: int, rng: np.random.Generator) -> RolloutRecord:
    """Draw ``trials`` independent Bernoulli(p) returns from ``rng``.

    Uses one uniform per episode rather than a binomial shortcut so the
    per-episode returns stay in the stream for downstream consumers.
    """
    require_unit(p, "p")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    draws = rng.random(trials) < p
    return RolloutRecord(trials=trials, successes=int(draws.sum()))


def fisher_and_crlb(p: float, trials: int) -> VarianceReport:
    """Fisher information of a Bernoulli(p) observation and the N-trial CRLB.

    At p in {0, 1} the distribution is degenerate: the information is
    reported as ``math.inf`` and the bound collapses to 0.
    """
    require_unit(p, "p")
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if p <= 0.0 or p >= 1.0:
        return VarianceReport(variance=0.0, fisher_info=math.inf, crlb=0.0)
    crlb = p * (1.0 - p) / trials
    return VarianceReport(variance=crlb, fisher_info=1.0 / (p * (1.0 - p)), crlb=crlb)
