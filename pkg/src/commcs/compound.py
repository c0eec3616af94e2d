"""Compound value estimation.

Combines the MC estimate at a step with the estimate one step later,
choosing the mixing coefficient by comparing the plug-in variance of the
plain estimator against the two-term compound variance.  The general
multi-step variance formula is included for validation of the theory; the
pipeline itself only ever combines adjacent steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .binomial import require_unit
from .distribution import CategoricalValueDistribution, MomentPair, discrete_moments

__all__ = [
    "CoefficientCandidates",
    "RefinedLabel",
    "StepStatistics",
    "DEFAULT_CANDIDATES",
    "STATIC_COEFFICIENT_SET",
    "compound_estimate",
    "compound_variance_two_term",
    "compound_variance_general",
    "select_coefficient",
    "select_coefficients_batch",
    "refine_annotations",
]

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class CoefficientCandidates:
    """Ordered candidate coefficients, tried first to last.

    Descending order (e.g. (0.99, 0.9)) is the package convention: it
    biases the search toward conservative updates.
    """

    candidates: tuple[float, ...]

    def __post_init__(self) -> None:
        cand = tuple(float(c) for c in self.candidates)
        if not cand:
            raise ValueError("candidate list must be nonempty")
        if any(not 0.0 <= c <= 1.0 for c in cand):
            raise ValueError(f"candidates must lie in [0, 1], got {cand}")
        if len(set(cand)) != len(cand):
            raise ValueError(f"duplicate candidates forbidden, got {cand}")
        object.__setattr__(self, "candidates", cand)

    def __iter__(self):
        return iter(self.candidates)


DEFAULT_CANDIDATES = CoefficientCandidates((0.99, 0.9))

# Fixed-coefficient settings exercised by the ablation suite.
STATIC_COEFFICIENT_SET = (0.9, 0.99, 1.0)


@dataclass(frozen=True)
class RefinedLabel:
    """A possibly-updated state-value label.

    ``chosen_coefficient`` is None when no candidate strictly reduced the
    estimated variance; the value then equals the plain estimate.
    """

    value: float
    chosen_coefficient: Optional[float]
    plain_variance: float
    compound_variance: Optional[float]

    def __post_init__(self) -> None:
        require_unit(self.value, "value")
        if self.plain_variance < 0.0:
            raise ValueError("plain_variance must be nonnegative")
        if self.chosen_coefficient is None:
            if self.compound_variance is not None:
                raise ValueError("compound_variance must be None without a coefficient")
        else:
            if self.compound_variance is None:
                raise ValueError("compound_variance required with a coefficient")
            if not self.compound_variance < self.plain_variance:
                raise ValueError(
                    "a chosen coefficient must strictly reduce the variance"
                )


@dataclass(frozen=True)
class StepStatistics:
    """Per-step variance contributions for a multi-step combination.

    Index 0 is the conditioning step itself, so its value variance is 0 and
    covariance entries pairing it with later steps are structurally zero
    and must not appear.
    """

    expected_bernoulli_variances: tuple[float, ...]
    value_variances: tuple[float, ...]
    covariances: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.expected_bernoulli_variances)
        if len(self.value_variances) != n:
            raise ValueError("per-step statistic lists must have equal length")
        for (i, j), _ in self.covariances.items():
            if not 0 < i < j < n:
                raise ValueError(
                    f"covariance key ({i}, {j}) invalid: pairs with the first "
                    "step are structurally zero and indices must be ordered"
                )


def compound_estimate(v_n_hat: float, v_next_hat: float, c: float) -> float:
    """Convex combination c * v_n_hat + (1 - c) * v_next_hat."""
    require_unit(v_n_hat, "v_n_hat")
    require_unit(v_next_hat, "v_next_hat")
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"c must lie in [0, 1], got {c}")
    return c * v_n_hat + (1.0 - c) * v_next_hat


def compound_variance_two_term(
    c: float, sigma2_n: float, moments: MomentPair, trials: int
) -> float:
    """Two-term compound variance: the covariance term vanishes.

    c^2 sigma^2_n / N + (1-c)^2 (E[sigma^2_m]/N + V[V_m]).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"c must lie in [0, 1], got {c}")
    own = c * c * sigma2_n / trials
    nxt = (1.0 - c) ** 2 * (
        moments.expected_bernoulli_variance / trials + moments.value_variance
    )
    return own + nxt


def compound_variance_general(
    coeffs: Sequence[float], stats: StepStatistics, trials: int
) -> float:
    """Multi-step compound variance with explicit covariance entries."""
    c = np.asarray(coeffs, dtype=float)
    if abs(c.sum() - 1.0) > _SUM_TOL:
        raise ValueError(f"coefficients must sum to 1, got {c.sum()!r}")
    if c.size != len(stats.expected_bernoulli_variances):
        raise ValueError("coefficient count must match the step statistics")
    e_bern = np.asarray(stats.expected_bernoulli_variances, dtype=float)
    v_var = np.asarray(stats.value_variances, dtype=float)
    var = float((c * c) @ (e_bern / trials + v_var))
    for (i, j), cov in stats.covariances.items():
        var += 2.0 * c[i] * c[j] * cov
    return var


def select_coefficient(
    v_n_hat: float,
    q_hat: float,
    dv1: CategoricalValueDistribution,
    trials: int,
    candidates: CoefficientCandidates = DEFAULT_CANDIDATES,
) -> RefinedLabel:
    """Try candidates in order; keep the first that strictly reduces variance.

    Both the plain variance and sigma^2_n use the plug-in estimate
    v_n_hat (1 - v_n_hat), so a degenerate estimate (0 or 1) is never
    refined: its plug-in variance is already 0.
    """
    require_unit(v_n_hat, "v_n_hat")
    require_unit(q_hat, "q_hat")
    sigma2_n = v_n_hat * (1.0 - v_n_hat)
    plain = sigma2_n / trials
    moments = discrete_moments(dv1, v_n_hat)
    for c in candidates:
        cv = compound_variance_two_term(c, sigma2_n, moments, trials)
        if cv < plain:
            return RefinedLabel(
                value=compound_estimate(v_n_hat, q_hat, c),
                chosen_coefficient=c,
                plain_variance=plain,
                compound_variance=cv,
            )
    return RefinedLabel(
        value=v_n_hat,
        chosen_coefficient=None,
        plain_variance=plain,
        compound_variance=None,
    )


def select_coefficients_batch(
    v_hat: np.ndarray,
    q_hat: np.ndarray,
    m1: float,
    m2: float,
    trials: int,
    candidates: CoefficientCandidates = DEFAULT_CANDIDATES,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``select_coefficient`` over replica arrays.

    ``m1`` and ``m2`` are the first and second raw moments of the shared
    next-value histogram (see :func:`commcs.distribution.moment_sums`).
    Returns (values, chosen) where ``chosen`` holds NaN for replicas kept
    plain.  Semantically identical to calling the scalar routine per entry.
    """
    v_hat = np.asarray(v_hat, dtype=float)
    q_hat = np.asarray(q_hat, dtype=float)
    sigma2 = v_hat * (1.0 - v_hat)
    plain = sigma2 / trials
    e_bern = m1 - m2
    v_var = m2 - 2.0 * v_hat * m1 + v_hat * v_hat
    values = v_hat.copy()
    chosen = np.full(v_hat.shape, np.nan)
    open_mask = np.ones(v_hat.shape, dtype=bool)
    for c in candidates:
        cv = c * c * sigma2 / trials + (1.0 - c) ** 2 * (e_bern / trials + v_var)
        hit = open_mask & (cv < plain)
        values[hit] = c * v_hat[hit] + (1.0 - c) * q_hat[hit]
        chosen[hit] = c
        open_mask &= ~hit
    return values, chosen


def refine_annotations(
    annotations,
    predictions,
    trials: int,
    candidates: CoefficientCandidates = DEFAULT_CANDIDATES,
):
    """Apply coefficient selection across annotated trajectories.

    ``predictions`` mirrors ``annotations``: one next-value histogram per
    step (entries for terminal steps are ignored and may be None).
    Terminal steps pass through unchanged since their value is exact.
    Non-terminal steps missing a next-step estimate are kept plain and
    reported in the error list as (trajectory_index, step_index, message).
    """
    refined: list[list[RefinedLabel]] = []
    errors: list[tuple[int, int, str]] = []
    for t_idx, (ann, preds) in enumerate(zip(annotations, predictions)):
        labels: list[RefinedLabel] = []
        for s_idx, step in enumerate(ann.steps):
            if step.is_terminal:
                labels.append(
                    RefinedLabel(step.v_hat, None, 0.0, None)
                )
                continue
            if step.q_hat is None:
                errors.append((t_idx, s_idx, "missing next-step estimate"))
                plain = step.v_hat * (1.0 - step.v_hat) / trials
                labels.append(RefinedLabel(step.v_hat, None, plain, None))
                continue
            labels.append(
                select_coefficient(step.v_hat, step.q_hat, preds[s_idx], trials, candidates)
            )
        refined.append(labels)
    return refined, errors
