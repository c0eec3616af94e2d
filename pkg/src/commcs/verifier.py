"""Tabular process verifiers over synthetic-MDP states.

Three head kinds: a categorical head predicting a histogram over value
bins (trained with cross-entropy against projected Gaussian targets), and
binary / scalar baseline heads trained with soft BCE and MSE against the
plain labels.  Parameters are per-state logit vectors keyed by opaque
strings, so label quality is the only variable under test; there is no
generalization across states, and unseen states fall back to a uniform
prior (value 0.5).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .compound import (
    CoefficientCandidates,
    DEFAULT_CANDIDATES,
    RefinedLabel,
    select_coefficient,
)
from .distribution import (
    CategoricalValueDistribution,
    GaussianSpec,
    bin_centers,
    expectation,
    project_gaussian,
)
from .mdp import TrajectoryAnnotation

__all__ = [
    "TabularVerifier",
    "TrainConfig",
    "TrainReport",
    "ConfigError",
    "state_key",
    "build_target",
    "train",
    "score_trajectory",
]

VERIFIER_JSON_VERSION = 1
HEAD_SIZES = {"binary": 2, "scalar": 1}


class ConfigError(ValueError):
    """Incompatible training configuration."""


def state_key(problem_id: str, state_id: int) -> str:
    return f"{problem_id}/{state_id}"


class TabularVerifier:
    """Per-state logit vectors with a fixed head kind."""

    def __init__(self, head_kind: str = "categorical", num_bins: int = 9):
        if head_kind not in ("categorical", "binary", "scalar"):
            raise ValueError(f"unknown head kind {head_kind!r}")
        if num_bins < 2:
            raise ValueError("num_bins must be >= 2")
        self.head_kind = head_kind
        self.num_bins = num_bins
        self.params: dict[str, np.ndarray] = {}

    @property
    def head_size(self) -> int:
        return self.num_bins if self.head_kind == "categorical" else HEAD_SIZES[self.head_kind]

    def logits(self, key: str) -> np.ndarray:
        vec = self.params.get(key)
        if vec is None:
            vec = np.zeros(self.head_size)
            self.params[key] = vec
        return vec

    def predict(self, key: str):
        """Histogram for the categorical head, scalar value otherwise.

        Unknown states yield the uniform prior (zero logits), so prediction
        is total.
        """
        vec = self.params.get(key)
        if vec is None:
            vec = np.zeros(self.head_size)
        if self.head_kind == "categorical":
            return CategoricalValueDistribution(
                bin_centers(self.num_bins), _softmax(vec)
            )
        if self.head_kind == "binary":
            return float(_softmax(vec)[1])
        return float(_sigmoid(vec[0]))

    def value(self, key: str) -> float:
        """Scalar value prediction regardless of head kind."""
        pred = self.predict(key)
        if isinstance(pred, CategoricalValueDistribution):
            return expectation(pred)
        return pred

    def to_json(self) -> str:
        payload = {
            "version": VERIFIER_JSON_VERSION,
            "head_kind": self.head_kind,
            "num_bins": self.num_bins,
            "params": {k: list(v) for k, v in sorted(self.params.items())},
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "TabularVerifier":
        payload = json.loads(text)
        if payload.get("version") != VERIFIER_JSON_VERSION:
            raise ValueError(
                f"unsupported verifier document version {payload.get('version')!r}"
            )
        verifier = cls(payload["head_kind"], payload["num_bins"])
        for key, vec in payload["params"].items():
            verifier.params[key] = np.asarray(vec, dtype=float)
        return verifier


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 3
    loss: str = "ce"
    commcs_enabled: bool = False
    candidates: CoefficientCandidates = DEFAULT_CANDIDATES
    delta_scale: int = 1
    num_bins: int = 9
    loop_mode: str = "online"
    warmup_epochs: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.loss not in ("ce", "bce", "mse"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.loop_mode not in ("online", "epoch"):
            raise ValueError(f"unknown loop_mode {self.loop_mode!r}")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be nonnegative")


@dataclass
class TrainReport:
    epoch_losses: list[float] = field(default_factory=list)
    refinement_rates: list[float] = field(default_factory=list)
    coefficient_counts: dict[float, int] = field(default_factory=dict)
    # (problem_id, trajectory_id, step_index, state_id, is_terminal,
    #  plain, refined, coefficient)
    refined_records: list[tuple] = field(default_factory=list)


def build_target(
    refined: RefinedLabel, q_hat: float, delta_scale: int, num_bins: int
) -> CategoricalValueDistribution:
    """Gaussian training target centered on the (possibly refined) label.

    The spread is the gap between the label and the next-step estimate,
    interpreted as ``delta_scale`` standard deviations; a zero gap yields a
    point-mass target.
    """
    sigma = abs(refined.value - q_hat)
    return project_gaussian(
        GaussianSpec(mu=refined.value, sigma=sigma, delta_scale=delta_scale), num_bins
    )


@dataclass(frozen=True)
class _Sample:
    key: str
    state_id: int
    problem_id: str
    trajectory_id: str
    step_index: int
    v_hat: float
    q_hat: Optional[float]
    trials: int
    is_terminal: bool


def _flatten(dataset: Iterable[TrajectoryAnnotation]) -> list[_Sample]:
    samples = []
    for ann in dataset:
        for idx, step in enumerate(ann.steps):
            samples.append(
                _Sample(
                    key=state_key(ann.problem_id, step.state_id),
                    state_id=step.state_id,
                    problem_id=ann.problem_id,
                    trajectory_id=ann.trajectory_id,
                    step_index=idx,
                    v_hat=step.v_hat,
                    q_hat=step.q_hat,
                    trials=step.trials,
                    is_terminal=step.is_terminal,
                )
            )
    return samples


def _refine_sample(
    verifier: TabularVerifier, sample: _Sample, config: TrainConfig, active: bool
) -> RefinedLabel:
    if sample.is_terminal:
        return RefinedLabel(sample.v_hat, None, 0.0, None)
    plain_var = sample.v_hat * (1.0 - sample.v_hat) / sample.trials
    if not (active and config.commcs_enabled) or sample.q_hat is None:
        return RefinedLabel(sample.v_hat, None, plain_var, None)
    dv1 = verifier.predict(sample.key)
    return select_coefficient(
        sample.v_hat, sample.q_hat, dv1, sample.trials, config.candidates
    )


def _ce_step(verifier, sample, refined, config) -> float:
    q_hat = sample.q_hat if sample.q_hat is not None else refined.value
    target = build_target(refined, q_hat, config.delta_scale, config.num_bins)
    logits = verifier.logits(sample.key)
    probs = _softmax(logits)
    loss = float(-(target.probabilities @ np.log(np.maximum(probs, 1e-300))))
    logits -= config.learning_rate * (probs - target.probabilities)
    return loss


def _bce_step(verifier, sample, refined, config) -> float:
    label = refined.value
    logits = verifier.logits(sample.key)
    probs = _softmax(logits)
    f = probs[1]
    loss = float(
        -label * np.log(max(f, 1e-300)) - (1.0 - label) * np.log(max(1.0 - f, 1e-300))
    )
    target = np.array([1.0 - label, label])
    logits -= config.learning_rate * (probs - target)
    return loss


def _mse_step(verifier, sample, refined, config) -> float:
    label = refined.value
    logits = verifier.logits(sample.key)
    f = _sigmoid(logits[0])
    loss = (f - label) ** 2
    logits[0] -= config.learning_rate * 2.0 * (f - label) * f * (1.0 - f)
    return loss


def train(
    verifier: TabularVerifier,
    dataset: Sequence[TrajectoryAnnotation],
    config: TrainConfig,
) -> TrainReport:
    """Fit the verifier in place; returns the training report.

    CE targets come from the (possibly refined) label.  With the compound
    refinement enabled, each sample's next-value distribution is the
    verifier's *current* prediction for its state: online mode refines at
    the moment of the update, epoch mode refreshes all refinements once at
    the start of each epoch and then updates in a seeded shuffled order.
    Warm-up epochs skip refinement so the first targets are not driven by
    the uniform prior.
    """
    if config.loss == "ce" and verifier.head_kind != "categorical":
        raise ConfigError("ce loss requires a categorical head")
    if config.loss == "bce" and verifier.head_kind != "binary":
        raise ConfigError("bce loss requires a binary head")
    if config.loss == "mse" and verifier.head_kind != "scalar":
        raise ConfigError("mse loss requires a scalar head")
    if not dataset:
        raise ValueError("dataset must be nonempty")

    step_fn = {"ce": _ce_step, "bce": _bce_step, "mse": _mse_step}[config.loss]
    samples = _flatten(dataset)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    report = TrainReport()

    for epoch in range(config.epochs):
        active = epoch >= config.warmup_epochs
        refined_by_index: dict[int, RefinedLabel] = {}
        if config.loop_mode == "epoch":
            order = shuffle_rng.permutation(len(samples))
            for i, sample in enumerate(samples):
                refined_by_index[i] = _refine_sample(verifier, sample, config, active)
        else:
            order = np.arange(len(samples))

        losses = []
        refined_count = 0
        eligible = 0
        coef_counts: dict[float, int] = {}
        records = []
        for i in order:
            sample = samples[int(i)]
            if config.loop_mode == "epoch":
                refined = refined_by_index[int(i)]
            else:
                refined = _refine_sample(verifier, sample, config, active)
            losses.append(step_fn(verifier, sample, refined, config))
            if not sample.is_terminal:
                eligible += 1
                if refined.chosen_coefficient is not None:
                    refined_count += 1
                    coef_counts[refined.chosen_coefficient] = (
                        coef_counts.get(refined.chosen_coefficient, 0) + 1
                    )
            records.append(
                (
                    sample.problem_id,
                    sample.trajectory_id,
                    sample.step_index,
                    sample.state_id,
                    sample.is_terminal,
                    sample.v_hat,
                    refined.value,
                    refined.chosen_coefficient,
                )
            )
        report.epoch_losses.append(float(np.mean(losses)))
        report.refinement_rates.append(refined_count / eligible if eligible else 0.0)
        report.coefficient_counts = coef_counts
        report.refined_records = sorted(records, key=lambda r: (r[0], r[1], r[2]))
    return report


def score_trajectory(
    verifier: TabularVerifier,
    problem_id: str,
    path: Sequence[int],
    aggregation: str = "final_step",
) -> float:
    """Score a root-to-terminal path by its predicted step values."""
    values = [verifier.value(state_key(problem_id, sid)) for sid in path]
    if aggregation == "final_step":
        return values[-1]
    if aggregation == "min_step":
        return min(values)
    raise ValueError(f"unknown aggregation {aggregation!r}")
