import numpy as np
import pytest

from commcs import (
    CoefficientCandidates,
    ConfigError,
    GeneratorConfig,
    RefinedLabel,
    TabularVerifier,
    TrainConfig,
    build_target,
    score_trajectory,
    state_key,
    train,
)
from commcs.harness import make_benchmark, make_problems


@pytest.fixture(scope="module")
def benchmark():
    problems, values = make_problems(
        3, GeneratorConfig(branching=(2, 2), depth=3, seed=2), seed=8
    )
    return make_benchmark(problems, values, 4, 8, seed=8)


def config(**overrides):
    base = dict(epochs=3, warmup_epochs=1, seed=8)
    base.update(overrides)
    return TrainConfig(**base)


def test_state_key_format():
    assert state_key("p0001", 17) == "p0001/17"


def test_unseen_state_predicts_uniform_prior():
    verifier = TabularVerifier("categorical", 9)
    dist = verifier.predict("nowhere/0")
    assert np.allclose(dist.probabilities, 1.0 / 9.0)
    assert verifier.value("nowhere/0") == pytest.approx(0.5)


def test_loss_head_compatibility():
    with pytest.raises(ConfigError):
        train(TabularVerifier("binary"), [], config(loss="ce"))
    with pytest.raises(ConfigError):
        train(TabularVerifier("categorical"), [], config(loss="bce"))
    with pytest.raises(ConfigError):
        train(TabularVerifier("categorical"), [], config(loss="mse"))


def test_training_reduces_loss(benchmark):
    verifier = TabularVerifier("categorical", 9)
    report = train(verifier, benchmark.annotations, config(epochs=4))
    assert report.epoch_losses[-1] < report.epoch_losses[0]


def test_warmup_epochs_do_not_refine(benchmark):
    verifier = TabularVerifier("categorical", 9)
    report = train(
        verifier,
        benchmark.annotations,
        config(commcs_enabled=True, warmup_epochs=1),
    )
    assert report.refinement_rates[0] == 0.0
    assert report.refinement_rates[-1] > 0.0
    assert sum(report.coefficient_counts.values()) > 0


def test_unit_candidate_equals_refinement_off(benchmark):
    # c = 1 never passes the strict variance test, so enabling refinement
    # with candidates {1.0} must reproduce the plain run bit for bit
    base = TabularVerifier("categorical", 9)
    train(base, benchmark.annotations, config(commcs_enabled=False))
    unit = TabularVerifier("categorical", 9)
    train(
        unit,
        benchmark.annotations,
        config(commcs_enabled=True, candidates=CoefficientCandidates((1.0,))),
    )
    assert unit.to_json() == base.to_json()


def test_online_and_epoch_modes_both_train(benchmark):
    for mode in ("online", "epoch"):
        verifier = TabularVerifier("categorical", 9)
        report = train(
            verifier,
            benchmark.annotations,
            config(commcs_enabled=True, loop_mode=mode),
        )
        assert len(report.epoch_losses) == 3


def test_binary_and_scalar_heads_train(benchmark):
    for head, loss in (("binary", "bce"), ("scalar", "mse")):
        verifier = TabularVerifier(head)
        report = train(verifier, benchmark.annotations, config(loss=loss))
        assert report.epoch_losses[-1] < report.epoch_losses[0]
        key = state_key(benchmark.annotations[0].problem_id, 0)
        assert 0.0 <= verifier.value(key) <= 1.0


def test_build_target_centers_on_refined_value():
    label = RefinedLabel(0.6, None, 0.03, None)
    target = build_target(label, q_hat=0.6, delta_scale=1, num_bins=9)
    # zero gap means zero spread: a point mass at the nearest bin center
    assert target.probabilities.max() == 1.0
    spread = build_target(label, q_hat=0.9, delta_scale=1, num_bins=9)
    assert spread.probabilities.max() < 1.0


def test_verifier_json_roundtrip(benchmark):
    verifier = TabularVerifier("categorical", 9)
    train(verifier, benchmark.annotations, config())
    clone = TabularVerifier.from_json(verifier.to_json())
    assert clone.to_json() == verifier.to_json()
    key = state_key(benchmark.annotations[0].problem_id, 0)
    assert clone.value(key) == verifier.value(key)


def test_score_trajectory_aggregations(benchmark):
    verifier = TabularVerifier("categorical", 9)
    train(verifier, benchmark.annotations, config())
    ann = benchmark.annotations[0]
    final = score_trajectory(verifier, ann.problem_id, ann.path, "final_step")
    low = score_trajectory(verifier, ann.problem_id, ann.path, "min_step")
    assert low <= final + 1e-12
    with pytest.raises(ValueError):
        score_trajectory(verifier, ann.problem_id, ann.path, "mean")
