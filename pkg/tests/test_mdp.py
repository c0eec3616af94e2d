import numpy as np
import pytest

from commcs import (
    GeneratorConfig,
    MdpSizeError,
    MdpState,
    SyntheticMdp,
    annotate_trajectory,
    descendant_distribution,
    derive_rng,
    exact_dv1,
    exact_values,
    expectation,
    generate,
    mdp_from_json,
    mdp_to_json,
    rollout,
    sample_path,
)


def small_config(**overrides):
    base = dict(branching=(2, 3), depth=4, seed=11)
    base.update(overrides)
    return GeneratorConfig(**base)


def brute_force_value(mdp, sid):
    """Path-enumeration oracle: sum over leaves of P(path) * reward."""
    state = mdp.states[sid]
    if state.is_terminal:
        return state.reward
    return sum(
        p * brute_force_value(mdp, child)
        for child, p in zip(state.children, state.probs)
    )


def test_generation_is_deterministic():
    a = generate(small_config())
    b = generate(small_config())
    assert mdp_to_json(a) == mdp_to_json(b)
    assert mdp_to_json(a) != mdp_to_json(generate(small_config(seed=12)))


def test_state_validation():
    with pytest.raises(ValueError):
        MdpState(children=(1,), probs=(0.5,), reward=None)  # probs don't sum to 1
    with pytest.raises(ValueError):
        MdpState(children=(), probs=(), reward=None)  # neither terminal nor branching
    with pytest.raises(ValueError):
        MdpState(children=(1,), probs=(1.0,), reward=1.0)  # both


def test_size_cap():
    with pytest.raises(MdpSizeError):
        generate(GeneratorConfig(branching=(6, 6), depth=10, max_states=1000, seed=0))


def test_all_leaves_at_full_depth():
    mdp = generate(small_config())
    depths = np.zeros(len(mdp), dtype=int)
    for idx, state in enumerate(mdp.states):
        for child in state.children:
            depths[child] = depths[idx] + 1
        if state.is_terminal:
            assert depths[idx] == mdp.depth
            assert state.reward in (0.0, 1.0)


def test_exact_values_match_path_enumeration():
    mdp = generate(small_config())
    values = exact_values(mdp)
    for sid in range(len(mdp)):
        assert values[sid] == pytest.approx(brute_force_value(mdp, sid), abs=1e-12)


def test_rollout_and_sample_path():
    mdp = generate(small_config())
    rng = derive_rng(3)
    assert rollout(mdp, 0, rng) in (0.0, 1.0)
    path = sample_path(mdp, rng)
    assert path[0] == mdp.root
    assert mdp.states[path[-1]].is_terminal
    for a, b in zip(path, path[1:]):
        assert b in mdp.states[a].children


def test_annotation_shares_next_step_batch():
    mdp = generate(small_config())
    rng = derive_rng(4)
    path = sample_path(mdp, derive_rng(5))
    ann = annotate_trajectory(mdp, path, 8, rng, "p0", "t0")
    assert ann.path == tuple(path)
    for step, nxt in zip(ann.steps, ann.steps[1:]):
        assert step.q_hat == nxt.v_hat  # shared rollout batch
    last = ann.steps[-1]
    assert last.is_terminal and last.q_hat is None
    assert ann.outcome == last.v_hat


def test_annotation_is_deterministic():
    mdp = generate(small_config())
    path = sample_path(mdp, derive_rng(5))
    a = annotate_trajectory(mdp, path, 8, derive_rng(6), "p0", "t0")
    b = annotate_trajectory(mdp, path, 8, derive_rng(6), "p0", "t0")
    assert a == b


def test_exact_dv1_expectation_within_half_spacing():
    mdp = generate(small_config())
    values = exact_values(mdp)
    xi = 1.0 / 8.0
    for sid, state in enumerate(mdp.states):
        if state.is_terminal:
            continue
        dv1 = exact_dv1(mdp, sid, 9, values=values)
        assert abs(expectation(dv1) - values[sid]) <= xi / 2.0 + 1e-12


def test_descendant_distribution():
    mdp = generate(small_config())
    values = exact_values(mdp)
    ids, probs = descendant_distribution(mdp, 0, 2)
    assert probs.sum() == pytest.approx(1.0)
    # the exact value is the expectation over any downstream slice
    assert float(probs @ values[ids]) == pytest.approx(float(values[0]), abs=1e-12)


def test_json_roundtrip():
    mdp = generate(small_config())
    clone = mdp_from_json(mdp_to_json(mdp))
    assert mdp_to_json(clone) == mdp_to_json(mdp)
    assert clone.depth == mdp.depth
    with pytest.raises(ValueError):
        mdp_from_json("{\"version\":99}")
