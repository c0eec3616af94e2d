"""Synthetic tree MDPs with known ground truth.

Trees have deterministic transitions, a stochastic policy over children,
binary rewards at the leaves only, and discount 1, so every state value is
a success probability and can be computed exactly by backward induction.
The generator stands in for an LLM policy at desk scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distribution import CategoricalValueDistribution, exact_dv1_from_children

__all__ = [
    "MdpState",
    "SyntheticMdp",
    "GeneratorConfig",
    "TrajectoryAnnotation",
    "StepAnnotation",
    "MdpSizeError",
    "generate",
    "exact_values",
    "rollout",
    "sample_path",
    "annotate_trajectory",
    "exact_dv1",
    "descendant_distribution",
    "mdp_to_json",
    "mdp_from_json",
]

_PROB_TOL = 1e-12
MDP_JSON_VERSION = 1


class MdpSizeError(RuntimeError):
    """Raised when generation would exceed the configured state cap."""


@dataclass(frozen=True)
class MdpState:
    """A tree node: terminal with a reward bit, or a policy over children."""

    children: tuple[int, ...] = ()
    probs: tuple[float, ...] = ()
    reward: Optional[int] = None

    @property
    def is_terminal(self) -> bool:
        return self.reward is not None

    def __post_init__(self) -> None:
        if self.is_terminal:
            if self.children:
                raise ValueError("terminal states have no children")
            if self.reward not in (0, 1):
                raise ValueError(f"terminal reward must be 0 or 1, got {self.reward}")
        else:
            if not self.children:
                raise ValueError("nonterminal states need at least one child")
            if len(self.probs) != len(self.children):
                raise ValueError("policy probabilities must match children")
            if abs(sum(self.probs) - 1.0) > _PROB_TOL:
                raise ValueError(f"policy must sum to 1, got {sum(self.probs)!r}")
            if any(p < 0.0 for p in self.probs):
                raise ValueError("policy probabilities must be nonnegative")


@dataclass(frozen=True)
class SyntheticMdp:
    states: tuple[MdpState, ...]
    root: int = 0
    depth: int = 0

    def __post_init__(self) -> None:
        seen = set()
        for state in self.states:
            for child in state.children:
                if not 0 <= child < len(self.states):
                    raise ValueError(f"child id {child} out of range")
                if child in seen:
                    raise ValueError(f"state {child} has multiple parents")
                seen.add(child)
        if self.root in seen:
            raise ValueError("root must not have a parent")

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for tree generation.

    ``value_shape`` controls whether sibling subtrees share a success
    tendency ("smoothed", giving unimodal next-value distributions) or
    draw leaf rewards independently ("independent", an adversarial regime
    for the spread ablation).
    """

    branching: tuple[int, int] = (2, 6)
    depth: int = 5
    policy_concentration: float = 1.0
    terminal_success_rate: float = 0.5
    value_shape: str = "smoothed"
    seed: int = 0
    smoothing_jitter: float = 0.15
    max_states: int = 10**6

    def __post_init__(self) -> None:
        lo, hi = self.branching
        if lo < 1 or hi < lo:
            raise ValueError(f"invalid branching range {self.branching}")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.policy_concentration <= 0.0:
            raise ValueError("policy_concentration must be positive")
        if not 0.0 <= self.terminal_success_rate <= 1.0:
            raise ValueError("terminal_success_rate must lie in [0, 1]")
        if self.value_shape not in ("smoothed", "independent"):
            raise ValueError(f"unknown value_shape {self.value_shape!r}")


@dataclass(frozen=True)
class StepAnnotation:
    state_id: int
    v_hat: float
    q_hat: Optional[float]
    trials: int
    is_terminal: bool


@dataclass(frozen=True)
class TrajectoryAnnotation:
    problem_id: str
    trajectory_id: str
    path: tuple[int, ...]
    steps: tuple[StepAnnotation, ...]
    outcome: int


def generate(config: GeneratorConfig) -> SyntheticMdp:
    """Build a full-depth tree; deterministic for a given config seed."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    lo, hi = config.branching
    states: list[Optional[MdpState]] = [None]
    # queue entries: (state index, depth, success tendency)
    queue: list[tuple[int, int, float]] = [(0, 0, config.terminal_success_rate)]
    while queue:
        idx, depth, tendency = queue.pop(0)
        if depth == config.depth:
            if config.value_shape == "smoothed":
                reward = int(rng.random() < tendency)
            else:
                reward = int(rng.random() < config.terminal_success_rate)
            states[idx] = MdpState(reward=reward)
            continue
        k = int(rng.integers(lo, hi + 1))
        probs = rng.dirichlet(np.full(k, config.policy_concentration))
        child_ids = []
        for _ in range(k):
            if len(states) >= config.max_states:
                raise MdpSizeError(
                    f"tree would exceed the {config.max_states}-state cap"
                )
            child_ids.append(len(states))
            states.append(None)
        states[idx] = MdpState(children=tuple(child_ids), probs=tuple(probs))
        for child in child_ids:
            child_tendency = float(
                np.clip(
                    tendency + rng.uniform(-config.smoothing_jitter, config.smoothing_jitter),
                    0.02,
                    0.98,
                )
            )
            queue.append((child, depth + 1, child_tendency))
    return SyntheticMdp(states=tuple(states), root=0, depth=config.depth)


def exact_values(mdp: SyntheticMdp) -> np.ndarray:
    """Backward-induction state values.

    Children always carry larger ids than their parent (BFS construction),
    so a single reverse pass suffices.
    """
    values = np.empty(len(mdp))
    for idx in range(len(mdp) - 1, -1, -1):
        state = mdp.states[idx]
        if state.is_terminal:
            values[idx] = float(state.reward)
        else:
            values[idx] = float(
                np.dot(state.probs, values[list(state.children)])
            )
    # expectations of {0, 1} rewards: clamp rounding drift off the ends
    np.clip(values, 0.0, 1.0, out=values)
    return values


def rollout(mdp: SyntheticMdp, state_id: int, rng: np.random.Generator) -> int:
    """Follow the policy from ``state_id`` to a terminal; return its reward bit."""
    state = mdp.states[state_id]
    while not state.is_terminal:
        pick = rng.choice(len(state.children), p=state.probs)
        state = mdp.states[state.children[pick]]
    return state.reward


def sample_path(
    mdp: SyntheticMdp, rng: np.random.Generator, start: Optional[int] = None
) -> tuple[int, ...]:
    """Sample a root-to-terminal path under the policy."""
    idx = mdp.root if start is None else start
    path = [idx]
    state = mdp.states[idx]
    while not state.is_terminal:
        pick = rng.choice(len(state.children), p=state.probs)
        idx = state.children[pick]
        path.append(idx)
        state = mdp.states[idx]
    return tuple(path)


def annotate_trajectory(
    mdp: SyntheticMdp,
    path: tuple[int, ...],
    trials: int,
    rng: np.random.Generator,
    problem_id: str = "0",
    trajectory_id: str = "0",
    independent_qhat: bool = False,
) -> TrajectoryAnnotation:
    """MC-annotate every step of a root-to-terminal path.

    Each non-terminal state gets one batch of ``trials`` rollouts; that
    batch serves both as its own v_hat and as the previous step's q_hat,
    mirroring how each partial solution is annotated once.  With
    ``independent_qhat`` the q_hat estimates come from fresh batches, which
    the covariance experiments need.
    """
    if not mdp.states[path[-1]].is_terminal:
        raise ValueError("path must end at a terminal state")
    v_hats: list[float] = []
    for sid in path:
        state = mdp.states[sid]
        if state.is_terminal:
            v_hats.append(float(state.reward))
        else:
            successes = sum(rollout(mdp, sid, rng) for _ in range(trials))
            v_hats.append(successes / trials)
    steps: list[StepAnnotation] = []
    for t, sid in enumerate(path):
        terminal = mdp.states[sid].is_terminal
        if terminal:
            q_hat: Optional[float] = None
        elif independent_qhat:
            nxt = path[t + 1]
            if mdp.states[nxt].is_terminal:
                q_hat = float(mdp.states[nxt].reward)
            else:
                q_hat = sum(rollout(mdp, nxt, rng) for _ in range(trials)) / trials
        else:
            q_hat = v_hats[t + 1]
        steps.append(
            StepAnnotation(
                state_id=sid,
                v_hat=v_hats[t],
                q_hat=q_hat,
                trials=trials,
                is_terminal=terminal,
            )
        )
    return TrajectoryAnnotation(
        problem_id=problem_id,
        trajectory_id=trajectory_id,
        path=tuple(path),
        steps=tuple(steps),
        outcome=int(mdp.states[path[-1]].reward),
    )


def exact_dv1(
    mdp: SyntheticMdp, state_id: int, num_bins: int, values: Optional[np.ndarray] = None
) -> CategoricalValueDistribution:
    """Exact next-value histogram of a nonterminal state."""
    state = mdp.states[state_id]
    if state.is_terminal:
        raise ValueError(f"state {state_id} is terminal and has no next value")
    if values is None:
        values = exact_values(mdp)
    return exact_dv1_from_children(
        [values[c] for c in state.children], list(state.probs), num_bins
    )


def descendant_distribution(
    mdp: SyntheticMdp, state_id: int, steps: int
) -> tuple[np.ndarray, np.ndarray]:
    """State ids reachable in exactly ``steps`` policy steps, with probabilities."""
    dist = {state_id: 1.0}
    for _ in range(steps):
        nxt: dict[int, float] = {}
        for sid, prob in dist.items():
            state = mdp.states[sid]
            if state.is_terminal:
                raise ValueError("descendant horizon passes a terminal state")
            for child, p in zip(state.children, state.probs):
                nxt[child] = nxt.get(child, 0.0) + prob * p
        dist = nxt
    ids = np.array(sorted(dist), dtype=int)
    probs = np.array([dist[i] for i in ids])
    return ids, probs


def mdp_to_json(mdp: SyntheticMdp) -> str:
    """Versioned, deterministic JSON serialization."""
    payload = {
        "version": MDP_JSON_VERSION,
        "root": mdp.root,
        "depth": mdp.depth,
        "states": [
            {"reward": s.reward}
            if s.is_terminal
            else {"children": list(s.children), "probs": list(s.probs)}
            for s in mdp.states
        ],
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def mdp_from_json(text: str) -> SyntheticMdp:
    payload = json.loads(text)
    if payload.get("version") != MDP_JSON_VERSION:
        raise ValueError(f"unsupported MDP document version {payload.get('version')!r}")
    states = []
    for entry in payload["states"]:
        if "reward" in entry:
            states.append(MdpState(reward=entry["reward"]))
        else:
            states.append(
                MdpState(
                    children=tuple(entry["children"]), probs=tuple(entry["probs"])
                )
            )
    return SyntheticMdp(
        states=tuple(states), root=payload["root"], depth=payload["depth"]
    )
