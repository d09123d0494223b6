"""The networked restless-bandit simulator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GroupNetwork, StudentModel
from .validation import (
    ACTIVE,
    PASSIVE,
    SEMI_ACTIVE,
    DomainError,
    check_action,
    check_arms,
    check_state,
    make_rng,
)


@dataclass(frozen=True)
class EnvConfig:
    horizon: int = 50
    k: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise DomainError("horizon must be at least 1")
        if self.k < 1:
            raise DomainError("k must be at least 1")


@dataclass(frozen=True)
class StepOutcome:
    next_state: np.ndarray
    reward: int
    applied_actions: np.ndarray


def expand_action(network: GroupNetwork, pulled) -> np.ndarray:
    """Joint action for a set of pulled arms.

    Pulled arms get action 2, every other arm sharing a topic with a pulled
    arm gets the semi-active action 1 (once, however many pulled neighbours it
    has), everything else stays passive.
    """
    arms = check_arms(pulled, network.n_arms)
    action = np.full(network.n_arms, PASSIVE, dtype=np.int8)
    action[network.adjacency[arms].any(axis=0)] = SEMI_ACTIVE
    action[arms] = ACTIVE
    return action


def check_joint_action(network: GroupNetwork, action, k: int | None = None) -> np.ndarray:
    action = check_action(action, network.n_arms)
    pulled = np.flatnonzero(action == ACTIVE)
    if k is not None and pulled.size != k:
        raise DomainError(f"expected exactly {k} pulled arms, got {pulled.size}")
    if pulled.size == 0:
        raise DomainError("no arm is pulled")
    reachable = network.adjacency[pulled].any(axis=0)
    stray = np.flatnonzero((action == SEMI_ACTIVE) & ~reachable)
    if stray.size:
        raise DomainError(f"arms {stray.tolist()} are semi-active without a pulled neighbour")
    return action


def step(model: StudentModel, state, action, rng, k: int | None = None) -> StepOutcome:
    """Advance every arm one step.

    Exactly one uniform draw is taken per arm, in ascending arm order.
    """
    state = check_state(state, model.n_arms)
    action = check_joint_action(model.network, action, k)
    return _step_unchecked(model, state, action, rng)


def _step_unchecked(model, state, action, rng) -> StepOutcome:
    arms = np.arange(model.n_arms)
    p_learned = model.learn_prob[arms, action, state]
    draws = rng.random(model.n_arms)
    next_state = (draws < p_learned).astype(np.int8)
    return StepOutcome(next_state, int(next_state.sum()), action)


class EdNetEnv:
    """Stateful wrapper around :func:`step` holding the joint state and RNG."""

    def __init__(self, model: StudentModel, config: EnvConfig | None = None, rng=None):
        self.model = model
        self.config = config or EnvConfig()
        if self.config.k > model.n_arms:
            raise DomainError(f"k={self.config.k} exceeds the number of arms {model.n_arms}")
        self.rng = make_rng(self.config.seed if rng is None else rng)
        self.state = self.reset()
        self.t = 0

    def reset(self) -> np.ndarray:
        self.state = np.zeros(self.model.n_arms, dtype=np.int8)
        self.t = 0
        return self.state.copy()

    def pull(self, arms) -> StepOutcome:
        action = expand_action(self.model.network, arms)
        if int((action == ACTIVE).sum()) != self.config.k:
            raise DomainError(f"expected exactly {self.config.k} pulled arms")
        outcome = _step_unchecked(self.model, self.state, action, self.rng)
        self.state = outcome.next_state
        self.t += 1
        return outcome

    def step(self, action) -> StepOutcome:
        outcome = step(self.model, self.state, action, self.rng, k=self.config.k)
        self.state = outcome.next_state
        self.t += 1
        return outcome
