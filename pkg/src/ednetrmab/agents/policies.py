"""Teacher policies as scikit-learn style estimators.

Every policy is fitted to a :class:`~ednetrmab.model.StudentModel` and then
driven step by step::

    policy = EduQate(random_state=0).fit(model)
    arms = policy.select(state)
    ...
    policy.partial_fit(state, action, reward, next_state)

Learning policies only read ``model.network`` during ``fit``; the oracle
baselines (Threshold Whittle, Myopic) also read the transition tensors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..model import StudentModel
from ..validation import ACTIVE, PASSIVE, DomainError, check_state, make_rng
from .indices import (
    apply_updates,
    epsilon,
    greedy_from_gains,
    greedy_select_k,
    threshold_whittle_indices,
    whittle_estimates,
    _argmax_ties,
)
from .replay import ReplayBuffer


@dataclass(frozen=True)
class LearnerConfig:
    alpha: float = 0.1
    gamma: float = 0.95
    use_replay: bool = True
    buffer_size: int = 10_000
    batch_size: int = 64

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise DomainError("alpha must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise DomainError("gamma must lie in [0, 1)")
        if self.buffer_size < 1 or self.batch_size < 1:
            raise DomainError("buffer and batch sizes must be positive")


def learn_from_batch(q, buffer: ReplayBuffer, config: LearnerConfig, rng):
    """Replay ``config.batch_size`` stored transitions into every arm's table.

    Each arm is credited with its own next state as reward.
    """
    states, actions, _, next_states = buffer.sample(config.batch_size, rng)
    return apply_updates(q, states, actions, next_states.astype(float), next_states, config.alpha, config.gamma)


class TeacherPolicy(BaseEstimator):
    """Common plumbing: fitting to a model, RNG handling, k-arm selection."""

    def fit(self, model: StudentModel, y=None):
        if not isinstance(model, StudentModel):
            raise DomainError("policies are fitted to a StudentModel")
        if not 1 <= self.k <= model.n_arms:
            raise DomainError(f"k={self.k} must lie in 1..{model.n_arms}")
        self.n_arms_ = model.n_arms
        self.network_ = model.network
        self.rng_ = make_rng(getattr(self, "random_state", None))
        self._fit(model)
        return self

    def _fit(self, model):
        pass

    def _check_fitted(self):
        if not hasattr(self, "n_arms_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")

    def select(self, state) -> np.ndarray:
        """Arms to pull in ``state`` (sorted array of ``k`` indices)."""
        self._check_fitted()
        return self._select(check_state(state, self.n_arms_))

    def predict(self, state) -> np.ndarray:
        """Exploitation-only choice; identical to ``select`` for non-learning policies."""
        return self.select(state)

    def partial_fit(self, state, action, reward, next_state):
        return self

    def _random_arms(self) -> np.ndarray:
        if self.k == 1:
            return np.array([self.rng_.integers(self.n_arms_)], dtype=np.intp)
        return np.sort(self.rng_.choice(self.n_arms_, size=self.k, replace=False)).astype(np.intp)


class RandomPolicy(TeacherPolicy):
    def __init__(self, k=1, random_state=None):
        self.k = k
        self.random_state = random_state

    def _select(self, state):
        return self._random_arms()


class EduQate(TeacherPolicy):
    """Network-aware Whittle-index Q-learning with experience replay.

    Each arm keeps a 2x3 table over (state, action) with the semi-active
    pseudo-action as the middle column. Selection is epsilon-greedy over
    :func:`whittle_estimates` with epsilon decaying as ``N / (N + t)`` in the
    global step count; replay draws ``batch_size`` transitions (with
    replacement) per step. ``use_replay=False`` gives the ablation that
    learns from the latest transition only.
    """

    def __init__(self, k=1, alpha=0.1, gamma=0.95, use_replay=True, buffer_size=10_000,
                 batch_size=64, random_state=None):
        self.k = k
        self.alpha = alpha
        self.gamma = gamma
        self.use_replay = use_replay
        self.buffer_size = buffer_size
        self.batch_size = batch_size
        self.random_state = random_state

    @property
    def config(self) -> LearnerConfig:
        return LearnerConfig(self.alpha, self.gamma, self.use_replay, self.buffer_size, self.batch_size)

    def _fit(self, model):
        self.config_ = self.config
        self.q_ = np.zeros((self.n_arms_, 2, 3))
        self.global_step_ = 0
        self.buffer_ = ReplayBuffer(self.buffer_size, self.n_arms_) if self.use_replay else None

    def indices(self, state) -> np.ndarray:
        self._check_fitted()
        return whittle_estimates(self.q_, check_state(state, self.n_arms_), self.network_)

    def _exploit(self, state):
        if self.k == 1:
            lam = whittle_estimates(self.q_, state, self.network_)
            return np.array([_argmax_ties(lam, self.rng_)], dtype=np.intp)
        return greedy_select_k(self.q_, state, self.network_, self.k, self.rng_)

    def _select(self, state):
        if self.rng_.random() < epsilon(self.n_arms_, self.global_step_):
            return self._random_arms()
        return self._exploit(state)

    def predict(self, state):
        self._check_fitted()
        return self._exploit(check_state(state, self.n_arms_))

    def partial_fit(self, state, action, reward, next_state):
        self._check_fitted()
        if self.use_replay:
            self.buffer_.add(state, action, reward, next_state)
            learn_from_batch(self.q_, self.buffer_, self.config_, self.rng_)
        else:
            next_state = np.asarray(next_state)
            apply_updates(self.q_, [state], [action], [next_state.astype(float)], [next_state],
                          self.alpha, self.gamma)
        self.global_step_ += 1
        return self

    # The replay buffer is not part of a checkpoint.
    def checkpoint(self) -> dict:
        self._check_fitted()
        return {
            "n_arms": self.n_arms_,
            "q": self.q_.tolist(),
            "global_step": int(self.global_step_),
            "config": {"alpha": self.alpha, "gamma": self.gamma, "use_replay": bool(self.use_replay)},
        }

    def save_checkpoint(self, path) -> None:
        Path(path).write_text(json.dumps(self.checkpoint(), indent=1), encoding="utf-8")

    def restore(self, data: dict):
        """Load Q-values and step count from a checkpoint into a fitted policy."""
        self._check_fitted()
        try:
            q = np.array(data["q"], dtype=float)
            n_arms, step = int(data["n_arms"]), int(data["global_step"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed checkpoint: {exc}") from exc
        if n_arms != self.n_arms_ or q.shape != (n_arms, 2, 3):
            raise DomainError(f"checkpoint is for {n_arms} arms, policy has {self.n_arms_}")
        if not np.all(np.isfinite(q)) or step < 0:
            raise DomainError("checkpoint holds non-finite Q-values or a negative step")
        self.q_ = np.ascontiguousarray(q)
        self.global_step_ = step
        return self

    def load_checkpoint(self, path):
        return self.restore(json.loads(Path(path).read_text(encoding="utf-8")))


class WIQL(TeacherPolicy):
    """Whittle-index Q-learning over pull/rest only.

    The pulled arm's transition is recorded as active and every other arm's
    as passive, including neighbours that were in fact semi-active.
    """

    def __init__(self, k=1, alpha=0.1, gamma=0.95, random_state=None):
        self.k = k
        self.alpha = alpha
        self.gamma = gamma
        self.random_state = random_state

    def _fit(self, model):
        self.q_ = np.zeros((self.n_arms_, 2, 2))
        self.global_step_ = 0

    def indices(self, state) -> np.ndarray:
        self._check_fitted()
        state = check_state(state, self.n_arms_)
        arms = np.arange(self.n_arms_)
        return self.q_[arms, state, 1] - self.q_[arms, state, 0]

    def _exploit(self, state):
        lam = self.indices(state)
        if self.k == 1:
            return np.array([_argmax_ties(lam, self.rng_)], dtype=np.intp)
        order = np.lexsort((self.rng_.random(self.n_arms_), -lam))
        return np.sort(order[: self.k]).astype(np.intp)

    def _select(self, state):
        if self.rng_.random() < epsilon(self.n_arms_, self.global_step_):
            return self._random_arms()
        return self._exploit(state)

    def predict(self, state):
        self._check_fitted()
        return self._exploit(check_state(state, self.n_arms_))

    def partial_fit(self, state, action, reward, next_state):
        self._check_fitted()
        logged = (np.asarray(action) == ACTIVE).astype(np.int8)
        next_state = np.asarray(next_state)
        apply_updates(self.q_, [state], [logged], [next_state.astype(float)], [next_state],
                      self.alpha, self.gamma)
        self.global_step_ += 1
        return self


class ThresholdWhittle(TeacherPolicy):
    """Pulls the arms with the largest Whittle index under the known dynamics.

    Semi-active effects are ignored; ties go to the lowest arm index.
    """

    def __init__(self, k=1, gamma=0.95):
        self.k = k
        self.gamma = gamma

    def _fit(self, model):
        self.index_ = threshold_whittle_indices(model.transitions, self.gamma)

    def _select(self, state):
        idx = self.index_[np.arange(self.n_arms_), state]
        return np.sort(np.argsort(-idx, kind="stable")[: self.k]).astype(np.intp)


class Myopic(TeacherPolicy):
    """Maximises the expected number of learned arms after one step.

    Has oracle access to the model, including semi-active propagation. Ties
    go to the lowest arm index.
    """

    def __init__(self, k=1):
        self.k = k

    def _fit(self, model):
        self.learn_prob_ = model.learn_prob

    def expected_gains(self, state):
        arms = np.arange(self.n_arms_)
        lp = self.learn_prob_[arms, :, state]
        return lp[:, ACTIVE] - lp[:, PASSIVE], lp[:, 1] - lp[:, PASSIVE]

    def _select(self, state):
        active_gain, semi_gain = self.expected_gains(state)
        return greedy_from_gains(active_gain, semi_gain, self.network_, self.k)


POLICIES = {
    "eduqate": EduQate,
    "eduqate-minus": EduQate,
    "wiql": WIQL,
    "tw": ThresholdWhittle,
    "myopic": Myopic,
    "random": RandomPolicy,
}


def make_policy(name: str, k: int = 1, learner: LearnerConfig | None = None, random_state=None) -> TeacherPolicy:
    """Instantiate a policy by its command-line name."""
    learner = learner or LearnerConfig()
    if name not in POLICIES:
        raise DomainError(f"unknown policy {name!r}; choose from {', '.join(POLICIES)}")
    if name in ("eduqate", "eduqate-minus"):
        return EduQate(k=k, alpha=learner.alpha, gamma=learner.gamma,
                       use_replay=(name == "eduqate"), buffer_size=learner.buffer_size,
                       batch_size=learner.batch_size, random_state=random_state)
    if name == "wiql":
        return WIQL(k=k, alpha=learner.alpha, gamma=learner.gamma, random_state=random_state)
    if name == "tw":
        return ThresholdWhittle(k=k, gamma=learner.gamma)
    if name == "myopic":
        return Myopic(k=k)
    return RandomPolicy(k=k, random_state=random_state)
