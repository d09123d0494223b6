"""Index computations on per-arm Q-tables and known transition tensors."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from ..environment import expand_action
from ..model import GroupNetwork, TransitionTensor
from ..validation import (
    ACTIVE,
    PASSIVE,
    SEMI_ACTIVE,
    DomainError,
    check_arm,
    check_q_table,
    check_state,
)


def epsilon(n_arms: int, t: int) -> float:
    """Exploration rate ``N / (N + t)`` after ``t`` global steps."""
    if t < 0:
        raise DomainError("global step must be non-negative")
    return n_arms / (n_arms + t)


def _gains(q, state):
    arms = np.arange(q.shape[0])
    q_s = q[arms, state]
    return q_s[:, ACTIVE] - q_s[:, PASSIVE], q_s[:, SEMI_ACTIVE] - q_s[:, PASSIVE]


def whittle_estimates(q, state, network: GroupNetwork) -> np.ndarray:
    """Network-aware index of every arm at the current joint state.

    Own gain of pulling over staying passive, plus the semi-active gain of
    every neighbour, each read at that neighbour's current state.
    """
    active_gain, semi_gain = _gains(q, state)
    return active_gain + network.adjacency @ semi_gain


def whittle_estimate(q, state, network: GroupNetwork, arm) -> float:
    q = check_q_table(q, network.n_arms)
    state = check_state(state, network.n_arms)
    arm = check_arm(arm, network.n_arms)
    value = q[arm, state[arm], ACTIVE] - q[arm, state[arm], PASSIVE]
    for j in sorted(network.neighborhood(arm)):
        value += q[j, state[j], SEMI_ACTIVE] - q[j, state[j], PASSIVE]
    return float(value)


def joint_q_value(q, state, action) -> float:
    """Decomposed joint value: each arm's Q at its own state and action."""
    arms = np.arange(len(state))
    return float(q[arms, state, action].sum())


def joint_q_decomposition(q, state, network: GroupNetwork, arm) -> float:
    """Joint value of pulling ``arm`` alone, summed arm by arm."""
    q = check_q_table(q, network.n_arms)
    state = check_state(state, network.n_arms)
    arm = check_arm(arm, network.n_arms)
    neighbours = network.neighborhood(arm)
    total = q[arm, state[arm], ACTIVE]
    for j in range(network.n_arms):
        if j == arm:
            continue
        total += q[j, state[j], SEMI_ACTIVE if j in neighbours else PASSIVE]
    return float(total)


def q_update(q, arm: int, s: int, a: int, reward: float, s_next: int, alpha: float, gamma: float) -> float:
    """One tabular Q-learning step on ``q[arm, s, a]`` (in place); returns the new value."""
    target = reward + gamma * q[arm, s_next].max()
    q[arm, s, a] = (1.0 - alpha) * q[arm, s, a] + alpha * target
    return float(q[arm, s, a])


def apply_updates(q, states, actions, rewards, next_states, alpha: float, gamma: float):
    """Sequentially apply a batch of joint transitions to every arm's table.

    ``rewards`` holds per-arm rewards with the same shape as ``states``.
    """
    n_actions = q.shape[2]
    flat = q.reshape(-1)
    if not np.shares_memory(flat, q):
        raise ValueError("Q-table must be contiguous")
    base = np.arange(q.shape[0]) * (2 * n_actions)
    current = base + np.asarray(states, dtype=np.intp) * n_actions + np.asarray(actions, dtype=np.intp)
    nxt = base + np.asarray(next_states, dtype=np.intp) * n_actions
    for cur, row, r in zip(current, nxt, rewards):
        best = flat[row]
        for a in range(1, n_actions):
            best = np.maximum(best, flat[row + a])
        flat[cur] = (1.0 - alpha) * flat[cur] + alpha * (r + gamma * best)
    return q


def _argmax_ties(values, rng=None) -> int:
    best = np.flatnonzero(values == values.max())
    if rng is None or best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])


def greedy_from_gains(active_gain, semi_gain, network: GroupNetwork, k: int, rng=None) -> np.ndarray:
    """Add arms one at a time by marginal gain over the arms already chosen.

    Neighbours already semi-active through an earlier pick, and arms already
    pulled, no longer contribute to later candidates.
    """
    n = network.n_arms
    if not 1 <= k <= n:
        raise DomainError(f"k={k} must lie in 1..{n}")
    adj = network.adjacency
    pulled = np.zeros(n, dtype=bool)
    covered = np.zeros(n, dtype=bool)
    chosen = []
    for _ in range(k):
        fresh = np.where(pulled | covered, 0.0, semi_gain)
        marginal = active_gain - np.where(covered, semi_gain, 0.0) + adj @ fresh
        marginal[pulled] = -np.inf
        arm = _argmax_ties(marginal, rng)
        chosen.append(arm)
        pulled[arm] = True
        covered |= adj[arm]
        covered[pulled] = False
    return np.array(sorted(chosen), dtype=np.intp)


def greedy_select_k(q, state, network: GroupNetwork, k: int, rng=None) -> np.ndarray:
    active_gain, semi_gain = _gains(q, state)
    return greedy_from_gains(active_gain, semi_gain, network, k, rng)


def brute_force_select_k(q, state, network: GroupNetwork, k: int):
    """Exhaustive search over all k-subsets; returns ``(arms, joint value)``."""
    if not 1 <= k <= network.n_arms:
        raise DomainError(f"k={k} must lie in 1..{network.n_arms}")
    best, best_value = None, -np.inf
    for subset in combinations(range(network.n_arms), k):
        value = joint_q_value(q, state, expand_action(network, subset))
        if value > best_value:
            best, best_value = subset, value
    return np.array(best, dtype=np.intp), best_value


# --- Threshold Whittle on the known passive/active dynamics -----------------

VI_TOL = 1e-9
BISECTION_TOL = 1e-6
VI_MAX_ITER = 100_000


def _active_advantage(learn_passive, learn_active, subsidy, gamma):
    """Q(s, pull) - Q(s, rest) for a batch of 2-state arms.

    ``learn_*`` are ``(M, 2)`` arrays of P(s'=1 | s); ``subsidy`` is ``(M,)``.
    Reward is the current state plus the subsidy when resting.
    """
    reward = np.array([0.0, 1.0])
    value = np.zeros_like(learn_passive)
    for _ in range(VI_MAX_ITER):
        gap = value[:, 1] - value[:, 0]
        q_rest = reward + subsidy[:, None] + gamma * (value[:, :1] + learn_passive * gap[:, None])
        q_pull = reward + gamma * (value[:, :1] + learn_active * gap[:, None])
        new = np.maximum(q_rest, q_pull)
        if np.max(np.abs(new - value)) < VI_TOL:
            value = new
            break
        value = new
    else:
        raise RuntimeError("value iteration did not converge")
    gap = value[:, 1] - value[:, 0]
    q_rest = reward + subsidy[:, None] + gamma * (value[:, :1] + learn_passive * gap[:, None])
    q_pull = reward + gamma * (value[:, :1] + learn_active * gap[:, None])
    return q_pull - q_rest


def threshold_whittle_indices(transitions, gamma: float = 0.95, tol: float = BISECTION_TOL) -> np.ndarray:
    """Whittle indices for every arm and state, shape ``(N, 2)``.

    Only the passive and pull actions are considered. For each (arm, state)
    the subsidy for resting is bisected over ``[-1, 1/(1-gamma)]`` until
    pulling and resting are indifferent.
    """
    if not 0 <= gamma < 1:
        raise DomainError("gamma must lie in [0, 1)")
    transitions = np.asarray(transitions, dtype=float)
    learn_passive = transitions[:, PASSIVE, :, 1]
    learn_active = transitions[:, ACTIVE, :, 1]
    n = transitions.shape[0]
    out = np.empty((n, 2))
    for s in (0, 1):
        lo = np.full(n, -1.0)
        hi = np.full(n, 1.0 / (1.0 - gamma))
        while np.max(hi - lo) > tol:
            mid = 0.5 * (lo + hi)
            pull_better = _active_advantage(learn_passive, learn_active, mid, gamma)[:, s] > 0
            lo = np.where(pull_better, mid, lo)
            hi = np.where(pull_better, hi, mid)
        out[:, s] = 0.5 * (lo + hi)
    return out


def threshold_whittle_index(tensor: TransitionTensor, state: int, gamma: float = 0.95) -> float:
    if state not in (0, 1):
        raise DomainError("state must be 0 or 1")
    return float(threshold_whittle_indices(tensor.p[None], gamma)[0, state])
