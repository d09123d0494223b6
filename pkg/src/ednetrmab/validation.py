"""Input validation helpers shared by the estimators and the simulator."""

from __future__ import annotations

import numbers

import numpy as np

PASSIVE = 0
SEMI_ACTIVE = 1
ACTIVE = 2
N_ACTIONS = 3
N_STATES = 2

RNG_FAMILY = "numpy.random.Philox (counter-based, 4x64)"


class DomainError(ValueError):
    """Raised for out-of-range indices, malformed vectors or invalid parameters."""


def make_rng(seed=None) -> np.random.Generator:
    """Return a Philox-backed generator.

    Accepts None, an int, a ``SeedSequence`` or an existing ``Generator``
    (returned unchanged), in the spirit of ``sklearn.utils.check_random_state``.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    if seed is None or isinstance(seed, numbers.Integral):
        return np.random.Generator(np.random.Philox(seed))
    raise DomainError(f"cannot build a random generator from {seed!r}")


def check_arm(arm, n_arms: int) -> int:
    if not isinstance(arm, numbers.Integral) or isinstance(arm, bool):
        raise DomainError(f"arm index must be an integer, got {arm!r}")
    if not 0 <= arm < n_arms:
        raise DomainError(f"arm index {arm} out of range for {n_arms} arms")
    return int(arm)


def check_arms(arms, n_arms: int) -> np.ndarray:
    """Validate a collection of distinct pulled-arm indices."""
    arr = np.asarray(list(arms) if isinstance(arms, (set, frozenset)) else arms)
    arr = np.atleast_1d(arr)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("at least one arm must be pulled")
    if not np.issubdtype(arr.dtype, np.integer):
        raise DomainError(f"arm indices must be integers, got dtype {arr.dtype}")
    if arr.min() < 0 or arr.max() >= n_arms:
        raise DomainError(f"arm indices {arr.tolist()} out of range for {n_arms} arms")
    if np.unique(arr).size != arr.size:
        raise DomainError(f"duplicate arm indices in {arr.tolist()}")
    return np.sort(arr.astype(np.intp))


def check_state(state, n_arms: int) -> np.ndarray:
    arr = np.asarray(state)
    if arr.shape != (n_arms,):
        raise DomainError(f"state must have shape ({n_arms},), got {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise DomainError("state entries must be 0 or 1")
    return arr.astype(np.int8)


def check_action(action, n_arms: int) -> np.ndarray:
    arr = np.asarray(action)
    if arr.shape != (n_arms,):
        raise DomainError(f"action must have shape ({n_arms},), got {arr.shape}")
    if not np.all((arr == PASSIVE) | (arr == SEMI_ACTIVE) | (arr == ACTIVE)):
        raise DomainError("action entries must be 0, 1 or 2")
    return arr.astype(np.int8)


def check_q_table(q, n_arms: int | None = None, n_actions: int = N_ACTIONS) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim != 3 or q.shape[1:] != (N_STATES, n_actions):
        raise DomainError(f"Q-table must have shape (N, 2, {n_actions}), got {q.shape}")
    if n_arms is not None and q.shape[0] != n_arms:
        raise DomainError(f"Q-table covers {q.shape[0]} arms, expected {n_arms}")
    if not np.all(np.isfinite(q)):
        raise DomainError("Q-table contains non-finite entries")
    return q
