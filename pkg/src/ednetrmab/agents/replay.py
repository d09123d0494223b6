from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Experience:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """Fixed-capacity FIFO of joint transitions backed by ring arrays."""

    def __init__(self, capacity: int, n_arms: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.n_arms = n_arms
        self.states = np.zeros((capacity, n_arms), dtype=np.int8)
        self.actions = np.zeros((capacity, n_arms), dtype=np.int8)
        self.next_states = np.zeros((capacity, n_arms), dtype=np.int8)
        self.rewards = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, state, action, reward, next_state) -> None:
        i = self._next
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _ordered(self) -> np.ndarray:
        start = self._next - self._size
        return np.arange(start, start + self._size) % self.capacity

    def __getitem__(self, i) -> Experience:
        j = self._ordered()[i]
        return Experience(self.states[j].copy(), self.actions[j].copy(), float(self.rewards[j]), self.next_states[j].copy())

    def sample_indices(self, batch_size: int, rng) -> np.ndarray:
        """Uniform draw of ``batch_size`` slots, with replacement."""
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return self._ordered()[rng.integers(0, self._size, size=batch_size)]

    def sample(self, batch_size: int, rng):
        idx = self.sample_indices(batch_size, rng)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx]
