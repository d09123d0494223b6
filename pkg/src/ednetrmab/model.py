"""Student models: per-arm transition tensors over a topic network."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .validation import N_ACTIONS, N_STATES, DomainError, check_arm

STOCHASTIC_TOL = 1e-9


@dataclass(frozen=True)
class TransitionTensor:
    """Transition probabilities ``p[a, s, s']`` for one arm.

    Only the shape is checked on construction; use :func:`validate` for the
    ordering and stochasticity constraints, so that invalid tensors can still
    be built and reported on.
    """

    p: np.ndarray

    def __post_init__(self):
        arr = np.array(self.p, dtype=np.float64)
        if arr.shape != (N_ACTIONS, N_STATES, N_STATES):
            raise DomainError(f"transition tensor must be 3x2x2, got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    @classmethod
    def from_rows(cls, learn, retain):
        """Build from ``learn[a] = p[a][0][1]`` and ``retain[a] = p[a][1][1]``."""
        learn = np.asarray(learn, dtype=np.float64)
        retain = np.asarray(retain, dtype=np.float64)
        p = np.empty((N_ACTIONS, N_STATES, N_STATES))
        p[:, 0, 1] = learn
        p[:, 0, 0] = 1.0 - learn
        p[:, 1, 1] = retain
        p[:, 1, 0] = 1.0 - retain
        return cls(p)

    @property
    def learn(self) -> np.ndarray:
        return self.p[:, 0, 1]

    @property
    def retain(self) -> np.ndarray:
        return self.p[:, 1, 1]

    def __eq__(self, other):
        return isinstance(other, TransitionTensor) and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash(self.p.tobytes())


@dataclass(frozen=True)
class GroupNetwork:
    """Arm-to-topic memberships. An arm may belong to several topics."""

    n_arms: int
    n_topics: int
    membership: tuple

    def __post_init__(self):
        if self.n_arms < 1 or self.n_topics < 1:
            raise DomainError("a network needs at least one arm and one topic")
        membership = tuple(frozenset(int(t) for t in topics) for topics in self.membership)
        if len(membership) != self.n_arms:
            raise DomainError(
                f"membership lists {len(membership)} arms, expected {self.n_arms}"
            )
        for arm, topics in enumerate(membership):
            if not topics:
                raise DomainError(f"arm {arm} belongs to no topic")
            if min(topics) < 0 or max(topics) >= self.n_topics:
                raise DomainError(f"arm {arm} has a topic outside 0..{self.n_topics - 1}")
        object.__setattr__(self, "membership", membership)

    @classmethod
    def from_groups(cls, groups, n_arms: int | None = None):
        """Build from a list of topic member lists, e.g. ``[[0, 1], [1, 2]]``."""
        groups = [sorted(set(int(a) for a in g)) for g in groups]
        if n_arms is None:
            n_arms = 1 + max(a for g in groups for a in g)
        membership = [set() for _ in range(n_arms)]
        for topic, members in enumerate(groups):
            for arm in members:
                membership[arm].add(topic)
        return cls(n_arms, len(groups), tuple(membership))

    @cached_property
    def groups(self) -> tuple:
        members = [set() for _ in range(self.n_topics)]
        for arm, topics in enumerate(self.membership):
            for t in topics:
                members[t].add(arm)
        return tuple(frozenset(m) for m in members)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Boolean ``(N, N)`` matrix, True where two distinct arms share a topic."""
        incidence = np.zeros((self.n_arms, self.n_topics), dtype=np.int64)
        for arm, topics in enumerate(self.membership):
            incidence[arm, list(topics)] = 1
        adj = (incidence @ incidence.T) > 0
        np.fill_diagonal(adj, False)
        adj.setflags(write=False)
        return adj

    def neighborhood(self, arm) -> frozenset:
        """Arms sharing at least one topic with ``arm``, excluding ``arm`` itself."""
        arm = check_arm(arm, self.n_arms)
        return frozenset(int(j) for j in np.flatnonzero(self.adjacency[arm]))

    def closed_neighborhood(self, arm) -> frozenset:
        return self.neighborhood(arm) | {int(arm)}

    def shared_topics(self, a: int, b: int) -> frozenset:
        return self.membership[a] & self.membership[b]


def neighborhood(network: GroupNetwork, arm) -> frozenset:
    return network.neighborhood(arm)


@dataclass(frozen=True)
class StudentModel:
    network: GroupNetwork
    tensors: tuple

    def __post_init__(self):
        tensors = tuple(
            t if isinstance(t, TransitionTensor) else TransitionTensor(t) for t in self.tensors
        )
        if len(tensors) != self.network.n_arms:
            raise DomainError(
                f"model has {len(tensors)} tensors for {self.network.n_arms} arms"
            )
        object.__setattr__(self, "tensors", tensors)

    @property
    def n_arms(self) -> int:
        return self.network.n_arms

    @cached_property
    def transitions(self) -> np.ndarray:
        """Stacked ``(N, 3, 2, 2)`` array of all tensors (read-only)."""
        arr = np.stack([t.p for t in self.tensors])
        arr.setflags(write=False)
        return arr

    @cached_property
    def learn_prob(self) -> np.ndarray:
        """``(N, 3, 2)`` array of P(s'=1 | a, s)."""
        arr = np.ascontiguousarray(self.transitions[..., 1])
        arr.setflags(write=False)
        return arr

    def to_dict(self) -> dict:
        return {
            "n_arms": self.network.n_arms,
            "n_topics": self.network.n_topics,
            "membership": [sorted(topics) for topics in self.network.membership],
            "tensors": [{"p": t.p.tolist()} for t in self.tensors],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StudentModel":
        try:
            network = GroupNetwork(
                int(data["n_arms"]), int(data["n_topics"]), tuple(data["membership"])
            )
            tensors = tuple(TransitionTensor(entry["p"]) for entry in data["tensors"])
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed student model document: {exc}") from exc
        return cls(network, tensors)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "StudentModel":
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: not a valid model document ({exc})") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class Violation:
    arm: int
    constraint: str
    detail: str

    def __str__(self):
        return f"{self.constraint}, arm {self.arm}, {self.detail}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(str(v) for v in self.violations)


def tensor_violations(tensor: TransitionTensor, arm: int = 0) -> list:
    p = tensor.p
    out = []
    for a in range(N_ACTIONS):
        for s in range(N_STATES):
            if abs(p[a, s].sum() - 1.0) > STOCHASTIC_TOL:
                out.append(Violation(arm, "stochasticity", f"action {a}, state {s}"))
            if not np.all((p[a, s] > 0.0) & (p[a, s] < 1.0)):
                out.append(Violation(arm, "positivity", f"action {a}, state {s}"))
    for a in range(N_ACTIONS):
        if not p[a, 0, 1] < p[a, 1, 1]:
            out.append(Violation(arm, "retention dominance", f"action {a}"))
    for s in range(N_STATES):
        chain = p[:, s, 1]
        if not (chain[0] < chain[1] < chain[2]):
            out.append(Violation(arm, "effort ordering", f"state {s}"))
    return out


def _all_valid(p: np.ndarray) -> bool:
    learn, retain = p[:, :, 0, 1], p[:, :, 1, 1]
    return bool(
        np.all(np.abs(p.sum(axis=-1) - 1.0) <= STOCHASTIC_TOL)
        and np.all((p > 0.0) & (p < 1.0))
        and np.all(learn < retain)
        and np.all(np.diff(learn, axis=1) > 0)
        and np.all(np.diff(retain, axis=1) > 0)
    )


def validate(model: StudentModel) -> ValidationReport:
    """Check every tensor against the positivity, stochasticity and ordering rules."""
    report = ValidationReport()
    if _all_valid(model.transitions):
        return report
    for arm, tensor in enumerate(model.tensors):
        report.violations.extend(tensor_violations(tensor, arm))
    return report
