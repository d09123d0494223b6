"""Building student models: random synthetic ones and ones fitted from interaction logs.

Log files are plain CSV:

* interactions: ``student_id,item_id,step,correct,proficiency`` (proficiency blank when unknown)
* items: ``item_id,topics,difficulty`` with ``topics`` a ``;``-joined tag list
* similarity (optional): ``item_a,item_b,score`` on a 1..9 Likert scale
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import lsq_linear

from .model import GroupNetwork, StudentModel, TransitionTensor, tensor_violations
from .validation import DomainError, make_rng

MAX_ATTEMPTS = 10_000
PROB_CLIP = 0.99
PROB_FLOOR = 0.005
DEFAULT_SIGMA = 0.8
SIGMA_RANGE = (0.01, 0.99)

# difficulty -> passive forgetting, P(1 -> 0 | rest)
FORGET_BASE = 0.05
FORGET_SLOPE = 0.4
FORGET_NOISE = 0.02
FORGET_RANGE = (0.01, 0.6)


class InsufficientDataError(DomainError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    n_arms: int = 50
    n_topics: int = 20
    extra_membership_prob: float = 0.1
    seed: int | None = None

    def __post_init__(self):
        if self.n_arms < 1:
            raise DomainError("n_arms must be positive")
        if self.n_topics < 1:
            raise DomainError("n_topics must be positive")
        if not 0 <= self.extra_membership_prob < 1:
            raise DomainError("extra_membership_prob must lie in [0, 1)")


def _random_tensor(rng) -> TransitionTensor:
    for _ in range(MAX_ATTEMPTS):
        learn = np.sort(rng.random(3))
        retain = np.sort(rng.random(3))
        if (0.0 < learn[0] < learn[1] < learn[2] and retain[0] < retain[1] < retain[2]
                and np.all(learn < retain)):
            tensor = TransitionTensor.from_rows(learn, retain)
            if not tensor_violations(tensor):
                return tensor
    raise RuntimeError(f"no valid tensor after {MAX_ATTEMPTS} attempts")


def generate_synthetic(spec: SyntheticSpec, rng=None) -> StudentModel:
    """Random topic network plus random constraint-satisfying tensors.

    Each arm gets one uniformly drawn primary topic and joins every other
    topic independently with ``extra_membership_prob``.
    """
    rng = make_rng(spec.seed if rng is None else rng)
    membership = []
    for _ in range(spec.n_arms):
        primary = int(rng.integers(spec.n_topics))
        extra = rng.random(spec.n_topics) < spec.extra_membership_prob
        extra[primary] = True
        membership.append(frozenset(int(t) for t in np.flatnonzero(extra)))
    network = GroupNetwork(spec.n_arms, spec.n_topics, tuple(membership))
    tensors = tuple(_random_tensor(rng) for _ in range(spec.n_arms))
    return StudentModel(network, tensors)


# --- interaction logs --------------------------------------------------------


@dataclass(frozen=True)
class LogRow:
    student_id: str
    item_id: str
    step: int
    correct: int
    proficiency: int | None = None


@dataclass(frozen=True)
class ItemMeta:
    topics: tuple
    difficulty: float


@dataclass
class InteractionLog:
    rows: list = field(default_factory=list)
    items: dict = field(default_factory=dict)
    similarity: dict = field(default_factory=dict)
    _index: tuple = field(default=(0, None), init=False, repr=False, compare=False)

    def __post_init__(self):
        for row in self.rows:
            if row.correct not in (0, 1):
                raise DomainError(f"correct must be 0 or 1, got {row.correct!r}")
            if row.proficiency not in (None, 0, 1):
                raise DomainError(f"proficiency must be 0, 1 or blank, got {row.proficiency!r}")
        for item, meta in self.items.items():
            if not np.isfinite(meta.difficulty):
                raise DomainError(f"item {item} has a non-finite difficulty")

    def item_rows(self, item) -> list:
        size, index = self._index
        if index is None or size != len(self.rows):
            index = defaultdict(list)
            for r in self.rows:
                index[r.item_id].append(r)
            self._index = (len(self.rows), index)
        return list(index.get(item, ()))


def _parse_flag(text: str, column: str):
    text = text.strip()
    if text == "":
        return None
    if text not in ("0", "1"):
        raise DomainError(f"{column} must be 0 or 1, got {text!r}")
    return int(text)


def read_interaction_log(log_path, items_path, similarity_path=None) -> InteractionLog:
    rows = []
    with open(log_path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            correct = _parse_flag(rec["correct"], "correct")
            if correct is None:
                raise DomainError("correct may not be blank")
            rows.append(LogRow(rec["student_id"], rec["item_id"], int(rec["step"]), correct,
                               _parse_flag(rec.get("proficiency") or "", "proficiency")))
    items = {}
    with open(items_path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            tags = tuple(t for t in (x.strip() for x in rec["topics"].split(";")) if t)
            items[rec["item_id"]] = ItemMeta(tags, float(rec["difficulty"]))
    similarity = {}
    if similarity_path is not None:
        with open(similarity_path, newline="", encoding="utf-8") as fh:
            for rec in csv.DictReader(fh):
                similarity[(rec["item_a"], rec["item_b"])] = float(rec["score"])
    return InteractionLog(rows, items, similarity)


def write_interaction_log(log: InteractionLog, log_path, items_path, similarity_path=None) -> None:
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["student_id", "item_id", "step", "correct", "proficiency"])
        for r in log.rows:
            w.writerow([r.student_id, r.item_id, r.step, r.correct, "" if r.proficiency is None else r.proficiency])
    with open(items_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["item_id", "topics", "difficulty"])
        for item, meta in log.items.items():
            w.writerow([item, ";".join(meta.topics), repr(meta.difficulty)])
    if similarity_path is not None:
        with open(similarity_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["item_a", "item_b", "score"])
            for (a, b), score in log.similarity.items():
                w.writerow([a, b, repr(score)])


def simulate_log(learn, retain, topics, difficulty, n_students: int, n_steps: int, rng=None,
                 proficiency: bool = False, similarity: dict | None = None) -> InteractionLog:
    """Interaction log of students practising every item under planted dynamics.

    Item ``i`` is answered correctly exactly when the student knows it; each
    attempt moves an unlearned student to learned with ``learn[i]`` and keeps
    a learned one there with ``retain[i]``. Students start unlearned. With
    ``proficiency`` the flag is set from the first correct attempt onwards.
    """
    rng = make_rng(rng)
    rows, items = [], {}
    for i, (p01, p11) in enumerate(zip(learn, retain)):
        item = f"item{i}"
        items[item] = ItemMeta(tuple(topics[i]), float(difficulty[i]))
        known = np.zeros(n_students, dtype=bool)
        mastered = np.zeros(n_students, dtype=bool)
        for t in range(n_steps):
            u = rng.random(n_students)
            known = np.where(known, u < p11, u < p01)
            mastered |= known
            for student in range(n_students):
                flag = int(mastered[student]) if proficiency else None
                rows.append(LogRow(f"s{student}", item, t, int(known[student]), flag))
    return InteractionLog(rows, items, dict(similarity or {}))


# --- active transitions ------------------------------------------------------


@dataclass(frozen=True)
class ActiveFit:
    learn: float
    retain: float
    clipped: bool = False
    underdetermined: bool = False
    unconstrained: tuple = (np.nan, np.nan)


def correctness_rates(log: InteractionLog, item) -> np.ndarray:
    """Fraction of correct answers at each step for one item, in step order."""
    by_step = defaultdict(list)
    for r in log.item_rows(item):
        by_step[r.step].append(r.correct)
    return np.array([np.mean(by_step[s]) for s in sorted(by_step)])


def fit_linear_transition(rates) -> ActiveFit:
    """Least-squares fit of ``rate[t+1] = learn * (1 - rate[t]) + retain * rate[t]``.

    Coefficients are kept positive and capped at 0.99. A constant rate
    sequence cannot separate the two coefficients; the fit then falls back to
    the mean rate for ``learn`` and 0.2 above it for ``retain``.
    """
    rates = np.asarray(rates, dtype=float)
    if rates.size < 2:
        raise InsufficientDataError("need at least two consecutive correctness rates")
    prev, nxt = rates[:-1], rates[1:]
    if np.ptp(prev) < 1e-12:
        mean = float(rates.mean())
        learn = float(np.clip(mean, PROB_FLOOR, PROB_CLIP))
        return ActiveFit(learn, min(PROB_CLIP, mean + 0.2), underdetermined=True)
    design = np.column_stack([1.0 - prev, prev])
    coef, *_ = np.linalg.lstsq(design, nxt, rcond=None)
    raw = tuple(float(c) for c in coef)
    if coef.min() < PROB_FLOOR:
        coef = lsq_linear(design, nxt, bounds=(PROB_FLOOR, np.inf)).x
    clipped = bool(np.any(coef > PROB_CLIP))
    coef = np.minimum(coef, PROB_CLIP)
    return ActiveFit(float(coef[0]), float(coef[1]), clipped, False, raw)


def fit_active_transitions(log: InteractionLog, item) -> ActiveFit:
    return fit_linear_transition(correctness_rates(log, item))


def fit_active_from_proficiency(log: InteractionLog, item):
    """``(P(0->1 | pull), P(1->0 | pull))`` from mastery flags.

    The learning probability is the reciprocal of the mean number of attempts
    up to and including the first proficient one; the forgetting probability
    is the error rate on attempts after it.
    """
    per_student = defaultdict(list)
    for r in log.item_rows(item):
        per_student[r.student_id].append(r)
    attempts, errors, post = [], 0, 0
    for rows in per_student.values():
        rows.sort(key=lambda r: r.step)
        first = next((i for i, r in enumerate(rows) if r.proficiency == 1), None)
        if first is None:
            continue
        attempts.append(first + 1)
        after = rows[first + 1:]
        post += len(after)
        errors += sum(1 for r in after if r.correct == 0)
    if not attempts:
        raise InsufficientDataError(f"no student reached proficiency on item {item!r}")
    learn = float(np.clip(1.0 / np.mean(attempts), PROB_FLOOR, PROB_CLIP))
    forget = float(np.clip(errors / post if post else 0.0, PROB_FLOOR, PROB_CLIP))
    return learn, forget


# --- passive and semi-active transitions -------------------------------------


def normalize_difficulty(difficulties) -> np.ndarray:
    d = np.asarray(difficulties, dtype=float)
    if not np.all(np.isfinite(d)):
        raise DomainError("difficulties must be finite")
    span = np.ptp(d) if d.size else 0.0
    if span == 0:
        return np.zeros_like(d)
    return (d - d.min()) / span


def derive_passive_transitions(difficulty_norm: float, active_learn: float, rng, sigma: float = DEFAULT_SIGMA):
    """Random passive row ``(P(0->1), P(1->0))`` for an item.

    Forgetting grows linearly with normalised difficulty; the passive
    learning probability stays below 0.9 of the semi-active one.
    """
    forget = FORGET_BASE + FORGET_SLOPE * difficulty_norm + rng.uniform(-FORGET_NOISE, FORGET_NOISE)
    forget = float(np.clip(forget, *FORGET_RANGE))
    hi = 0.9 * sigma * active_learn
    learn = float(rng.uniform(min(0.01, 0.5 * hi), hi))
    return learn, forget


def derive_semiactive(active, passive, sigma: float) -> TransitionTensor:
    """Complete tensor from ``active=(learn, retain)`` and ``passive=(learn, retain)``.

    Semi-active learning is ``sigma`` times active learning; semi-active
    retention interpolates between passive and active retention by ``sigma``.
    Passive entries are pulled below the semi-active ones when they would
    break the ordering.
    """
    if not 0 < sigma < 1:
        raise DomainError(f"sigma must lie in (0, 1), got {sigma}")
    a_learn, a_retain = map(float, active)
    p_learn, p_retain = map(float, passive)
    if not 0 < a_learn < a_retain < 1:
        raise DomainError(f"active row needs 0 < learn < retain < 1, got {active}")
    s_learn = sigma * a_learn
    if p_learn >= s_learn:
        p_learn = 0.9 * s_learn
    if not p_learn < p_retain < a_retain:
        p_retain = p_learn + 0.9 * (a_retain - p_learn)
    s_retain = p_retain + sigma * (a_retain - p_retain)
    tensor = TransitionTensor.from_rows([p_learn, s_learn, a_learn], [p_retain, s_retain, a_retain])
    broken = tensor_violations(tensor)
    if broken:
        # only reachable when sigma sits within rounding of 0 or 1
        raise DomainError(f"sigma={sigma} gives a degenerate tensor: {broken[0]}")
    return tensor


def _topic_index(log: InteractionLog):
    tags = sorted({t for meta in log.items.values() for t in meta.topics})
    return {t: i for i, t in enumerate(tags)}


def group_sigmas(log: InteractionLog, network: GroupNetwork, items) -> np.ndarray:
    """Per-arm similarity proportion from 1..9 similarity scores.

    A topic's value is the mean normalised score over its scored item pairs;
    an arm averages over its topics. Topics without scores use 0.8.
    """
    pos = {item: i for i, item in enumerate(items)}
    scores = defaultdict(list)
    for (a, b), score in log.similarity.items():
        if a not in pos or b not in pos or a == b:
            continue
        norm = (score - 1.0) / 8.0
        for topic in network.membership[pos[a]] & network.membership[pos[b]]:
            scores[topic].append(norm)
    topic_sigma = np.array([np.mean(scores[t]) if scores[t] else DEFAULT_SIGMA for t in range(network.n_topics)])
    arm_sigma = np.array([topic_sigma[list(m)].mean() for m in network.membership])
    return np.clip(arm_sigma, *SIGMA_RANGE)


def build_model_from_logs(log: InteractionLog, rng=None, sigma: float | None = None) -> StudentModel:
    """Fit a student model item by item.

    Items whose rows carry proficiency flags use the mastery-based fit, the
    rest use the linear correctness-rate regression. ``sigma`` forces a
    constant similarity proportion; otherwise it comes from the similarity
    scores (0.8 where there are none).
    """
    rng = make_rng(rng)
    items = list(log.items)
    if not items:
        raise InsufficientDataError("item metadata is empty")
    topic_of = _topic_index(log)
    membership = []
    for item in items:
        tags = log.items[item].topics
        if not tags:
            raise DomainError(f"item {item!r} has no topic")
        membership.append(frozenset(topic_of[t] for t in tags))
    network = GroupNetwork(len(items), len(topic_of), tuple(membership))
    if sigma is None:
        sigmas = group_sigmas(log, network, items)
    else:
        sigmas = np.full(len(items), float(sigma))
    difficulty = normalize_difficulty([log.items[i].difficulty for i in items])

    tensors = []
    for n, item in enumerate(items):
        rows = log.item_rows(item)
        if any(r.proficiency is not None for r in rows):
            learn, forget = fit_active_from_proficiency(log, item)
            retain = 1.0 - forget
        else:
            fit = fit_active_transitions(log, item)
            learn, retain = fit.learn, fit.retain
        if learn >= retain:
            retain = learn + 0.5 * (1.0 - learn)
        p_learn, p_forget = derive_passive_transitions(difficulty[n], learn, rng, sigmas[n])
        tensors.append(derive_semiactive((learn, retain), (p_learn, 1.0 - p_forget), sigmas[n]))
    return StudentModel(network, tuple(tensors))
