"""Experiment orchestration: trials over (policy, seed), Intervention Benefit, exports."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from . import __version__
from .agents import POLICIES, LearnerConfig, brute_force_select_k, greedy_select_k, joint_q_value, make_policy
from .environment import _step_unchecked, expand_action
from .model import StudentModel
from .studentgen import SyntheticSpec, generate_synthetic
from .validation import RNG_FAMILY, DomainError, make_rng

log = logging.getLogger(__name__)

RECORD_COLUMNS = ["seed", "policy", "episode", "reward"]
SUMMARY_COLUMNS = ["policy", "mean_IB", "se_IB", "mean_R", "se_R"]
IB_GUARD = 1e-9


class ConfigError(DomainError):
    pass


class AggregationError(DomainError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    synthetic: SyntheticSpec | None = field(default_factory=SyntheticSpec)
    model_path: str | None = None
    policies: tuple = ("eduqate", "tw", "wiql", "myopic", "random")
    episodes: int = 800
    horizon: int = 50
    seeds: tuple = tuple(range(30))
    k: int = 1
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    output_dir: str | None = None
    oracle_check: bool = False
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.episodes < 1 or self.horizon < 1:
            raise ConfigError("episodes and horizon must be at least 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        unknown = [p for p in self.policies if p not in POLICIES]
        if unknown:
            raise ConfigError(f"unknown policies {unknown}; choose from {', '.join(POLICIES)}")
        if len(set(self.policies)) != len(self.policies):
            raise ConfigError("policies must be distinct")
        if (self.synthetic is None) == (self.model_path is None):
            raise ConfigError("give exactly one of synthetic settings or a model file")
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["policies"] = list(self.policies)
        out["seeds"] = list(self.seeds)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        try:
            if data.get("synthetic") is not None:
                data["synthetic"] = SyntheticSpec(**data["synthetic"])
            elif "synthetic" not in data and data.get("model_path") is None:
                data["synthetic"] = SyntheticSpec()
            if "learner" in data:
                data["learner"] = LearnerConfig(**data["learner"])
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    policy: str
    episode: int
    reward: float
    wall_time: float = 0.0


@dataclass(frozen=True)
class PolicySummary:
    policy: str
    mean_ib: float | None
    se_ib: float | None
    mean_reward: float
    se_reward: float
    n_seeds: int
    excluded_seeds: int = 0


@dataclass
class IBReport:
    rows: list

    def __getitem__(self, policy) -> PolicySummary:
        for row in self.rows:
            if row.policy == policy:
                return row
        raise KeyError(policy)

    def format(self) -> str:
        lines = [f"{'policy':<15}{'E[IB] (%)':>22}{'E[R]':>22}"]
        for r in self.rows:
            if r.mean_ib is None or r.policy == "random":
                ib = "-"
            else:
                ib = f"{r.mean_ib:.2f} +- {r.se_ib:.2f}"
            lines.append(f"{r.policy:<15}{ib:>22}{f'{r.mean_reward:.2f} +- {r.se_reward:.2f}':>22}")
        return "\n".join(lines)


def _seed_streams(seed: int):
    model_ss, env_ss, agent_ss = np.random.SeedSequence(seed).spawn(3)
    return make_rng(model_ss), make_rng(env_ss), make_rng(agent_ss)


def trial_model(config: ExperimentConfig, seed: int, model_rng=None) -> StudentModel:
    """Fresh synthetic model per seed, or the fixed model file."""
    if config.model_path is not None:
        return StudentModel.load(config.model_path)
    if model_rng is None:
        model_rng = _seed_streams(seed)[0]
    return generate_synthetic(config.synthetic, model_rng)


def _simulate(config: ExperimentConfig, policy: str, seed: int, model: StudentModel | None = None):
    if policy not in POLICIES:
        raise ConfigError(f"unknown policy {policy!r}")
    model_rng, env_rng, agent_rng = _seed_streams(seed)
    if model is None:
        model = trial_model(config, seed, model_rng)
    if config.k > model.n_arms:
        raise ConfigError(f"k={config.k} exceeds the {model.n_arms} arms of the model")
    agent = make_policy(policy, config.k, config.learner, agent_rng).fit(model)
    network = model.network
    records = []
    for episode in range(config.episodes):
        start = time.perf_counter()
        state = np.zeros(model.n_arms, dtype=np.int8)
        total = 0
        for _ in range(config.horizon):
            action = expand_action(network, agent.select(state))
            outcome = _step_unchecked(model, state, action, env_rng)
            agent.partial_fit(state, action, outcome.reward, outcome.next_state)
            total += outcome.reward
            state = outcome.next_state
        records.append(TrialRecord(seed, policy, episode, total / config.horizon,
                                   time.perf_counter() - start))
    return records, agent, model


def run_trial(config: ExperimentConfig, policy: str, seed: int) -> list:
    """All episodes of one (policy, seed) pair; learning state persists across episodes."""
    return _simulate(config, policy, seed)[0]


def _trial_job(args):
    config, policy, seed = args
    records, agent, model = _simulate(config, policy, seed)
    oracle = None
    if config.oracle_check and hasattr(agent, "q_") and agent.q_.shape[2] == 3:
        oracle = greedy_oracle_check(agent.q_, model.network, config.k)
    return records, oracle


def greedy_oracle_check(q, network, k: int) -> dict:
    """Greedy k-selection against exhaustive search over every joint state."""
    n = network.n_arms
    if n > 12:
        raise ConfigError("the brute-force oracle is limited to 12 arms")
    worse = equal = 0
    gap = 0.0
    states = ((np.arange(2 ** n)[:, None] >> np.arange(n)) & 1).astype(np.int8)
    for state in states:
        greedy = greedy_select_k(q, state, network, k)
        g_value = joint_q_value(q, state, expand_action(network, greedy))
        _, best = brute_force_select_k(q, state, network, k)
        if g_value > best + 1e-9:
            worse += 1
        if abs(g_value - best) <= 1e-9:
            equal += 1
        gap = max(gap, best - g_value)
    return {"states": len(states), "greedy_exceeds_optimum": worse,
            "greedy_equals_optimum": equal, "max_gap": gap}


def run_experiment(config: ExperimentConfig):
    """Run every (policy, seed) trial; returns ``(records, report, meta)``."""
    jobs = [(config, p, s) for p, s in product(config.policies, config.seeds)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(j) for j in jobs]
    order = {p: i for i, p in enumerate(config.policies)}
    records = sorted((r for recs, _ in results for r in recs),
                     key=lambda r: (order[r.policy], r.seed, r.episode))
    report = summarize(records)
    meta = {
        "config": config.to_dict(),
        "rng": RNG_FAMILY,
        "version": __version__,
        "numpy": np.__version__,
        "n_records": len(records),
        "excluded_seeds": {r.policy: r.excluded_seeds for r in report.rows},
    }
    checks = [(job[1], job[2], oracle) for job, (_, oracle) in zip(jobs, results) if oracle]
    if config.oracle_check:
        meta["oracle_check"] = [{"policy": p, "seed": s, **o} for p, s, o in checks]
    return records, report, meta


# --- aggregation -------------------------------------------------------------


def final_rewards(records) -> dict:
    """``{policy: {seed: reward of the last episode}}``."""
    last = {}
    for r in records:
        key = (r.policy, r.seed)
        if key not in last or r.episode > last[key].episode:
            last[key] = r
    out = {}
    for (policy, seed), r in last.items():
        out.setdefault(policy, {})[seed] = r.reward
    return out


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return float("nan"), float("nan")
    se = values.std(ddof=1) / np.sqrt(values.size) if values.size > 1 else float("nan")
    return float(values.mean()), float(se)


def intervention_benefit(final: dict, policies=None) -> IBReport:
    """Per-seed Intervention Benefit (in %) relative to random and EduQate.

    Seeds where EduQate and random tie (within 1e-9) are excluded and counted.
    """
    for required in ("random", "eduqate"):
        if required not in final:
            raise AggregationError(f"records are missing the {required!r} policy")
    rand, eq = final["random"], final["eduqate"]
    if set(rand) != set(eq):
        raise AggregationError("random and eduqate were run on different seeds")
    rows = []
    for policy in policies or list(final):
        rewards = final[policy]
        if set(rewards) != set(rand):
            raise AggregationError(f"policy {policy!r} was run on different seeds")
        seeds = sorted(rewards)
        ib, excluded = [], 0
        for s in seeds:
            denom = eq[s] - rand[s]
            if abs(denom) < IB_GUARD:
                excluded += 1
                continue
            ib.append(100.0 * ((rewards[s] - rand[s]) / denom))
        mean_ib, se_ib = _mean_se(ib)
        mean_r, se_r = _mean_se([rewards[s] for s in seeds])
        rows.append(PolicySummary(policy, mean_ib, se_ib, mean_r, se_r, len(seeds), excluded))
    return IBReport(rows)


def summarize(records) -> IBReport:
    """Summary of final-episode rewards; IB columns are None without random and EduQate."""
    final = final_rewards(records)
    policies = list(dict.fromkeys(r.policy for r in records))
    if "random" in final and "eduqate" in final:
        return intervention_benefit(final, policies)
    rows = []
    for policy in policies:
        mean_r, se_r = _mean_se([final[policy][s] for s in sorted(final[policy])])
        rows.append(PolicySummary(policy, None, None, mean_r, se_r, len(final[policy])))
    return IBReport(rows)


# --- persistence ---------------------------------------------------------------


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def write_records(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([r.seed, r.policy, r.episode, repr(float(r.reward))])


def write_summary(report: IBReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in report.rows:
            w.writerow([r.policy, _fmt(r.mean_ib), _fmt(r.se_ib), _fmt(r.mean_reward), _fmt(r.se_reward)])


def read_records(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RECORD_COLUMNS:
            raise DomainError(f"{path}: expected columns {RECORD_COLUMNS}, got {reader.fieldnames}")
        return [TrialRecord(int(r["seed"]), r["policy"], int(r["episode"]), float(r["reward"]))
                for r in reader]


def export_results(records, report: IBReport, path, meta: dict | None = None) -> dict:
    """Write ``records.csv``, ``summary.csv`` and ``meta.json`` into directory ``path``."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"records": out / "records.csv", "summary": out / "summary.csv", "meta": out / "meta.json"}
    write_records(records, paths["records"])
    write_summary(report, paths["summary"])
    meta = dict(meta or {})
    meta.setdefault("rng", RNG_FAMILY)
    meta.setdefault("version", __version__)
    paths["meta"].write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def export_network(model: StudentModel, path) -> dict:
    """Write ``nodes.csv`` (node,topics) and ``edges.csv`` (node_a,node_b,shared_topics)."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    net = model.network
    nodes, edges = out / "nodes.csv", out / "edges.csv"
    with open(nodes, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "topics"])
        for arm, topics in enumerate(net.membership):
            w.writerow([arm, ";".join(str(t) for t in sorted(topics))])
    n_edges = 0
    with open(edges, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_a", "node_b", "shared_topics"])
        for a in range(net.n_arms):
            for b in range(a + 1, net.n_arms):
                shared = net.shared_topics(a, b)
                if shared:
                    w.writerow([a, b, ";".join(str(t) for t in sorted(shared))])
                    n_edges += 1
    return {"nodes": nodes, "edges": edges, "n_edges": n_edges}


def with_overrides(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(config, **changes)
