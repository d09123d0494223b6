import csv
import json

import numpy as np
import pytest

from conftest import uniform_model
from ednetrmab import GroupNetwork, StudentModel, TransitionTensor
from ednetrmab.agents import LearnerConfig
from ednetrmab.harness import (
    AggregationError,
    ConfigError,
    ExperimentConfig,
    TrialRecord,
    export_network,
    export_results,
    final_rewards,
    intervention_benefit,
    read_records,
    run_experiment,
    run_trial,
    summarize,
    write_records,
    write_summary,
)
from ednetrmab.studentgen import SyntheticSpec, generate_synthetic


def _final(**policies):
    return {p: dict(enumerate(v)) for p, v in policies.items()}


def test_ib_hand_arithmetic():
    report = intervention_benefit(_final(eduqate=[24.0], random=[16.0], wiql=[20.0]))
    assert report["wiql"].mean_ib == pytest.approx(50.0)


def test_ib_reference_policies():
    report = intervention_benefit(_final(eduqate=[24.0, 30.0, 21.0], random=[16.0, 15.0, 22.0],
                                         tw=[1.0, 2.0, 3.0]))
    assert report["eduqate"].mean_ib == 100.0 and report["eduqate"].se_ib == 0.0
    assert report["random"].mean_ib == 0.0
    assert "-" in report.format().splitlines()[2]


def test_ib_per_seed_then_averaged():
    report = intervention_benefit(_final(eduqate=[24.0, 20.0], random=[16.0, 10.0], tw=[20.0, 20.0]))
    ib = [50.0, 100.0]
    assert report["tw"].mean_ib == pytest.approx(75.0)
    assert report["tw"].se_ib == pytest.approx(np.std(ib, ddof=1) / np.sqrt(2))
    assert report["tw"].mean_reward == pytest.approx(20.0)


def test_ib_guard_excludes_tied_seeds():
    report = intervention_benefit(_final(eduqate=[24.0, 10.0], random=[16.0, 10.0], tw=[20.0, 0.0]))
    assert report["tw"].excluded_seeds == 1
    assert report["tw"].mean_ib == pytest.approx(50.0)


def test_ib_errors():
    with pytest.raises(AggregationError):
        intervention_benefit(_final(eduqate=[1.0], tw=[1.0]))
    with pytest.raises(AggregationError):
        intervention_benefit({"eduqate": {0: 1.0}, "random": {1: 0.0}})
    with pytest.raises(AggregationError):
        intervention_benefit({"eduqate": {0: 1.0}, "random": {0: 0.0}, "tw": {5: 1.0}})


def test_final_rewards_uses_last_episode():
    recs = [TrialRecord(0, "random", e, float(e)) for e in (2, 0, 1)]
    assert final_rewards(recs) == {"random": {0: 2.0}}


def test_empty_records_header_only(tmp_path):
    write_records([], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == "seed,policy,episode,reward\n"


def _fake_records(n_seeds=3, policies=("eduqate", "tw", "random"), episodes=4):
    rng = np.random.default_rng(0)
    return [TrialRecord(s, p, e, float(rng.random() * 50)) for p in policies for s in range(n_seeds)
            for e in range(episodes)]


def test_export_round_trip(tmp_path):
    records = _fake_records()
    report = summarize(records)
    paths = export_results(records, report, tmp_path / "out", {"note": 1})
    back = read_records(paths["records"])
    assert [(r.seed, r.policy, r.episode, r.reward) for r in back] == \
        [(r.seed, r.policy, r.episode, r.reward) for r in records]
    write_summary(summarize(back), tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == paths["summary"].read_bytes()
    meta = json.loads(paths["meta"].read_text())
    assert meta["note"] == 1 and "Philox" in meta["rng"] and meta["version"]


def test_export_cardinality(tmp_path):
    records = _fake_records(n_seeds=30, policies=("eduqate", "tw", "wiql", "myopic", "random"), episodes=800)
    write_records(records, tmp_path / "r.csv")
    with open(tmp_path / "r.csv") as fh:
        assert sum(1 for _ in fh) - 1 == 120_000


def test_export_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        export_results([], summarize([]), blocker / "sub")


def test_summary_without_reference_policies():
    report = summarize(_fake_records(policies=("tw",)))
    assert report["tw"].mean_ib is None


def _edges(path):
    with open(path / "edges.csv") as fh:
        return list(csv.DictReader(fh))


def test_network_triangle(tmp_path):
    info = export_network(uniform_model([[0, 1, 2]]), tmp_path)
    assert info["n_edges"] == 3 and len(_edges(tmp_path)) == 3


def test_network_isolated(tmp_path):
    assert export_network(uniform_model([[0], [1], [2]]), tmp_path)["n_edges"] == 0
    assert _edges(tmp_path) == []


def test_network_recount(tmp_path):
    model = generate_synthetic(SyntheticSpec(seed=5))
    info = export_network(model, tmp_path)
    member = model.network.membership
    count = sum(1 for a in range(50) for b in range(a + 1, 50) if member[a] & member[b])
    assert info["n_edges"] == count == len(_edges(tmp_path))
    with open(tmp_path / "nodes.csv") as fh:
        nodes = list(csv.DictReader(fh))
    assert len(nodes) == 50
    assert {int(t) for t in nodes[0]["topics"].split(";")} == set(member[0])


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(policies=("nope",))
    with pytest.raises(ConfigError):
        ExperimentConfig(episodes=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(seeds=())
    with pytest.raises(ConfigError):
        ExperimentConfig(synthetic=None)
    cfg = ExperimentConfig(seeds=(1, 2), learner=LearnerConfig(alpha=0.2))
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_minimal_trial():
    cfg = ExperimentConfig(synthetic=SyntheticSpec(n_arms=1, n_topics=1), episodes=1, horizon=1, seeds=(0,))
    records = run_trial(cfg, "eduqate", 0)
    assert len(records) == 1 and records[0].reward in (0.0, 1.0)


def test_trial_deterministic():
    cfg = ExperimentConfig(synthetic=SyntheticSpec(n_arms=6, n_topics=3), episodes=3, horizon=10, seeds=(0,))
    for policy in ("random", "eduqate", "wiql", "tw", "myopic", "eduqate-minus"):
        a = [r.reward for r in run_trial(cfg, policy, 4)]
        assert a == [r.reward for r in run_trial(cfg, policy, 4)]


def test_trial_unknown_policy():
    cfg = ExperimentConfig(synthetic=SyntheticSpec(n_arms=3, n_topics=1), episodes=1, horizon=1, seeds=(0,))
    with pytest.raises(ConfigError):
        run_trial(cfg, "nope", 0)


def test_stationary_occupancy_oracle(tmp_path):
    tensor = TransitionTensor.from_rows((0.1, 0.5, 0.9), (0.95, 0.97, 0.98))
    model = StudentModel(GroupNetwork.from_groups([[0]]), (tensor,))
    path = tmp_path / "m.json"
    model.save(path)
    horizon, episodes = 50, 4000
    cfg = ExperimentConfig(synthetic=None, model_path=str(path), policies=("random",),
                           episodes=episodes, horizon=horizon, seeds=(0,))
    rewards = np.array([r.reward for r in run_trial(cfg, "random", 0)])
    # two-state chain under the pull action, started in state 0
    p01, p11 = 0.9, 0.98
    pi1 = p01 / (1 - p11 + p01)
    lam = p11 - p01
    t = np.arange(1, horizon + 1)
    expected = np.mean(pi1 * (1 - lam ** t))
    se = rewards.std(ddof=1) / np.sqrt(episodes)
    assert abs(rewards.mean() - expected) < 3 * se


def test_experiment_conservation_and_order():
    cfg = ExperimentConfig(synthetic=SyntheticSpec(n_arms=5, n_topics=2), policies=("eduqate", "random", "tw"),
                           episodes=3, horizon=5, seeds=(2, 0))
    records, report, meta = run_experiment(cfg)
    assert len(records) == 2 * 3 * 3 == meta["n_records"]
    keys = [(r.policy, r.seed, r.episode) for r in records]
    assert keys[0] == ("eduqate", 0, 0) and keys[-1] == ("tw", 2, 2)
    assert report["eduqate"].mean_ib == 100.0 and report["random"].mean_ib == 0.0


def test_parallel_matches_serial(tmp_path):
    base = dict(synthetic=SyntheticSpec(n_arms=5, n_topics=2), policies=("eduqate", "random"),
                episodes=2, horizon=5, seeds=(0, 1))
    serial = run_experiment(ExperimentConfig(**base))[0]
    parallel = run_experiment(ExperimentConfig(jobs=2, **base))[0]
    assert [r.reward for r in serial] == [r.reward for r in parallel]


def test_oracle_check_in_meta():
    cfg = ExperimentConfig(synthetic=SyntheticSpec(n_arms=6, n_topics=2), policies=("eduqate",),
                           episodes=2, horizon=10, seeds=(0,), k=2, oracle_check=True)
    meta = run_experiment(cfg)[2]
    check = meta["oracle_check"][0]
    assert check["states"] == 64 and check["greedy_exceeds_optimum"] == 0
