"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .agents import POLICIES, brute_force_select_k, greedy_select_k, joint_q_value
from .environment import expand_action
from .harness import (
    ConfigError,
    ExperimentConfig,
    export_network,
    export_results,
    read_records,
    run_experiment,
    summarize,
    write_summary,
)
from .model import StudentModel, validate
from .studentgen import SyntheticSpec, build_model_from_logs, generate_synthetic, read_interaction_log
from .validation import DomainError, make_rng

OUTPUT_ENV = "EDNETRMAB_OUTPUT_DIR"
EXIT_USAGE, EXIT_DATA, EXIT_IO = 1, 2, 3

log = logging.getLogger("ednetrmab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_synthetic_args(p):
    p.add_argument("--n-arms", type=int, help="number of arms (default 50)")
    p.add_argument("--n-topics", type=int, help="number of topics (default 20)")
    p.add_argument("--extra-prob", type=float, help="probability of joining each extra topic (default 0.1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ednetrmab", description="Networked restless bandit experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="write a student model file")
    src = gen.add_mutually_exclusive_group(required=True)
    src.add_argument("--synthetic", action="store_true", help="random synthetic model")
    src.add_argument("--from-logs", metavar="LOG", help="interaction log CSV")
    gen.add_argument("--items", help="item metadata CSV (with --from-logs)")
    gen.add_argument("--similarity", help="item similarity CSV (with --from-logs)")
    gen.add_argument("--sigma", type=float, help="constant similarity proportion instead of scores")
    _add_synthetic_args(gen)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output model file")

    run = sub.add_parser("run", help="run policies over seeds and episodes")
    run.add_argument("--config", help="experiment config file (JSON)")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config entry, e.g. learner.alpha=0.2 (repeatable)")
    run.add_argument("--model", help="student model file (default: synthetic per seed)")
    _add_synthetic_args(run)
    run.add_argument("--policies", help=f"comma-separated subset of {','.join(POLICIES)}")
    run.add_argument("--episodes", type=int)
    run.add_argument("--horizon", type=int)
    run.add_argument("--seeds", help="a count N (seeds 0..N-1) or a comma-separated list")
    run.add_argument("--k", type=int, help="arms pulled per step")
    run.add_argument("--alpha", type=float)
    run.add_argument("--gamma", type=float)
    run.add_argument("--buffer-size", type=int)
    run.add_argument("--batch-size", type=int)
    run.add_argument("--oracle-check", action="store_true",
                     help="compare greedy k-selection with brute force (N <= 8)")
    run.add_argument("--jobs", type=int, help="parallel trials")
    run.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./results)")

    ana = sub.add_parser("analyze", help="recompute the summary from records.csv")
    ana.add_argument("records", help="records.csv or a results directory")
    ana.add_argument("--out", help="summary CSV path (default: summary.csv next to records)")

    net = sub.add_parser("export-network", help="write node and edge lists of a model")
    net.add_argument("--model", help="student model file")
    _add_synthetic_args(net)
    net.add_argument("--seed", type=int, default=0)
    net.add_argument("--out", required=True, help="output directory")

    demo = sub.add_parser("greedy-demo", help="greedy k-arm selection against brute force")
    demo.add_argument("--n-arms", type=int, default=8)
    demo.add_argument("--n-topics", type=int, default=4)
    demo.add_argument("--extra-prob", type=float, default=0.2)
    demo.add_argument("--k", type=int, default=3)
    demo.add_argument("--instances", type=int, default=1000)
    demo.add_argument("--seed", type=int, default=0)
    return parser


def _synthetic_spec(args, seed=None) -> SyntheticSpec:
    kw = {}
    if args.n_arms is not None:
        kw["n_arms"] = args.n_arms
    if args.n_topics is not None:
        kw["n_topics"] = args.n_topics
    if args.extra_prob is not None:
        kw["extra_membership_prob"] = args.extra_prob
    return SyntheticSpec(seed=seed, **kw)


def cmd_generate(args) -> int:
    if args.synthetic:
        model = generate_synthetic(_synthetic_spec(args, args.seed))
    else:
        if not args.items:
            raise UsageError("--from-logs needs --items")
        logdata = read_interaction_log(args.from_logs, args.items, args.similarity)
        model = build_model_from_logs(logdata, rng=args.seed, sigma=args.sigma)
    report = validate(model)
    if not report.ok:
        print(f"model is invalid:\n{report}", file=sys.stderr)
        return EXIT_DATA
    model.save(args.out)
    print(f"wrote {args.out}: {model.n_arms} arms, {model.network.n_topics} topics, validation: {report}")
    return 0


def _set_path(data: dict, key: str, raw: str) -> None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise UsageError(f"cannot override {key}")
    node[parts[-1]] = value


def _parse_seeds(text: str) -> list:
    try:
        if "," in text:
            return [int(s) for s in text.split(",") if s.strip()]
        return list(range(int(text)))
    except ValueError as exc:
        raise UsageError(f"bad --seeds value {text!r}") from exc


def experiment_config(args) -> ExperimentConfig:
    """Defaults, then the config file, then --set overrides, then named flags."""
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError("config file must hold an object")
    for item in args.overrides:
        if "=" not in item:
            raise UsageError(f"override {item!r} is not KEY=VALUE")
        key, raw = item.split("=", 1)
        _set_path(data, key.strip(), raw)
    if args.model:
        data["model_path"] = args.model
        data["synthetic"] = None
    if any(v is not None for v in (args.n_arms, args.n_topics, args.extra_prob)):
        spec = dict(data.get("synthetic") or {})
        for key, value in (("n_arms", args.n_arms), ("n_topics", args.n_topics),
                           ("extra_membership_prob", args.extra_prob)):
            if value is not None:
                spec[key] = value
        data["synthetic"] = spec
        data["model_path"] = None
    if args.policies:
        data["policies"] = [p.strip() for p in args.policies.split(",") if p.strip()]
    if args.seeds:
        data["seeds"] = _parse_seeds(args.seeds)
    for key in ("episodes", "horizon", "k", "jobs"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    learner = dict(data.get("learner") or {})
    for key in ("alpha", "gamma", "buffer_size", "batch_size"):
        if getattr(args, key) is not None:
            learner[key] = getattr(args, key)
    if learner:
        data["learner"] = learner
    if args.oracle_check:
        data["oracle_check"] = True
    data["output_dir"] = args.out or data.get("output_dir") or os.environ.get(OUTPUT_ENV) or "results"
    return ExperimentConfig.from_dict(data)


def cmd_run(args) -> int:
    config = experiment_config(args)
    if config.oracle_check:
        n_arms = (StudentModel.load(config.model_path).n_arms if config.model_path
                  else config.synthetic.n_arms)
        if n_arms > 8:
            raise ConfigError("--oracle-check needs at most 8 arms")
    if config.model_path:
        StudentModel.load(config.model_path)
    records, report, meta = run_experiment(config)
    paths = export_results(records, report, config.output_dir, meta)
    print(report.format())
    print(f"wrote {paths['records']}, {paths['summary']}, {paths['meta']}")
    return 0


def cmd_analyze(args) -> int:
    path = Path(args.records)
    if path.is_dir():
        path = path / "records.csv"
    records = read_records(path)
    final_policies = {r.policy for r in records}
    for required in ("eduqate", "random"):
        if required not in final_policies:
            raise ConfigError(f"records are missing the {required!r} policy")
    report = summarize(records)
    out = Path(args.out) if args.out else path.with_name("summary.csv")
    write_summary(report, out)
    print(report.format())
    print(f"wrote {out}")
    return 0


def cmd_export_network(args) -> int:
    if args.model:
        model = StudentModel.load(args.model)
    else:
        model = generate_synthetic(_synthetic_spec(args, args.seed))
    paths = export_network(model, args.out)
    print(f"wrote {paths['nodes']} and {paths['edges']} ({paths['n_edges']} edges)")
    return 0


def cmd_greedy_demo(args) -> int:
    rng = make_rng(args.seed)
    spec = SyntheticSpec(args.n_arms, args.n_topics, args.extra_prob)
    worse = equal = 0
    ratios = []
    for _ in range(args.instances):
        network = generate_synthetic(spec, rng).network
        q = np.sort(rng.random((args.n_arms, 2, 3)), axis=2)
        state = rng.integers(0, 2, args.n_arms).astype(np.int8)
        greedy = greedy_select_k(q, state, network, args.k)
        value = joint_q_value(q, state, expand_action(network, greedy))
        _, best = brute_force_select_k(q, state, network, args.k)
        worse += value > best + 1e-9
        equal += abs(value - best) <= 1e-9
        ratios.append(value / best if best else 1.0)
    print(f"instances={args.instances} k={args.k} N={args.n_arms}")
    print(f"greedy above optimum: {worse}")
    print(f"greedy equal to optimum: {equal}")
    print(f"mean greedy/optimum: {np.mean(ratios):.6f}, worst: {np.min(ratios):.6f}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "run": cmd_run,
    "analyze": cmd_analyze,
    "export-network": cmd_export_network,
    "greedy-demo": cmd_greedy_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
