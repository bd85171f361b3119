import argparse
import logging
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .cli_utils import load_corpus, parse_kinds, read_manifest
from .config_utils import load_config
from .data_utils import Task, load_csv
from .ensemble_utils import brute_force_select, greedy_select
from .errors import ExplorerError
from .file_utils import read_prediction_matrix, read_yaml, write_prediction_matrix, write_yaml
from .policy_utils import default_policy, load_policy, save_policy, train
from .report_utils import format_table, run_pipeline, validate_report

logger = logging.getLogger("explorer")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="explorer", description="Ensemble Explorer")
    parser.add_argument("-v", "--verbose", action="store_true", help="Show debug output")
    parser.add_argument("-q", "--quiet", action="store_true", help="Only show warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    # run
    p = sub.add_parser("run", help="Explore a dataset and write a run report")
    p.add_argument("--data", required=True, help="Path to the CSV file")
    p.add_argument("--target", required=True, help="Name of the target column")
    p.add_argument("--task", required=True, choices=["classification", "regression"])
    p.add_argument("--time-budget", type=float, required=True, help="Exploration budget in seconds")
    p.add_argument(
        "--iterations",
        type=int,
        help="Stop after this many actions; the clock then counts iterations instead of seconds",
    )
    p.add_argument("--seed", type=int, required=True, help="Random seed")
    p.add_argument("--policy", help="Trained policy file (default: built-in heuristic weights)")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--kinds", help="Column kinds, e.g. 'zip=categorical,when=datetime'")
    p.add_argument("-w", "--workers", type=int, help="Number of worker threads for fold fits (default: 4)")
    p.add_argument("--predictions", help="Also write the out-of-fold prediction matrix to this CSV")
    p.add_argument("--out", required=True, help="Path of the YAML report")

    # train-policy
    p = sub.add_parser("train-policy", help="Learn policy weights over a corpus of datasets")
    p.add_argument("--manifest", required=True, help="csv_path<TAB>target<TAB>task<TAB>t_max per line")
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--seed", type=int, required=True, help="Random seed")
    p.add_argument("--iterations", type=int, help="Iteration cap per episode")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--out", required=True, help="Path of the policy file")

    # evaluate
    p = sub.add_parser("evaluate", help="Print the metrics of one or more run reports")
    p.add_argument("--report", required=True, nargs="+")

    # ensemble-oracle
    p = sub.add_parser("ensemble-oracle", help="Compare greedy selection with exhaustive search")
    p.add_argument("--predictions", required=True, help="CSV with column y, then one column per model")
    p.add_argument("--phi", type=float, default=0.0, help="Acceptance slack for greedy selection (default: 0.0)")
    p.add_argument("--allow-drop", action="store_true")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.workers is not None:
        config = replace(config, workers=max(1, args.workers))
    d = load_csv(args.data, args.target, parse_kinds(args.kinds), task=Task.parse(args.task))
    policy = load_policy(args.policy) if args.policy else default_policy()
    result, report = run_pipeline(d, args.time_budget, args.seed, policy, config, args.iterations)
    write_yaml(args.out, report)
    if args.predictions:
        write_prediction_matrix(args.predictions, result.tree.root.dataset.target.values, result.tree.predictions())
    return 0


def _cmd_train(args) -> int:
    config = load_config(args.config)
    corpus = load_corpus(read_manifest(args.manifest))
    weights = train(corpus, args.episodes, args.seed, config, args.iterations)
    save_policy(weights, args.out)
    return 0


def _cmd_evaluate(args) -> int:
    reports = [validate_report(read_yaml(path), path) for path in args.report]
    print(format_table(reports))
    return 0


def _cmd_oracle(args) -> int:
    y, predictions = read_prediction_matrix(args.predictions)
    greedy = greedy_select(predictions, y, phi=args.phi, allow_drop=args.allow_drop)
    exact = brute_force_select(predictions, y)
    print(f"greedy  E={greedy.value.E:.10f} members={list(greedy.member_ids)}")
    print(f"oracle  E={exact.value.E:.10f} members={list(exact.member_ids)}")
    print(f"gap     {greedy.value.E - exact.value.E:.3e}")
    return 0


COMMANDS = {
    "run": _cmd_run,
    "train-policy": _cmd_train,
    "evaluate": _cmd_evaluate,
    "ensemble-oracle": _cmd_oracle,
}


def check_args(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if args.command == "run":
        if args.time_budget <= 0:
            parser.error("--time-budget must be positive")
        if args.iterations is not None and args.iterations < 0:
            parser.error("--iterations must be >= 0")
    elif args.command == "train-policy":
        if args.episodes < 0:
            parser.error("--episodes must be >= 0")
        if args.iterations is not None and args.iterations < 0:
            parser.error("--iterations must be >= 0")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    check_args(parser, args)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="[%(name)s] %(message)s")

    try:
        return COMMANDS[args.command](args)
    except ExplorerError as e:
        logger.error(str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
