"""Command-line entry point: run experiments, recompute metrics, compare runs."""

import argparse
import logging
import sys
from typing import List, Optional

from src.errors import ConfigurationError, MorphoEvoError
from src.exp import TOP_K, compare, load_config, replay_metrics, run_experiment

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so bad arguments map to the config exit code."""

    def error(self, message: str) -> None:
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="morphoevo", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    commands = parser.add_subparsers(dest="command", parser_class=_Parser)

    run = commands.add_parser("run", help="run an experiment")
    run.add_argument("--config", help="JSON file with ExperimentConfig fields")
    run.add_argument("--variant")
    run.add_argument("--replicates", type=int)
    run.add_argument("--robots", type=int, dest="robot_budget")
    run.add_argument("--pop", type=int, dest="pop_size")
    run.add_argument("--budget", type=int, dest="learner_budget")
    run.add_argument("--cores", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--arena")
    run.add_argument("--out")
    run.add_argument("--episode-seconds", type=float, dest="episode_seconds")
    run.add_argument(
        "--sched-trace",
        action="store_const",
        const=True,
        dest="sched_trace",
        help="write every task assignment and completion to sched_trace.log",
    )

    metrics = commands.add_parser("metrics", help="recompute metrics from a run directory")
    metrics.add_argument("--run", required=True)

    comparison = commands.add_parser("compare", help="rank test on endpoint pool fitness")
    comparison.add_argument("--runs", nargs=2, required=True)
    comparison.add_argument("--test", choices=["ranksum", "mannwhitney"], default="ranksum")
    return parser


RUN_OVERRIDES = (
    "variant",
    "replicates",
    "robot_budget",
    "pop_size",
    "learner_budget",
    "cores",
    "seed",
    "arena",
    "out",
    "episode_seconds",
    "sched_trace",
)


class App:
    """Main CLI application."""

    def handle_run(self, args: argparse.Namespace) -> None:
        config = load_config(args.config)
        for name in RUN_OVERRIDES:
            value = getattr(args, name)
            if value is not None:
                setattr(config, name, value)
        config.validate()
        out = run_experiment(config)
        print(f"Run written to {out}")
        self._print_tables(replay_metrics(out))

    def handle_metrics(self, args: argparse.Namespace) -> None:
        self._print_tables(replay_metrics(args.run))

    def handle_compare(self, args: argparse.Namespace) -> None:
        statistic, pvalue = compare(args.runs[0], args.runs[1], args.test)
        print(f"{args.test}: statistic={statistic:.4f} p={pvalue:.4g}")

    def _print_tables(self, tables: dict) -> None:
        fitness = tables["fitness_by_index"]
        if len(fitness):
            print(f"Final mean pool fitness: {fitness['mean_fitness'].iloc[-1]:.4f}")
        top = tables["top20_summary"]
        if len(top):
            print(f"Best robot: {int(top['robot_index'].iloc[0])} ({top['fitness'].iloc[0]:.4f})")
        diversity = tables["behavioural_variance"]
        print(f"Top-{TOP_K} mean fitness: {diversity['top20_mean_fitness'].mean():.4f}")
        print(f"Top-{TOP_K} morphological variance: {diversity['top20_morph_variance'].mean():.4f}")
        print(f"Top-{TOP_K} behavioural variance: {diversity['behavioural_variance'].mean():.4f}")

    def run(self, argv: Optional[List[str]] = None) -> int:
        try:
            args = build_parser().parse_args(argv)
        except ConfigurationError as exc:
            print(f"Error: {exc}")
            return EXIT_CONFIG
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        handlers = {
            "run": self.handle_run,
            "metrics": self.handle_metrics,
            "compare": self.handle_compare,
        }
        if args.command not in handlers:
            print("Choose a command: run, metrics or compare.")
            return EXIT_CONFIG
        try:
            handlers[args.command](args)
        except ConfigurationError as exc:
            print(f"Configuration error: {exc}")
            return EXIT_CONFIG
        except (MorphoEvoError, OSError) as exc:
            logger.debug("command failed", exc_info=True)
            print(f"Error: {exc}")
            return EXIT_RUNTIME
        return EXIT_OK


def main() -> None:
    """Entry point for the application."""
    sys.exit(App().run())


if __name__ == "__main__":
    main()
