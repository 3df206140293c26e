#!/usr/bin/env python3
"""
Main starting point for symclaw: data generation, training, evaluation and the
structural self-test.
"""

import argparse
import sys

from app.dataset import VALIDATION_COUNT, load_dataset, make_dataset, save_dataset
from app.extra import load_config, parse_string_to_list, process_extra_args
from app.metrics import evaluate
from app.report_writer import emit_report
from app.selftest import run_selftest
from app.symclaw_logger import logger
from app.training import train


def parse_arguments(argv: list[str] | None = None) -> argparse.Namespace:
    """
    Parses command-line arguments for one of the subcommands.

    Returns:
        argparse.Namespace: An object that holds the parsed arguments as
        attributes.
    """
    logger.info("Parsing command-line arguments")
    parser = argparse.ArgumentParser(
        description="Learn hyperbolic conservation laws from trajectory data."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="Generate a noisy trajectory dataset")
    gen.add_argument("--problem", type=str, required=True, help="Benchmark id")
    gen.add_argument("--traj", type=int, required=True, help="Training windows")
    gen.add_argument("--noise", type=float, default=0.0, help="Noise level xi")
    gen.add_argument("--seed", type=int, default=0, help="Root random seed")
    gen.add_argument("--out", type=str, required=True, help="Output directory")
    gen.add_argument(
        "--n",
        type=str,
        default=None,
        help="Cells per direction, e.g. '128' or '[32,32]'",
    )
    gen.add_argument(
        "--validation",
        type=int,
        default=VALIDATION_COUNT,
        help="Validation windows",
    )

    fit = commands.add_parser("train", help="Train a model on a dataset")
    fit.add_argument("--data", type=str, required=True, help="Dataset directory")
    fit.add_argument("--config", type=str, default=None, help="TrainConfig JSON file")
    fit.add_argument("--out", type=str, required=True, help="Output directory")
    fit.add_argument(
        "--extra_args", type=str, default=None, help="TrainConfig overrides (JSON)"
    )

    ev = commands.add_parser("eval", help="Evaluate a checkpoint")
    ev.add_argument("--checkpoint", type=str, required=True, help="Checkpoint path")
    ev.add_argument("--problem", type=str, required=True, help="Benchmark id")
    ev.add_argument("--tfinal", type=float, required=True, help="Final time")
    ev.add_argument("--out", type=str, required=True, help="Report directory")
    ev.add_argument(
        "--times", type=str, default=None, help="Snapshot times, e.g. '1,2,3'"
    )

    commands.add_parser("selftest", help="Run the structural invariant checks")

    args = parser.parse_args(argv)
    if getattr(args, "n", None):
        args.n = tuple(int(k) for k in parse_string_to_list(args.n))
    if getattr(args, "times", None) is not None:
        args.times = parse_string_to_list(args.times) or []
    logger.info("Parsed arguments: %s", vars(args))
    return args


def run_workflow(args: argparse.Namespace) -> int:
    """
    Runs the requested subcommand.

    Args:
        args (argparse.Namespace): The parsed command-line arguments.

    Returns:
        int: Process exit code.
    """
    if args.command == "gen":
        dataset = make_dataset(
            args.problem,
            args.traj,
            args.noise,
            args.seed,
            n=args.n,
            validation_count=args.validation,
        )
        save_dataset(dataset, args.out)
    elif args.command == "train":
        cfg = load_config(args.config, process_extra_args(args.extra_args))
        dataset = load_dataset(args.data)
        result = train(dataset, cfg, args.out)
        logger.info(
            "Best validation loss %.6e, best checkpoint %s, final checkpoint %s",
            result.best_val_loss,
            result.best_checkpoint,
            result.final_checkpoint,
        )
    elif args.command == "eval":
        report = evaluate(args.checkpoint, args.problem, args.tfinal, args.times)
        emit_report(report, args.out)
        final_error = float(report.data["error"].values[-1])
        logger.info("Relative L1 error at t=%g: %.6e", args.tfinal, final_error)
    elif args.command == "selftest":
        if not run_selftest():
            print("selftest: one or more checks failed", file=sys.stderr)
            return 1
    return 0


def main(argv: list[str] | None = None) -> int:
    """Runs one subcommand and maps failures to exit code 1."""
    args = parse_arguments(argv)
    try:
        return run_workflow(args)
    except (ValueError, RuntimeError, OSError) as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"{args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    logger.info("Starting the workflow")
    sys.exit(main())
