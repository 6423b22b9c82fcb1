"""Define the command-line interface."""
import argparse
import logging
from pathlib import Path
import sys
from typing import Callable, Dict, Optional, Sequence

from cgrlpy.causal.entropy import (
    DEFAULT_ALPHA,
    conditional_mi,
    gram,
    mutual_information,
    renyi_entropy,
)
from cgrlpy.errors import CgrlError, ConfigError
from cgrlpy.harness.config import TASKS, load_config
from cgrlpy.harness.models import MODELS
from cgrlpy.harness.render import load_trajectory, render_trajectory
from cgrlpy.harness.report import collect_reports, export_table, read_sample_table
from cgrlpy.harness.runner import run_eval, run_training, write_eval_outputs

_LOGGER: logging.Logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _train(args: argparse.Namespace) -> None:
    config = load_config(args.config).with_overrides(
        model=args.model, task=args.task, seed=args.seed, episodes=args.episodes
    )
    for seed in config.seeds:
        out = Path(args.out)
        if len(config.seeds) > 1:
            out = out / f"seed-{seed}"
        run = run_training(config, out, seed=seed)
        print(run.checkpoint)


def _eval(args: argparse.Namespace) -> None:
    if args.checkpoint is None and not args.random:
        raise ConfigError("eval needs --checkpoint (or --random with --config)")
    config = None
    if args.checkpoint is None:
        config = load_config(args.config)
    result = run_eval(
        args.checkpoint,
        task=args.task,
        episodes=args.episodes,
        seed=args.seed,
        record=args.record,
        random_policy=args.random,
        config=config,
    )
    out = args.out
    if out is None:
        out = Path(args.checkpoint).parent if args.checkpoint else Path(".")
    write_eval_outputs(result, out)
    report = result.report
    print(
        f"{report.model} {report.task}: C.R. {report.collision_rate:.2f} "
        f"A.R. {report.average_reward:.2f} A.V. {report.average_velocity:.2f}"
    )


def _report(args: argparse.Namespace) -> None:
    table = export_table(collect_reports(args.in_dir))
    if args.out is None:
        print(table, end="")
    else:
        Path(args.out).write_text(table, encoding="utf-8")


def _render(args: argparse.Namespace) -> None:
    frames = render_trajectory(load_trajectory(args.log), args.out)
    print(f"{len(frames)} frames written to {args.out}")


def _mi_estimate(args: argparse.Namespace) -> None:
    try:
        text = Path(args.input).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"Cannot read {args.input}: {err}") from None
    blocks = read_sample_table(text)
    names = list(blocks)
    for name in names:
        entropy = renyi_entropy(gram(blocks[name]), args.alpha).item()
        print(f"S({name}) = {entropy:.6f}")
    if len(names) < 2:
        _LOGGER.warning("Only one block (%s); no mutual information to estimate", names)
        return
    first, second = names[:2]
    value = mutual_information(blocks[first], blocks[second], args.alpha).item()
    print(f"I({first}; {second}) = {value:.6f}")
    if len(names) > 2:
        third = names[2]
        value = conditional_mi(
            blocks[first], blocks[second], blocks[third], args.alpha
        ).item()
        print(f"I({first}; {second} | {third}) = {value:.6f}")
    if len(names) > 3:
        _LOGGER.warning("Ignoring blocks beyond the third: %s", names[3:])


COMMANDS: Dict[str, Callable[[argparse.Namespace], None]] = {
    "train": _train,
    "eval": _eval,
    "report": _report,
    "render": _render,
    "mi-estimate": _mi_estimate,
}


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser of every subcommand."""
    parser = argparse.ArgumentParser(
        prog="cgrl", description="Causal graph reinforcement learning at intersections"
    )
    parser.add_argument("--debug", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train one model on one task")
    train.add_argument("--config", help="INI configuration (defaults without one)")
    train.add_argument("--model", choices=list(MODELS))
    train.add_argument("--task", choices=TASKS)
    train.add_argument("--seed", type=int)
    train.add_argument("--episodes", type=int, help="override the episode budget")
    train.add_argument("--out", required=True, help="output directory")

    evaluate = commands.add_parser("eval", help="evaluate a checkpoint greedily")
    evaluate.add_argument("--checkpoint")
    evaluate.add_argument("--task", choices=TASKS)
    evaluate.add_argument("--episodes", type=int)
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--out", help="output directory")
    evaluate.add_argument(
        "--record", type=int, default=0, help="record the first K episodes"
    )
    evaluate.add_argument(
        "--random", action="store_true", help="act uniformly at random"
    )
    evaluate.add_argument(
        "--config", help="configuration for --random without a checkpoint"
    )

    report = commands.add_parser("report", help="tabulate evaluation reports")
    report.add_argument("--in", dest="in_dir", required=True)
    report.add_argument("--out")

    render = commands.add_parser("render", help="draw a recorded episode as SVG")
    render.add_argument("--log", required=True)
    render.add_argument("--out", required=True)

    estimate = commands.add_parser("mi-estimate", help="estimate Renyi information")
    estimate.add_argument("--input", required=True)
    estimate.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line and return the exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.INFO, format=LOG_FORMAT
    )
    try:
        COMMANDS[args.command](args)
    except CgrlError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0
