"""Command-line interface entry point for equilib."""

from __future__ import annotations

import argparse
import sys
from collections.abc import Sequence
from typing import Any

from equilib import __version__, config, pipelines
from equilib.equilibrium import ALGORITHM_KINDS
from equilib.equilibrium.suites import SUITES
from equilib.errors import EquilibCLIError, EquilibError


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise EquilibCLIError(message, hint="Run `equilib --help` for usage.")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Run config (TOML)")
    parser.add_argument("--out", help="Output root for every artifact of the run")
    parser.add_argument(
        "--overwrite",
        action="store_true",
        help="Reuse an output root that already holds a run",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="Log progress to stderr")


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="equilib",
        description="equilib command-line interface",
        add_help=False,
    )
    parser.add_argument(
        "--version",
        "-V",
        action="version",
        version=__version__,
        help="Show version and exit",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    generate = subparsers.add_parser("generate", help="Generate a Pathfinder dataset")
    _add_common(generate)
    generate.add_argument("--n", type=int, required=True, help="Number of samples")
    generate.add_argument("--seed", type=int, help="First sample seed (pathfinder.seed)")

    train = subparsers.add_parser("train", help="Train a recurrent model")
    _add_common(train)
    train.add_argument("--data", help="Training dataset directory (data.train)")
    train.add_argument("--test-data", dest="test_data", help="Held-out dataset (data.test)")
    train.add_argument("--epochs", type=int, help="Override training.epochs")
    train.add_argument("--seed", type=int, help="Override training.seed")

    evaluate = subparsers.add_parser("eval", help="Per-step IoU of a checkpoint")
    _add_common(evaluate)
    evaluate.add_argument("--ckpt", required=True, help="Checkpoint directory")
    evaluate.add_argument("--data", required=True, help="Dataset directory")
    evaluate.add_argument("--steps", help="Steps to score: t, a,b,c or A..B")
    evaluate.add_argument("--limit", type=int, help="Use only the first LIMIT samples")
    evaluate.add_argument(
        "--maps", action="store_true", help="Write per-step probability maps of the first image"
    )

    analyze = subparsers.add_parser("analyze", help="State-space analysis of a checkpoint")
    _add_common(analyze)
    analyze.add_argument("--ckpt", required=True, help="Checkpoint directory")
    analyze.add_argument("--data", required=True, help="Dataset directory")
    analyze.add_argument("--N", dest="N", type=int, help="Training steps N (PCA fit range)")
    analyze.add_argument("--T", dest="T", type=int, help="Analysis horizon T >= N")
    analyze.add_argument("--limit", type=int, help="Use only the first LIMIT samples")
    analyze.add_argument("--plot", action="store_true", help="Write a PNG scatter of the projections")
    analyze.add_argument("--compare", help="Second checkpoint; KS-test its distances against these")
    analyze.add_argument("--pairs", type=int, help="Contraction-ratio perturbation pairs at h_N")

    gradcheck = subparsers.add_parser("gradcheck", help="Run a gradient-check suite")
    _add_common(gradcheck)
    gradcheck.add_argument("--suite", choices=SUITES, required=True, help="Suite to run")
    gradcheck.add_argument("--seed", type=int, help="Seed for the random systems")

    memreport = subparsers.add_parser("memreport", help="Saved-activation bytes per algorithm")
    _add_common(memreport)
    memreport.add_argument("--algorithm", required=True, help="Comma-separated algorithms")
    memreport.add_argument("--steps", required=True, help="Comma-separated step counts")

    config_parser = subparsers.add_parser("config", help="Inspect configuration values")
    config_subparsers = config_parser.add_subparsers(dest="config_command", parser_class=_ArgumentParser)
    show = config_subparsers.add_parser("show", help="Show effective configuration values")
    show.add_argument("--config", help="Run config (TOML)")

    return parser


def _print_help() -> None:
    print("equilib command-line interface")
    print("")
    print("Usage:")
    print("  equilib <command> [options]")
    print("")
    print("Commands:")
    print("  generate              Generate a Pathfinder dataset")
    print("  train                 Train a recurrent model")
    print("  eval                  Per-step IoU of a checkpoint")
    print("  analyze               State-space analysis of a checkpoint")
    print("  gradcheck             Run a gradient-check suite")
    print("  memreport             Saved-activation bytes per algorithm and step count")
    print("  config show           Show effective configuration values")
    print("")
    print("Options:")
    print("  -h, --help            Show this help message and exit")
    print("  -V, --version         Show version and exit")
    print("")
    print("Common options:")
    print("    --config FILE       Run config (TOML)")
    print("    --out DIR           Output root for every artifact of the run")
    print("    --overwrite         Reuse an output root that already holds a run")
    print("    -v, --verbose       Log progress to stderr")
    print("")
    print("Command options:")
    print("  generate:")
    print("    --n INT             (required) Number of samples")
    print("    --seed INT          First sample seed")
    print("  train:")
    print("    --data DIR          Training dataset (data.train)")
    print("    --test-data DIR     Held-out dataset (data.test)")
    print("    --epochs INT        Override training.epochs")
    print("    --seed INT          Override training.seed")
    print("  eval:")
    print("    --ckpt DIR          (required) Checkpoint directory")
    print("    --data DIR          (required) Dataset directory")
    print("    --steps A..B        Steps to score (default: the checkpoint's N)")
    print("    --limit INT         Use only the first LIMIT samples")
    print("    --maps              Write per-step probability maps of the first image")
    print("  analyze:")
    print("    --ckpt DIR          (required) Checkpoint directory")
    print("    --data DIR          (required) Dataset directory")
    print("    --N INT             PCA fit range 1..N (default: the checkpoint's N)")
    print("    --T INT             Analysis horizon (default: training.analysis_horizon)")
    print("    --plot              Write a PNG scatter of the projections")
    print("    --compare DIR       Second checkpoint; KS-test the two distance sets")
    print("    --pairs INT         Contraction-ratio perturbation pairs at h_N")
    print("  gradcheck:")
    print(f"    --suite NAME        (required) One of {', '.join(SUITES)}")
    print("  memreport:")
    print(f"    --algorithm LIST    (required) Any of {', '.join(ALGORITHM_KINDS)}")
    print("    --steps LIST        (required) Step counts, e.g. 20,40,80")
    print("")
    print("Config keys (TOML sections; env EQUILIB_<SECTION>_<KEY>):")
    rows = config.describe_keys()
    width = max(len(key) for key, _, _ in rows)
    for key, default, text in rows:
        print(f"  {key.ljust(width)}  {text} (default {default})")
    print("")
    print("Environment:")
    print(f"  {config.THREADS_ENV}       Worker thread cap for generation and evaluation")
    print("")
    print("Exit codes: 0 ok, 2 config error, 3 I/O error, 4 numerical failure")


def _normalize_cli_options(namespace: argparse.Namespace) -> dict[str, Any]:
    cli_options = {
        key: value
        for key, value in vars(namespace).items()
        if key not in {"command", "config_command"}
    }
    return {key: value for key, value in cli_options.items() if value is not None}


def main(argv: Sequence[str] | None = None) -> None:
    parser = _build_parser()
    args_list = list(argv) if argv is not None else sys.argv[1:]
    if not args_list or "-h" in args_list or "--help" in args_list:
        _print_help()
        return

    handlers: dict[str, Any] = {
        "generate": pipelines.run_generate,
        "train": pipelines.run_train,
        "eval": pipelines.run_eval,
        "analyze": pipelines.run_analyze,
        "gradcheck": pipelines.run_gradcheck,
        "memreport": pipelines.run_memreport,
        "config": None,
    }

    try:
        args = parser.parse_args(args_list)
        command = args.command
        cli_options = _normalize_cli_options(args)
        if command == "config":
            config_command = args.config_command or "show"
            if config_command == "show":
                pipelines.run_config_show(cli_options)
            else:  # pragma: no cover - argparse enforces choices
                raise EquilibCLIError(f"Unknown config command: {config_command}")
            return

        handler = handlers[command]
        handler(cli_options)
    except EquilibError as exc:
        print(f"equilib: error: {exc}", file=sys.stderr)
        hint = getattr(exc, "hint", None)
        if hint:
            print(f"equilib: hint: {hint}", file=sys.stderr)
        sys.exit(exc.exit_code)


if __name__ == "__main__":  # pragma: no cover
    main()
