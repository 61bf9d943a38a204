# cli.py
"""
Batch front-end.

    python cli.py run --n 16384 --ops 100000 --workload uniform-random --seed 7
    python cli.py experiment coupling --n 4096 --level 3 --ops 100000
    python cli.py experiment overhead-sweep --n 4096..1048576

A `--config FILE` of flat key=value lines supplies defaults; flags win.
Exit codes: 0 ok, 2 acceptance failure, 3 abort event, 4 usage.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import dotenv_values
from pydantic import ValidationError

from core.errors import InsufficientSamples, InvalidConfig, NoConvergence
from core.experiments import (
    EXIT_FAILED,
    EXIT_USAGE,
    EXPERIMENT_KINDS,
    ExperimentConfig,
    run_experiment,
    run_workload,
    sweep_sizes,
)
from core.settings import get_settings

logger = logging.getLogger("cli")

LIST_FIELDS = {"deltas", "resets", "alpha_grid", "seeds", "n_values"}
BOOL_FIELDS = {"strict", "both_rules"}

# (flag, ExperimentConfig field, argparse type, help)
FLAGS = [
    ("--n", "n", str, "memory size in words, or LOW..HIGH for a x4 sweep"),
    ("--block-size", "block_size", int, "words per block"),
    ("--ell", "ell", int, "internal bucket capacity (even)"),
    ("--ell-leaf", "ell_leaf", int, "leaf bucket capacity"),
    ("--q-max", "q_max", int, "queue abort threshold"),
    ("--overflow-rule", "overflow_rule", str, "figure (>= ell/2) or prose (> ell/2)"),
    ("--mutation", "mutation", str, "inject a known flaw into the ORAM"),
    ("--recursion-cutoff", "recursion_cutoff", int, "block count below which the position map stays in the cache"),
    ("--ops", "ops", int, "operations per run"),
    ("--workload", "workload", str, "uniform-random, sequential, hot-spot or scripted-file"),
    ("--workload-a", "workload_a", str, "first workload of a trace comparison"),
    ("--workload-b", "workload_b", str, "second workload of a trace comparison"),
    ("--compare-trials", "compare_trials", int, "runs per workload in a trace comparison"),
    ("--script", "script", str, "op script for the scripted-file workload"),
    ("--hot-address", "hot_address", int, "address hit by the hot-spot workload"),
    ("--trace-format", "trace_format", str, "text or binary"),
    ("--level", "level", int, "tree level coupled to the supermarket"),
    ("--D", "D", int, "number of cashiers"),
    ("--alpha", "alpha", float, "arrival / up-step probability"),
    ("--phi", "phi", int, "upset threshold / visit set lower bound"),
    ("--horizon", "horizon", int, "steps per trial"),
    ("--deltas", "deltas", str, "comma separated deviation factors"),
    ("--K", "K", int, "chain truncation"),
    ("--steps", "steps", int, "steps of a single walk"),
    ("--resets", "resets", str, "comma separated reset counts; the first is the baseline"),
    ("--alpha-grid", "alpha_grid", str, "comma separated alphas for the spectral sweep"),
    ("--seed", "seed", int, "master seed"),
    ("--seeds", "seeds", str, "comma separated seeds for per-seed experiments"),
    ("--trials", "trials", int, "Monte-Carlo trials"),
    ("--workers", "workers", int, "worker processes"),
    ("--output", "output", str, "output file (experiment) or directory (run)"),
    ("--format", "output_format", str, "csv or jsonl"),
]


class LabArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_flags(parser: argparse.ArgumentParser) -> None:
    for flag, dest, kind, help_text in FLAGS:
        parser.add_argument(flag, dest=dest, type=kind, default=argparse.SUPPRESS, help=help_text)
    parser.add_argument("--strict", dest="strict", action="store_true", default=argparse.SUPPRESS,
                        help="stop at the first dominance violation")
    parser.add_argument("--both-rules", dest="both_rules", action="store_true", default=argparse.SUPPRESS,
                        help="report both upset conventions")
    parser.add_argument("--config", default=None, help="flat key=value file with defaults")
    parser.add_argument("--output-dir", default=None, help="directory for result files")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(prog="oram-lab", description="Oblivious RAM lab: workloads and experiments")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=LabArgumentParser)
    run = commands.add_parser("run", help="run a workload through the recursive ORAM")
    _add_flags(run)
    experiment = commands.add_parser("experiment", help="run one experiment")
    experiment.add_argument("kind", choices=EXPERIMENT_KINDS)
    _add_flags(experiment)
    return parser


def _normalise(values: Dict[str, Any]) -> Dict[str, Any]:
    """File keys may use dashes; list fields are comma separated; `n` may be a range."""
    out: Dict[str, Any] = {}
    for key, value in values.items():
        field = key.strip().lstrip("-").replace("-", "_")
        if field == "format":
            field = "output_format"
        if value is None:
            continue
        if field in LIST_FIELDS and isinstance(value, str):
            value = [item.strip() for item in value.split(",") if item.strip()]
        elif field in BOOL_FIELDS and isinstance(value, str):
            value = value.strip().lower() in ("1", "true", "yes", "on")
        elif field == "n" and isinstance(value, str) and ".." in value:
            low, high = (int(part) for part in value.split("..", 1))
            out["n_values"] = sweep_sizes(low, high)
            value = low
        out[field] = value
    return out


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    settings = get_settings()
    merged: Dict[str, Any] = {"seed": settings.master_seed, "workers": settings.workers}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise InvalidConfig(f"config file {path} not found")
        merged.update(_normalise(dotenv_values(path)))
    fields = {dest for _, dest, _, _ in FLAGS} | BOOL_FIELDS
    merged.update(_normalise({k: v for k, v in vars(args).items() if k in fields}))
    return ExperimentConfig(**merged)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_settings()
    logging.basicConfig(level=(args.log_level or settings.log_level).upper(),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(args)
        output_dir = Path(args.output_dir) if args.output_dir else settings.output_dir
        if args.command == "run":
            target = Path(config.output) if config.output else output_dir / f"run-{config.seed}"
            outcome = run_workload(config, target)
            print(json.dumps({"exit_code": outcome.exit_code, "mismatches": outcome.mismatches,
                              "abort": outcome.abort, "outputs": outcome.outputs}))
            return outcome.exit_code
        result = run_experiment(args.kind, config, output_dir)
        print(json.dumps({"kind": result.kind, "passed": result.passed, "output": result.output}))
        return result.exit_code
    except (ValidationError, InvalidConfig, InsufficientSamples, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    except NoConvergence as e:
        logger.error(f"Numerical routine did not converge: {e}")
        return EXIT_FAILED
    except OSError as e:
        logger.error(f"I/O error: {e}", exc_info=True)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
