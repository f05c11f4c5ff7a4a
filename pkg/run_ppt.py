#!/usr/bin/env python3
"""
Command-line interface for pre-training, prompt tuning, evaluation, sweeps
and prompt interpretation.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from config.seeds import SWEEP_AXES
from config.settings import RunConfig, default_out_dir, load_config
from errors import NumericDomainError, PPTError
from orchestrator.checkpoint import read_checkpoint
from orchestrator.reporter import format_interpretation, format_sweep_table, generate_report
from orchestrator.runner import ExperimentRunner

# Load environment variables
load_dotenv()

EXIT_OK = 0
EXIT_FAILED_CELLS = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run configuration (flat YAML)")
    common.add_argument("--seed", type=int, help="Override the init seed")
    common.add_argument("--out-dir", default=None, help="Output directory (default: $PPT_OUT_DIR or runs)")
    common.add_argument("--dry-run", action="store_true", help="Validate and print parameter counts only")
    source = common.add_mutually_exclusive_group()
    source.add_argument("--data-root", default=None, help="OFF directory <root>/<class>/<split>/*.off")
    source.add_argument("--synthetic", action="store_true", help="Use the synthetic shape suite")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(description="Prompt tuning over a frozen tri-modal backbone")
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    subparsers.add_parser("pretrain", parents=[common], help="Contrastive pre-training of the point encoder")

    tune_parser = subparsers.add_parser("tune", parents=[common], help="Tune prompts and adapter")
    tune_parser.add_argument("--checkpoint", help="Pre-trained backbone checkpoint")

    eval_parser = subparsers.add_parser("eval", parents=[common], help="Evaluate a tuned checkpoint")
    eval_parser.add_argument("--checkpoint", required=True, help="Tuned checkpoint")
    eval_parser.add_argument("--templates", action="store_true", help="Also report every manual prompt")

    sweep_parser = subparsers.add_parser("sweep", parents=[common], help="Tune once per value of one axis")
    sweep_parser.add_argument("--axis", required=True, choices=list(SWEEP_AXES), help="Swept axis")
    sweep_parser.add_argument("--checkpoint", help="Pre-trained backbone checkpoint")
    sweep_parser.add_argument("--workers", type=int, default=1, help="Parallel sweep cells")

    interpret_parser = subparsers.add_parser("interpret", parents=[common], help="Nearest words of learned contexts")
    interpret_parser.add_argument("--checkpoint", required=True, help="Tuned checkpoint")
    return parser


def resolve_config(args) -> RunConfig:
    """Config from --config (or the checkpoint for eval/interpret) with flag overrides."""
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.data_root:
        overrides.update(dataset="off", data_root=args.data_root)
    elif args.synthetic:
        overrides["dataset"] = "synthetic"

    if args.config:
        return load_config(args.config, **overrides)
    if getattr(args, "checkpoint", None) and args.command in ("eval", "interpret"):
        return read_checkpoint(args.checkpoint).run_config.with_overrides(**overrides)
    raise FileNotFoundError(f"{args.command} needs --config")


def run(args) -> int:
    cfg = resolve_config(args)
    out_dir = args.out_dir or default_out_dir()
    runner = ExperimentRunner(cfg, out_dir)

    if args.dry_run:
        summary = runner.dry_run()
        print(generate_report(f"DRY RUN: {cfg.mode}", summary))
        if summary["expected_learnable"] is not None:
            print(f"Closed-form expectation: {summary['expected_learnable']:,}")
        return EXIT_OK

    if args.command == "pretrain":
        print(f"\nPre-training for {cfg.steps} steps...\n")
        summary = runner.run_pretrain()
        print(generate_report("PRE-TRAINING REPORT", summary))

    elif args.command == "tune":
        if not args.checkpoint:
            logging.getLogger(__name__).warning("No --checkpoint given; tuning on a randomly initialized backbone")
        print(f"\nTuning ({cfg.adapter} adapter, M={cfg.context_length}) for {cfg.steps} steps...\n")
        summary = runner.run_tune(args.checkpoint)
        print(generate_report("PROMPT TUNING REPORT", summary, summary["class_names"]))

    elif args.command == "eval":
        summary = runner.run_eval(args.checkpoint, templates=args.templates)
        print(generate_report("EVALUATION REPORT", summary, summary["class_names"]))

    elif args.command == "sweep":
        print(f"\nSweeping {args.axis} over {SWEEP_AXES[args.axis]}...\n")
        rows = runner.run_sweep(args.axis, args.checkpoint, args.workers)
        print(format_sweep_table(args.axis, rows))
        print(f"\nResults saved to {os.path.join(out_dir, f'sweep_{args.axis}.json')}")
        if any("error" in row for row in rows):
            return EXIT_FAILED_CELLS

    elif args.command == "interpret":
        print(format_interpretation(runner.interpret(args.checkpoint)))

    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except ValidationError as e:
        print("Error: invalid configuration")
        for err in e.errors():
            print(f"  {'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}")
        return EXIT_USAGE
    except NumericDomainError as e:
        print(f"Error: numeric failure: {e}")
        return EXIT_NUMERIC
    except (PPTError, FileNotFoundError, yaml.YAMLError) as e:
        print(f"Error: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
