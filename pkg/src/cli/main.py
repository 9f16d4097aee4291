"""
Command-line entry point: argument parsing, config overrides and exit codes.

Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from ..errors import ConfigValidationError, GeoGlimpseError, WorldGenerationError
from ..model import VARIANTS
from .commands import (
    cmd_ablate,
    cmd_build_dataset,
    cmd_eval,
    cmd_gen_world,
    cmd_hpsearch,
    cmd_params,
    cmd_train,
)
from .run_config import RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

COMMANDS = ('gen-world', 'build-dataset', 'train', 'eval', 'ablate', 'hpsearch', 'params')


class ArgumentParser(argparse.ArgumentParser):
    """Raises on bad arguments so they map to the validation exit code."""

    def error(self, message: str):
        raise ConfigValidationError(message)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog='geoglimpse', description='Sequence-based visual localization pipeline')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=ArgumentParser)

    common = ArgumentParser(add_help=False)
    common.add_argument('--config', type=Path, help='JSON run configuration')
    common.add_argument('--out', type=Path, help='Output directory')
    common.add_argument('--preset', help='World preset (campus, urban)')
    common.add_argument('--model-preset', help='Model preset (full, desk, micro)')
    seeds = common.add_mutually_exclusive_group()
    seeds.add_argument('--seed', type=int, help='Single seed')
    seeds.add_argument('--seeds', type=int, nargs='+', help='Seed list')
    common.add_argument('--variant', choices=VARIANTS, help='Sequence core')
    common.add_argument('--no-recon', action='store_true', help='Disable the GMP reconstruction objective')
    common.add_argument('--jobs', type=int, default=1, help='Worker processes for per-seed training')
    common.add_argument('--progress', action='store_true', help='Force progress bars')

    sub.add_parser('gen-world', parents=[common], help='Generate and export the synthetic world')
    sub.add_parser('build-dataset', parents=[common], help='Simulate sessions and write the dataset')
    sub.add_parser('train', parents=[common], help='Train one model per seed')
    eval_parser = sub.add_parser('eval', parents=[common], help='Stream a held-out session through checkpoints')
    eval_parser.add_argument('--checkpoints', type=Path, nargs='+', help='Checkpoint files (default: training manifest)')
    sub.add_parser('ablate', parents=[common], help='Compare training with and without reconstruction')
    sub.add_parser('hpsearch', parents=[common], help='Grid search on a stratified subset')
    sub.add_parser('params', parents=[common], help='Print the parameter table of the configured model')
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Command-line flags as a partial config document."""
    overrides: Dict[str, Any] = {}
    if args.out is not None:
        overrides['output_dir'] = str(args.out)
    if args.preset is not None:
        overrides['world'] = {'preset': args.preset}
    model: Dict[str, Any] = {}
    if args.model_preset is not None:
        model['preset'] = args.model_preset
    if args.variant is not None:
        model['variant'] = args.variant
    if args.no_recon:
        model['reconstruction_enabled'] = False
    if model:
        overrides['model'] = model
    if args.seed is not None:
        overrides['seeds'] = [args.seed]
    elif args.seeds:
        overrides['seeds'] = list(args.seeds)
    return overrides


def run_command(args: argparse.Namespace, cfg: RunConfig) -> Any:
    show_progress = args.progress or sys.stderr.isatty()
    if args.jobs < 1:
        raise ConfigValidationError(f"--jobs must be at least 1, got {args.jobs}")
    cfg.write(cfg.output_dir / f'config_{args.command}.json')
    if args.command == 'gen-world':
        return cmd_gen_world(cfg)
    if args.command == 'build-dataset':
        return cmd_build_dataset(cfg, show_progress)
    if args.command == 'train':
        return cmd_train(cfg, args.jobs, show_progress)
    if args.command == 'eval':
        return cmd_eval(cfg, args.checkpoints, show_progress)
    if args.command == 'ablate':
        return cmd_ablate(cfg, args.jobs, show_progress)
    if args.command == 'hpsearch':
        return cmd_hpsearch(cfg, args.jobs, show_progress)
    return cmd_params(cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    try:
        args = build_parser().parse_args(list(argv) if argv is not None else None)
        cfg = RunConfig.load(args.config, overrides_from_args(args))
        logger.info(f"Running {args.command} with config {cfg.config_hash}")
        run_command(args, cfg)
    except (ConfigValidationError, WorldGenerationError) as e:
        logger.error(f"Invalid configuration: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (GeoGlimpseError, ValueError, RuntimeError, OSError) as e:
        logger.error(f"Run failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK
