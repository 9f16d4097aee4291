"""
Command-line interface: run configuration, pipeline commands and the entry point.
"""
from .commands import (
    EvalRun,
    HeldOutSession,
    build_dataset,
    cmd_ablate,
    cmd_build_dataset,
    cmd_eval,
    cmd_gen_world,
    cmd_hpsearch,
    cmd_params,
    cmd_train,
    evaluate_runs,
    load_or_build_dataset,
    render_test_session,
    resolve_max_threshold,
    run_tag,
    simulate_session,
    train_runs,
)
from .main import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, build_parser, main, overrides_from_args
from .run_config import RunConfig, config_hash, deep_merge, default_document

__all__ = [
    'EXIT_INVALID', 'EXIT_OK', 'EXIT_RUNTIME', 'EvalRun', 'HeldOutSession', 'RunConfig',
    'build_dataset', 'build_parser', 'cmd_ablate', 'cmd_build_dataset', 'cmd_eval', 'cmd_gen_world',
    'cmd_hpsearch', 'cmd_params', 'cmd_train', 'config_hash', 'deep_merge', 'default_document',
    'evaluate_runs', 'load_or_build_dataset', 'main', 'overrides_from_args', 'render_test_session',
    'resolve_max_threshold', 'run_tag', 'simulate_session', 'train_runs',
]
