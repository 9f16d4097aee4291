"""
Grid search: every configuration x seed trained on a stratified subset, ranked by
mean validation coordinate loss.
"""
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..config import SEARCH_CONFIG
from ..datapipe import SampleSequence, resample_sequences, stratified_split
from ..errors import ConfigValidationError
from ..model import ModelConfig
from .trainer import TrainConfig, train

logger = logging.getLogger(__name__)

# Searchable knobs that reshape the data rather than the model or the optimizer
DATA_KEYS = ('seq_len', 'frame_interval_s')


def expand_space(space: Dict[str, Sequence[Any]]) -> List[Dict[str, Any]]:
    """Cartesian product of the search space, keys in sorted order."""
    if not space or any(len(values) == 0 for values in space.values()):
        raise ValueError("Search space must name at least one setting with at least one value")
    model_keys = {f.name for f in fields(ModelConfig)}
    train_keys = {f.name for f in fields(TrainConfig)}
    unknown = set(space) - model_keys - train_keys - set(DATA_KEYS)
    if unknown:
        raise ConfigValidationError(f"Unknown search settings: {sorted(unknown)}")
    keys = sorted(space)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(space[k] for k in keys))]


def _apply(params: Dict[str, Any], model_config: ModelConfig, train_config: TrainConfig,
           seed: int) -> Tuple[ModelConfig, TrainConfig]:
    model_keys = {f.name for f in fields(ModelConfig)}
    train_keys = {f.name for f in fields(TrainConfig)}
    model_config = replace(model_config, **{k: v for k, v in params.items() if k in model_keys})
    train_config = replace(train_config, seed=seed, **{k: v for k, v in params.items() if k in train_keys})
    return model_config, train_config


def run_trial(params: Dict[str, Any], seed: int, sequences: Sequence[SampleSequence],
              model_config: ModelConfig, train_config: TrainConfig, subset_fraction: float,
              source_interval_s: float) -> Dict[str, float]:
    """Train one configuration with one seed on its stratified subset."""
    subset, _ = stratified_split(sequences, subset_fraction, seed)
    if 'seq_len' in params or 'frame_interval_s' in params:
        subset = resample_sequences(subset, params.get('seq_len', model_config.seq_len),
                                    params.get('frame_interval_s', source_interval_s), source_interval_s)
    model_config, train_config = _apply(params, model_config, train_config, seed)
    result = train(subset, model_config, train_config)
    return {
        'val_coord': result.best_val['coord'],
        'val_total': result.best_val['total'],
        'best_epoch': result.best_epoch,
        'steps': result.steps,
        'subset_size': len(subset),
    }


def grid_search(space: Dict[str, Sequence[Any]], sequences: Sequence[SampleSequence],
                model_config: ModelConfig, train_config: TrainConfig,
                subset_fraction: float = SEARCH_CONFIG['subset_fraction'],
                seeds: Sequence[int] = tuple(SEARCH_CONFIG['seeds']),
                source_interval_s: float = 10.0, jobs: int = 1,
                trial_fn: Optional[Callable[..., Dict[str, float]]] = None) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Run the full search.

    Args:
        space: Setting name -> candidate values (model, training or data settings)
        sequences: Full dataset; each seed draws its own stratified subset
        model_config: Base model configuration
        train_config: Base training configuration
        subset_fraction: Share of the data used per trial
        seeds: Seeds repeated for every configuration
        source_interval_s: Frame spacing of the stored sequences
        jobs: Worker processes
        trial_fn: Replacement for run_trial, same signature

    Returns:
        (ranked summary, full per-trial table)
    """
    if not seeds:
        raise ValueError("grid_search needs at least one seed")
    configs = expand_space(space)
    trial_fn = trial_fn or run_trial
    trials = [(i, params, seed) for i, params in enumerate(configs) for seed in seeds]
    logger.info(f"Grid search: {len(configs)} configurations x {len(seeds)} seeds on "
                f"{subset_fraction:.0%} of {len(sequences)} sequences")

    args = [(params, seed, sequences, model_config, train_config, subset_fraction, source_interval_s)
            for _, params, seed in trials]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(trial_fn, *zip(*args)))
    else:
        outcomes = [trial_fn(*a) for a in args]

    rows = []
    for (config_id, params, seed), outcome in zip(trials, outcomes):
        rows.append({'config_id': config_id, 'seed': seed, **params, **outcome})
    full = pd.DataFrame(rows)

    summary = (full.groupby('config_id')['val_coord']
               .agg(mean_val_coord='mean', std_val_coord='std', runs='count')
               .reset_index())
    params_df = pd.DataFrame([{'config_id': i, **params} for i, params in enumerate(configs)])
    ranked = (params_df.merge(summary, on='config_id')
              .sort_values(['mean_val_coord', 'config_id'], kind='mergesort')
              .reset_index(drop=True))
    ranked.insert(0, 'rank', range(1, len(ranked) + 1))
    logger.info(f"Best configuration: {configs[int(ranked.iloc[0]['config_id'])]} "
                f"(mean val coord {ranked.iloc[0]['mean_val_coord']:.4f})")
    return ranked, full
