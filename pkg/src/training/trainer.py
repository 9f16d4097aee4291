"""
Optimization loop with KL annealing, validation-based early stopping and reproducible logs.
"""
import copy
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
import torch
from torch.utils.data import DataLoader
from tqdm import tqdm

from ..config import TRAIN_CONFIG
from ..datapipe import SampleSequence, SequenceTensorDataset, stratified_split
from ..errors import ConfigValidationError
from ..geo import GeoBounds
from ..model import ModelConfig, SpatialTemporalModel, save_checkpoint
from .losses import LossBreakdown, beta_schedule, total_loss

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = TRAIN_CONFIG['learning_rate']
    batch_size: int = TRAIN_CONFIG['batch_size']
    max_epochs: int = TRAIN_CONFIG['max_epochs']
    anneal_steps: Optional[int] = TRAIN_CONFIG['anneal_steps']
    patience: int = TRAIN_CONFIG['patience']
    min_delta: float = TRAIN_CONFIG['min_delta']
    val_fraction: float = TRAIN_CONFIG['val_fraction']
    seed: int = TRAIN_CONFIG['seed']
    adam_beta1: float = TRAIN_CONFIG['adam_beta1']
    adam_beta2: float = TRAIN_CONFIG['adam_beta2']
    adam_eps: float = TRAIN_CONFIG['adam_eps']
    grad_clip: Optional[float] = TRAIN_CONFIG['grad_clip']
    max_steps: Optional[int] = TRAIN_CONFIG['max_steps']
    num_workers: int = TRAIN_CONFIG['num_workers']

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigValidationError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")
        if self.patience < 1:
            raise ConfigValidationError(f"patience must be at least 1, got {self.patience}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigValidationError("batch_size and max_epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigValidationError(f"learning_rate must be positive, got {self.learning_rate}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigValidationError(f"Unknown training settings: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class EarlyStopping:
    """
    Stops training when the validation loss has not improved for `patience` epochs.
    """

    def __init__(self, patience: int = 5, delta: float = 0.0):
        """
        Args:
            patience: Non-improving epochs tolerated before stopping
            delta: Minimum decrease that counts as an improvement
        """
        self.patience = patience
        self.delta = delta
        self.counter = 0
        self.best_score: Optional[float] = None
        self.best_epoch: Optional[int] = None
        self.early_stop = False

    def __call__(self, val_loss: float, epoch: int) -> bool:
        """Record an epoch; returns True when it is the new best."""
        if self.best_score is None or val_loss < self.best_score - self.delta:
            self.best_score = val_loss
            self.best_epoch = epoch
            self.counter = 0
            return True
        self.counter += 1
        logger.debug(f"EarlyStopping counter: {self.counter} out of {self.patience}")
        if self.counter >= self.patience:
            self.early_stop = True
        return False


@dataclass
class TrainingResult:
    model: SpatialTemporalModel
    log: List[Dict[str, Any]]
    best_epoch: int
    best_val: Dict[str, float]
    steps: int
    stopped_early: bool


def default_anneal_steps(max_epochs: int, steps_per_epoch: int) -> int:
    """Steps in the first 10% of the epochs."""
    return max(1, int(math.ceil(0.1 * max_epochs)) * steps_per_epoch)


class Trainer:
    def __init__(self, model_config: ModelConfig, train_config: TrainConfig, dtype: torch.dtype = torch.float32,
                 show_progress: bool = False):
        self.model_config = model_config
        self.train_config = train_config
        self.dtype = dtype
        self.show_progress = show_progress
        torch.manual_seed(train_config.seed)
        self.model = SpatialTemporalModel(model_config).to(dtype)
        self.optimizer = torch.optim.Adam(
            self.model.parameters(),
            lr=train_config.learning_rate,
            betas=(train_config.adam_beta1, train_config.adam_beta2),
            eps=train_config.adam_eps,
        )
        self.noise = torch.Generator().manual_seed(train_config.seed + 1)
        self.step = 0
        logger.debug(f"Trainer ready: lr {train_config.learning_rate}, batch {train_config.batch_size}")

    def _loader(self, dataset: SequenceTensorDataset, shuffle: bool) -> DataLoader:
        return DataLoader(
            dataset,
            batch_size=self.train_config.batch_size,
            shuffle=shuffle,
            generator=torch.Generator().manual_seed(self.train_config.seed) if shuffle else None,
            num_workers=self.train_config.num_workers,
        )

    def train_step(self, batch: Dict[str, torch.Tensor], beta: float) -> LossBreakdown:
        self.model.train()
        output = self.model(batch['fpp'], deterministic=False, generator=self.noise)
        losses = total_loss(output, batch, beta)
        losses.check_finite(self.step)
        self.optimizer.zero_grad()
        losses.total.backward()
        if self.train_config.grad_clip:
            torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.train_config.grad_clip)
        self.optimizer.step()
        self.step += 1
        return losses

    @torch.no_grad()
    def evaluate(self, dataset: SequenceTensorDataset) -> Dict[str, float]:
        """Deterministic losses at beta = 1, averaged over sequences.

        Raises:
            NonFiniteLossError: A validation batch produced a NaN or infinite term
        """
        self.model.eval()
        sums: Dict[str, float] = {}
        for batch in self._loader(dataset, shuffle=False):
            losses = total_loss(self.model(batch['fpp'], deterministic=True), batch, beta=1.0)
            losses.check_finite(self.step)
            for key, value in losses.as_floats().items():
                sums[key] = sums.get(key, 0.0) + value * batch['fpp'].size(0)
        return {key: value / len(dataset) for key, value in sums.items()}

    def fit(self, train_sequences: Sequence[SampleSequence], val_sequences: Sequence[SampleSequence],
            log_path: Optional[Path] = None, timing_path: Optional[Path] = None) -> TrainingResult:
        """Train until early stopping, max_epochs or max_steps; keeps the best-validation weights.

        Args:
            train_sequences: Training sequences
            val_sequences: Validation sequences
            log_path: Optional JSONL file receiving one line per epoch
            timing_path: Optional CSV file receiving per-epoch wall time

        Returns:
            TrainingResult holding the best model
        """
        cfg = self.train_config
        train_set = SequenceTensorDataset(train_sequences, dtype=self.dtype)
        val_set = SequenceTensorDataset(val_sequences, dtype=self.dtype)
        loader = self._loader(train_set, shuffle=True)
        anneal = cfg.anneal_steps if cfg.anneal_steps is not None else default_anneal_steps(cfg.max_epochs, len(loader))
        logger.info(f"Training {self.model_config.variant} on {len(train_set)} sequences "
                    f"({len(val_set)} validation), KL annealed over {anneal} steps")

        stopper = EarlyStopping(cfg.patience, cfg.min_delta)
        best_state = copy.deepcopy(self.model.state_dict())
        best_val: Dict[str, float] = {}
        log: List[Dict[str, Any]] = []
        timing = []
        log_file = None
        if log_path is not None:
            Path(log_path).parent.mkdir(parents=True, exist_ok=True)
            log_file = open(log_path, 'w', encoding='utf-8')

        try:
            for epoch in range(cfg.max_epochs):
                started = time.perf_counter()
                sums: Dict[str, float] = {}
                seen = 0
                for batch in tqdm(loader, desc=f"epoch {epoch + 1}", disable=not self.show_progress, leave=False):
                    beta = beta_schedule(self.step, anneal)
                    losses = self.train_step(batch, beta)
                    size = batch['fpp'].size(0)
                    for key, value in losses.as_floats().items():
                        sums[key] = sums.get(key, 0.0) + value * size
                    seen += size
                    if cfg.max_steps is not None and self.step >= cfg.max_steps:
                        break

                val = self.evaluate(val_set)
                record = {'epoch': epoch + 1, 'step': self.step, 'beta': beta_schedule(self.step, anneal)}
                record.update({f'train_{k}': v / max(seen, 1) for k, v in sorted(sums.items())})
                record.update({f'val_{k}': v for k, v in sorted(val.items())})
                log.append(record)
                timing.append({'epoch': epoch + 1, 'wall_time_s': time.perf_counter() - started})
                if log_file is not None:
                    log_file.write(json.dumps(record, sort_keys=True) + '\n')
                    log_file.flush()

                if stopper(val['total'], epoch + 1):
                    best_state = copy.deepcopy(self.model.state_dict())
                    best_val = val
                logger.info(f"Epoch {epoch + 1}: train {record.get('train_total', float('nan')):.4f}, "
                            f"val {val['total']:.4f} (coord {val['coord']:.4f})")
                if stopper.early_stop:
                    logger.info(f"Early stopping after epoch {epoch + 1}; best epoch {stopper.best_epoch}")
                    break
                if cfg.max_steps is not None and self.step >= cfg.max_steps:
                    break
        finally:
            if log_file is not None:
                log_file.close()

        if timing_path is not None:
            pd.DataFrame(timing, columns=['epoch', 'wall_time_s']).to_csv(timing_path, index=False)
        self.model.load_state_dict(best_state)
        return TrainingResult(model=self.model, log=log, best_epoch=stopper.best_epoch or 0,
                              best_val=best_val, steps=self.step, stopped_early=stopper.early_stop)


def validation_split(sequences: Sequence[SampleSequence], fraction: float, seed: int):
    """Stratified validation split on the finest grid that keeps it near the requested size.

    Sparse datasets put one sequence in many cells, and rounding up per cell would
    then move nearly everything into validation.

    Returns:
        (validation, training)
    """
    for grid_size in (8, 4, 2, 1):
        val, rest = stratified_split(sequences, fraction, seed, grid_size=grid_size)
        if rest and len(val) <= max(1, 2 * fraction * len(sequences)):
            return val, rest
    raise ValueError("Validation split left no training sequences")


def train(sequences: Sequence[SampleSequence], model_config: ModelConfig, train_config: TrainConfig,
          out_dir: Optional[Path] = None, bounds: Optional[GeoBounds] = None,
          frame_interval_s: Optional[float] = None, config_hash: Optional[str] = None,
          show_progress: bool = False) -> TrainingResult:
    """Carve off a stratified validation split, train, and optionally write artifacts.

    Artifacts in out_dir: checkpoint.bin, train_log.jsonl, timing.csv.
    """
    if len(sequences) < 2:
        raise ValueError(f"Need at least two sequences to train with validation, got {len(sequences)}")
    val, train_part = validation_split(sequences, train_config.val_fraction, train_config.seed)

    trainer = Trainer(model_config, train_config, show_progress=show_progress)
    out_dir = Path(out_dir) if out_dir is not None else None
    result = trainer.fit(
        train_part, val,
        log_path=out_dir / 'train_log.jsonl' if out_dir else None,
        timing_path=out_dir / 'timing.csv' if out_dir else None,
    )
    if out_dir is not None:
        save_checkpoint(out_dir / 'checkpoint.bin', result.model, step=result.steps, bounds=bounds,
                        frame_interval_s=frame_interval_s, config_hash=config_hash,
                        extra={'seed': train_config.seed, 'best_epoch': result.best_epoch})
    return result
