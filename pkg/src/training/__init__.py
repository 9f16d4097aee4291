"""
Training: the loss terms, KL annealing, the optimization loop and grid search.
"""
from .losses import LossBreakdown, beta_schedule, coord_loss, kl_loss, recon_loss, total_loss
from .search import expand_space, grid_search, run_trial
from .trainer import (
    EarlyStopping,
    TrainConfig,
    Trainer,
    TrainingResult,
    default_anneal_steps,
    train,
    validation_split,
)

__all__ = [
    'EarlyStopping', 'LossBreakdown', 'TrainConfig', 'Trainer', 'TrainingResult', 'beta_schedule',
    'coord_loss', 'default_anneal_steps', 'expand_space', 'grid_search', 'kl_loss', 'recon_loss',
    'run_trial', 'total_loss', 'train', 'validation_split',
]
