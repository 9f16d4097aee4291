"""
Sequence localization models (recurrent and causal-transformer variants) and their checkpoints.
"""
from .checkpoint import CHECKPOINT_MAGIC, load_checkpoint, read_checkpoint_header, save_checkpoint
from .model_config import VARIANTS, ModelConfig
from .networks import (
    CausalTransformerCore,
    CoordinateHead,
    FrameEncoder,
    GmpDecoder,
    LatentHeads,
    RecurrentCore,
    init_weights,
    reparameterize,
)
from .localizer import LatentState, ModelOutput, SpatialTemporalModel, layer_table, parameter_count

__all__ = [
    'CHECKPOINT_MAGIC', 'CausalTransformerCore', 'CoordinateHead', 'FrameEncoder', 'GmpDecoder',
    'LatentHeads', 'LatentState', 'ModelConfig', 'ModelOutput', 'RecurrentCore',
    'SpatialTemporalModel', 'VARIANTS', 'init_weights', 'layer_table', 'load_checkpoint',
    'parameter_count', 'read_checkpoint_header', 'reparameterize', 'save_checkpoint',
]
