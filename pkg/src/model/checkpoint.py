"""
Checkpoint container.

Layout: 8-byte magic, u32 little-endian header length, UTF-8 JSON header, then every
trainable parameter as little-endian f32 in `named_parameters()` order. The header
lists names and shapes so a reader can check the block before loading it.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import torch

from ..errors import CheckpointFormatError
from ..geo import GeoBounds
from .model_config import ModelConfig
from .localizer import SpatialTemporalModel, parameter_count

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b'GGLMCKPT'
LENGTH_DTYPE = np.dtype('<u4')


def save_checkpoint(path: Path, model: SpatialTemporalModel, step: int = 0,
                    bounds: Optional[GeoBounds] = None, frame_interval_s: Optional[float] = None,
                    config_hash: Optional[str] = None, extra: Optional[Dict[str, Any]] = None) -> Path:
    named = [(name, p) for name, p in model.named_parameters() if p.requires_grad]
    header = {
        'config': model.config.to_dict(),
        'parameter_count': parameter_count(model),
        'step': int(step),
        'bounds': bounds.to_dict() if bounds is not None else None,
        'frame_interval_s': frame_interval_s,
        'config_hash': config_hash,
        'parameters': [[name, list(p.shape)] for name, p in named],
        'extra': extra or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    block = np.concatenate([p.detach().cpu().numpy().astype('<f4').ravel() for _, p in named])

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(np.array([len(header_bytes)], dtype=LENGTH_DTYPE).tobytes())
        f.write(header_bytes)
        f.write(block.tobytes())
    logger.info(f"Saved checkpoint at step {step} ({header['parameter_count']:,} parameters) to {path}")
    return path


def read_checkpoint_header(data: bytes) -> Tuple[Dict[str, Any], int]:
    """Parse the header; returns it with the offset of the parameter block."""
    prefix = len(CHECKPOINT_MAGIC) + LENGTH_DTYPE.itemsize
    if len(data) < prefix or data[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("Not a checkpoint file (bad magic)")
    length = int(np.frombuffer(data, dtype=LENGTH_DTYPE, count=1, offset=len(CHECKPOINT_MAGIC))[0])
    if len(data) < prefix + length:
        raise CheckpointFormatError(f"Checkpoint header truncated: need {length} bytes")
    try:
        header = json.loads(data[prefix:prefix + length].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointFormatError(f"Checkpoint header is not valid JSON: {e}") from e
    return header, prefix + length


def load_checkpoint(path: Path) -> Tuple[SpatialTemporalModel, Dict[str, Any]]:
    """Rebuild the model from its stored config and copy the parameters in.

    Returns:
        (model, header)
    """
    data = Path(path).read_bytes()
    header, offset = read_checkpoint_header(data)
    model = SpatialTemporalModel(ModelConfig.from_dict(header['config']))
    named = [(name, p) for name, p in model.named_parameters() if p.requires_grad]

    stored = [(name, tuple(shape)) for name, shape in header['parameters']]
    expected = [(name, tuple(p.shape)) for name, p in named]
    if stored != expected:
        raise CheckpointFormatError("Checkpoint parameter layout does not match its configuration")
    total = sum(p.numel() for _, p in named)
    if len(data) - offset != 4 * total:
        raise CheckpointFormatError(
            f"Parameter block holds {len(data) - offset} bytes, expected {4 * total}"
        )

    block = np.frombuffer(data, dtype='<f4', count=total, offset=offset)
    start = 0
    with torch.no_grad():
        for _, p in named:
            chunk = block[start:start + p.numel()].reshape(p.shape)
            p.copy_(torch.from_numpy(chunk.astype(np.float32)))
            start += p.numel()
    logger.info(f"Loaded checkpoint from {path} (step {header['step']})")
    return model, header
