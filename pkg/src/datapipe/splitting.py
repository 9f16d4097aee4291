"""
Spatially stratified sampling of sequences.
"""
import logging
import math
from collections import defaultdict
from typing import List, Sequence, Tuple

import numpy as np

from ..config import DATASET_CONFIG
from .records import SampleSequence

logger = logging.getLogger(__name__)


def grid_cell(u: float, v: float, grid_size: int) -> Tuple[int, int]:
    """Grid cell of a normalized coordinate; points outside [0, 1] fall in the edge cells."""
    row = min(max(int(math.floor(u * grid_size)), 0), grid_size - 1)
    col = min(max(int(math.floor(v * grid_size)), 0), grid_size - 1)
    return row, col


def stratified_split(sequences: Sequence[SampleSequence], fraction: float, seed: int,
                     grid_size: int = DATASET_CONFIG['split_grid']
                     ) -> Tuple[List[SampleSequence], List[SampleSequence]]:
    """Split sequences by the map cell of their final coordinate.

    Within each non-empty cell, ceil(fraction * n) sequences are drawn without
    replacement; both parts keep the original order.

    Returns:
        (subset, remainder)
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    if grid_size < 1:
        raise ValueError(f"grid_size must be at least 1, got {grid_size}")

    cells = defaultdict(list)
    for i, seq in enumerate(sequences):
        u, v = seq.norm_coords[-1]
        cells[grid_cell(u, v, grid_size)].append(i)

    rng = np.random.default_rng(seed)
    chosen = set()
    for cell in sorted(cells):
        members = cells[cell]
        k = min(len(members), int(math.ceil(fraction * len(members) - 1e-12)))
        if k:
            chosen.update(int(i) for i in rng.choice(members, size=k, replace=False))

    subset = [seq for i, seq in enumerate(sequences) if i in chosen]
    remainder = [seq for i, seq in enumerate(sequences) if i not in chosen]
    logger.debug(f"Stratified split over {len(cells)} cells: {len(subset)} / {len(remainder)}")
    return subset, remainder
