"""
Dataset processing steps: frame extraction, accuracy filtering, sequence assembly.
"""
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TypeVar

import numpy as np
import pandas as pd

from ..config import DATASET_CONFIG
from ..geo import GeoBounds
from .records import FrameRecord, SampleSequence

logger = logging.getLogger(__name__)

T = TypeVar('T')


def extract_frames(stream: Sequence[T], interval_s: float, t0: Optional[float] = None) -> List[T]:
    """Pick the stream item nearest each target time t0 + k * interval_s.

    Items only count when they lie within interval_s / 2 of their target, so gaps in
    the stream yield no records. Works on anything with a `t_s` attribute.

    Args:
        stream: Items with non-decreasing timestamps
        interval_s: Spacing of the target times
        t0: First target time; defaults to the first timestamp

    Returns:
        Selected items in time order, without repeats
    """
    if interval_s <= 0:
        raise ValueError(f"interval_s must be positive, got {interval_s}")
    if len(stream) == 0:
        return []
    times = np.array([item.t_s for item in stream], dtype=np.float64)
    if np.any(np.diff(times) < 0):
        raise ValueError("Stream timestamps must be non-decreasing")

    t0 = times[0] if t0 is None else t0
    n_targets = int(math.floor((times[-1] - t0) / interval_s + 0.5)) + 1
    if n_targets <= 0:
        return []
    targets = t0 + np.arange(n_targets) * interval_s

    right = np.clip(np.searchsorted(times, targets), 0, len(times) - 1)
    left = np.clip(right - 1, 0, len(times) - 1)
    nearest = np.where(np.abs(times[right] - targets) < np.abs(times[left] - targets), right, left)
    within = np.abs(times[nearest] - targets) <= interval_s / 2.0

    selected, last = [], -1
    for idx in nearest[within]:
        if idx != last:
            selected.append(stream[idx])
            last = idx
    logger.debug(f"Extracted {len(selected)} of {n_targets} target frames from {len(stream)} stream items")
    return selected


def filter_accuracy(records: Sequence[T], max_m: float = DATASET_CONFIG['max_accuracy_m']) -> List[T]:
    """Keep records whose reported accuracy is at most max_m (boundary inclusive)."""
    kept = [r for r in records if r.rtk_accuracy_m <= max_m]
    if len(kept) < len(records):
        logger.info(f"Accuracy filter dropped {len(records) - len(kept)} of {len(records)} records (> {max_m} m)")
    return kept


def _contiguous_runs(times: np.ndarray, interval_s: float, tolerance_s: float) -> List[range]:
    runs, start = [], 0
    for i in range(1, len(times)):
        if abs(times[i] - times[i - 1] - interval_s) > tolerance_s:
            runs.append(range(start, i))
            start = i
    runs.append(range(start, len(times)))
    return runs


def build_sequences(records: Sequence[FrameRecord],
                    gmp_source: Callable[[FrameRecord], np.ndarray],
                    bounds: GeoBounds,
                    seq_len: int = DATASET_CONFIG['seq_len'],
                    frame_interval_s: float = DATASET_CONFIG['frame_interval_s'],
                    stride: Optional[int] = None,
                    tolerance_s: float = DATASET_CONFIG['interval_tolerance_s']) -> List[SampleSequence]:
    """Cut time-sorted records into sliding windows of evenly spaced frames.

    Windows never cross a gap (spacing outside frame_interval_s +/- tolerance_s).

    Args:
        records: Time-sorted, accuracy-filtered records
        gmp_source: Renders the overhead target for a record
        bounds: Normalization box for the coordinate targets
        seq_len: Frames per sequence
        frame_interval_s: Expected spacing between frames
        stride: Window step in frames; defaults to seq_len // 2
        tolerance_s: Allowed deviation from frame_interval_s

    Returns:
        Sequences with GMP targets and normalized coordinates
    """
    if seq_len < 1:
        raise ValueError(f"seq_len must be at least 1, got {seq_len}")
    stride = max(1, seq_len // 2) if stride is None else stride
    if stride < 1:
        raise ValueError(f"stride must be at least 1, got {stride}")
    if len(records) < seq_len:
        return []

    times = np.array([r.t_s for r in records], dtype=np.float64)
    gmp_cache: Dict[int, np.ndarray] = {}
    sequences = []
    for run in _contiguous_runs(times, frame_interval_s, tolerance_s):
        for start in range(run.start, run.stop - seq_len + 1, stride):
            indices = range(start, start + seq_len)
            for i in indices:
                if i not in gmp_cache:
                    gmp_cache[i] = gmp_source(records[i])
            frames = [records[i] for i in indices]
            gmp = np.stack([gmp_cache[i] for i in indices])
            sequences.append(SampleSequence.from_frames(frames, gmp, bounds))
    logger.debug(f"Built {len(sequences)} sequences of {seq_len} from {len(records)} records")
    return sequences


def resample_sequences(sequences: Sequence[SampleSequence], seq_len: int, frame_interval_s: float,
                       source_interval_s: float) -> List[SampleSequence]:
    """Derive sequences with a longer frame spacing and/or shorter length.

    Every k-th frame is kept (k = frame_interval_s / source_interval_s) and the
    last seq_len of them form the new sequence; sources that are too short are skipped.
    """
    ratio = frame_interval_s / source_interval_s
    step = int(round(ratio))
    if step < 1 or abs(ratio - step) > 1e-6:
        raise ValueError(
            f"frame_interval_s {frame_interval_s} must be a whole multiple of {source_interval_s}"
        )
    out = []
    for seq in sequences:
        kept = list(range(len(seq)))[::-1][::step][::-1]
        if len(kept) >= seq_len:
            out.append(seq.subset(kept[-seq_len:]))
    logger.debug(f"Resampled {len(sequences)} sequences to {len(out)} of {seq_len} frames every {frame_interval_s}s")
    return out


def export_metadata_csv(sequences: Sequence[SampleSequence], path: Path) -> Path:
    """Per-frame metadata (t_s, lat, lon, accuracy) for external inspection."""
    rows = [
        {'sequence': i, 't_s': f.t_s, 'lat': f.coord.lat_deg, 'lon': f.coord.lon_deg, 'accuracy': f.rtk_accuracy_m}
        for i, seq in enumerate(sequences) for f in seq.frames
    ]
    df = pd.DataFrame(rows, columns=['sequence', 't_s', 'lat', 'lon', 'accuracy'])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format='%.10g')
    logger.info(f"Exported metadata for {len(df)} frames to {path}")
    return path
