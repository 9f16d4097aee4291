"""
Dataset record types: timestamped frames, training sequences and the container header.
"""
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from ..geo import GeoBounds, GeoCoordinate, normalize_array

DATASET_MAGIC = b'GEOGLIMP'
DATASET_VERSION = 1


@dataclass(frozen=True, eq=False)
class FrameRecord:
    t_s: float
    fpp: np.ndarray             # (H, W, 3) uint8
    coord: GeoCoordinate
    rtk_accuracy_m: float

    def __post_init__(self):
        if self.rtk_accuracy_m < 0:
            raise ValueError(f"rtk_accuracy_m must be non-negative, got {self.rtk_accuracy_m}")
        if self.fpp.dtype != np.uint8 or self.fpp.ndim != 3 or self.fpp.shape[2] != 3:
            raise ValueError(f"FPP image must be (H, W, 3) uint8, got {self.fpp.shape} {self.fpp.dtype}")

    @property
    def key(self) -> Tuple[float, float, float]:
        """Identity of the underlying frame, shared by overlapping windows."""
        return (self.t_s, self.coord.lat_deg, self.coord.lon_deg)


@dataclass(frozen=True, eq=False)
class SampleSequence:
    frames: List[FrameRecord]
    gmp_targets: np.ndarray     # (L, H, W, 3) uint8
    norm_coords: np.ndarray     # (L, 2) float64, columns (u, v)

    def __post_init__(self):
        n = len(self.frames)
        if n == 0:
            raise ValueError("A sequence needs at least one frame")
        if self.gmp_targets.shape[0] != n or self.norm_coords.shape != (n, 2):
            raise ValueError(
                f"Sequence of {n} frames has {self.gmp_targets.shape[0]} GMP targets "
                f"and coordinates of shape {self.norm_coords.shape}"
            )

    def __len__(self) -> int:
        return len(self.frames)

    @classmethod
    def from_frames(cls, frames: List[FrameRecord], gmp_targets: np.ndarray, bounds: GeoBounds) -> 'SampleSequence':
        lat = np.array([f.coord.lat_deg for f in frames])
        lon = np.array([f.coord.lon_deg for f in frames])
        return cls(list(frames), np.asarray(gmp_targets, dtype=np.uint8), normalize_array(lat, lon, bounds))

    def fpp_stack(self) -> np.ndarray:
        return np.stack([f.fpp for f in self.frames])

    def subset(self, indices) -> 'SampleSequence':
        indices = list(indices)
        return SampleSequence([self.frames[i] for i in indices], self.gmp_targets[indices], self.norm_coords[indices])


@dataclass(frozen=True)
class DatasetHeader:
    bounds: GeoBounds
    fpp_size: Tuple[int, int]           # (W, H)
    gmp_size: Tuple[int, int]           # (W, H)
    frame_interval_s: float
    seq_len: int
    record_count: int = 0
    version: int = DATASET_VERSION
    magic: bytes = field(default=DATASET_MAGIC)

    def __post_init__(self):
        dims = (*self.fpp_size, *self.gmp_size, self.seq_len)
        if any(int(d) <= 0 for d in dims):
            raise ValueError(f"Dataset dimensions must be positive, got fpp {self.fpp_size}, "
                             f"gmp {self.gmp_size}, seq_len {self.seq_len}")
        if len(self.magic) != 8:
            raise ValueError("Dataset magic must be exactly 8 bytes")

    @property
    def sequence_count(self) -> int:
        return self.record_count // self.seq_len
