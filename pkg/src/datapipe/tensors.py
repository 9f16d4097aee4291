"""
Torch view of a list of sequences.
"""
import logging
from typing import Dict, Sequence

import numpy as np
import torch
from torch.utils.data import Dataset

from .records import SampleSequence

logger = logging.getLogger(__name__)


class SequenceTensorDataset(Dataset):
    """Serves (fpp, gmp, coords) tensors per sequence.

    Frames shared by overlapping windows are stored once; images stay uint8 until
    a sequence is requested.
    """

    def __init__(self, sequences: Sequence[SampleSequence], dtype: torch.dtype = torch.float32):
        if not sequences:
            raise ValueError("SequenceTensorDataset needs at least one sequence")
        self.dtype = dtype
        bank_index: Dict[tuple, int] = {}
        fpp_bank, gmp_bank = [], []
        self._indices = np.empty((len(sequences), len(sequences[0])), dtype=np.int64)
        for s, seq in enumerate(sequences):
            if len(seq) != self._indices.shape[1]:
                raise ValueError(f"Sequence {s} has {len(seq)} frames, expected {self._indices.shape[1]}")
            for t, (frame, gmp) in enumerate(zip(seq.frames, seq.gmp_targets)):
                key = frame.key
                if key not in bank_index:
                    bank_index[key] = len(fpp_bank)
                    fpp_bank.append(frame.fpp)
                    gmp_bank.append(gmp)
                self._indices[s, t] = bank_index[key]
        self._fpp = torch.from_numpy(np.stack(fpp_bank)).permute(0, 3, 1, 2).contiguous()
        self._gmp = torch.from_numpy(np.stack(gmp_bank)).permute(0, 3, 1, 2).contiguous()
        self._coords = torch.from_numpy(np.stack([seq.norm_coords for seq in sequences])).to(dtype)
        logger.debug(f"Tensor dataset: {len(sequences)} sequences over {len(fpp_bank)} unique frames")

    def __len__(self) -> int:
        return self._indices.shape[0]

    @property
    def unique_frames(self) -> int:
        return self._fpp.shape[0]

    def __getitem__(self, idx: int) -> Dict[str, torch.Tensor]:
        frames = torch.from_numpy(self._indices[idx])
        return {
            'fpp': self._fpp[frames].to(self.dtype) / 255.0,
            'gmp': self._gmp[frames].to(self.dtype) / 255.0,
            'coords': self._coords[idx],
        }
