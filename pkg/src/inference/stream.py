"""
Streaming localization over a continuous first-person feed.
"""
import logging
import time
from collections import deque
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional, Protocol, Sequence, Tuple

import numpy as np
import torch

from ..config import INFERENCE_CONFIG
from ..errors import NonMonotonicTimestampError
from ..evaluation.trace import LocalizationTrace, TraceEntry
from ..geo import GeoBounds, GeoCoordinate, NormalizedCoordinate, denormalize, deviation_meters

logger = logging.getLogger(__name__)


class CoordinatePredictor(Protocol):
    def predict_coords(self, frames: torch.Tensor) -> torch.Tensor:
        """(B, L, 3, H, W) frames in [0, 1] -> (B, L, 2) normalized coordinates."""


class FrameBuffer:
    """Bounded window of admitted frames, decimating a fast feed to the trained cadence."""

    def __init__(self, capacity: int, frame_interval_s: float,
                 admit_tolerance_s: float = INFERENCE_CONFIG['admit_tolerance_s']):
        if capacity < 1:
            raise ValueError(f"capacity must be at least 1, got {capacity}")
        self.capacity = capacity
        self.frame_interval_s = frame_interval_s
        self.admit_tolerance_s = admit_tolerance_s
        self.entries: deque = deque(maxlen=capacity)
        self.last_pushed: Optional[float] = None
        self.last_admitted: Optional[float] = None
        logger.debug(f"Frame buffer: capacity {capacity}, interval {frame_interval_s}s")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def full(self) -> bool:
        return len(self.entries) == self.capacity

    def push(self, t_s: float, image: np.ndarray) -> bool:
        """Offer a frame; returns True when it was admitted."""
        if self.last_pushed is not None and t_s <= self.last_pushed:
            raise NonMonotonicTimestampError(t_s, self.last_pushed)
        self.last_pushed = t_s
        if self.last_admitted is not None and t_s - self.last_admitted < self.frame_interval_s - self.admit_tolerance_s:
            return False
        self.entries.append((t_s, image))
        self.last_admitted = t_s
        return True

    def timestamps(self) -> Tuple[float, ...]:
        return tuple(t for t, _ in self.entries)

    def as_tensor(self) -> torch.Tensor:
        """(1, L, 3, H, W) float tensor in [0, 1]."""
        images = np.stack([image for _, image in self.entries])
        return torch.from_numpy(images).permute(0, 3, 1, 2).unsqueeze(0).to(torch.float32) / 255.0


@dataclass(frozen=True)
class Prediction:
    t_s: float
    coord: GeoCoordinate
    normalized: NormalizedCoordinate
    warm_up: bool
    inference_ms: float


class StreamLocalizer:
    """Owns one frame buffer and turns admitted frames into geographic predictions."""

    def __init__(self, model: CoordinatePredictor, bounds: GeoBounds, capacity: int, frame_interval_s: float,
                 min_frames: int = INFERENCE_CONFIG['min_frames'],
                 admit_tolerance_s: float = INFERENCE_CONFIG['admit_tolerance_s']):
        self.model = model
        self.bounds = bounds
        self.min_frames = min_frames
        self.buffer = FrameBuffer(capacity, frame_interval_s, admit_tolerance_s)

    def push(self, t_s: float, image: np.ndarray) -> Optional[Prediction]:
        """Offer a frame; a prediction comes back whenever the frame is admitted and enough are buffered."""
        if not self.buffer.push(t_s, image):
            return None
        return self.predict()

    def predict(self) -> Optional[Prediction]:
        """Final-step prediction over the buffered prefix, or None below min_frames."""
        if len(self.buffer) < self.min_frames:
            return None
        frames = self.buffer.as_tensor()
        started = time.perf_counter()
        coords = self.model.predict_coords(frames)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        u, v = (float(c) for c in coords[0, -1])
        normalized = NormalizedCoordinate(u, v)
        return Prediction(
            t_s=self.buffer.timestamps()[-1],
            coord=denormalize(normalized, self.bounds),
            normalized=normalized,
            warm_up=not self.buffer.full,
            inference_ms=elapsed_ms,
        )


def _pair_truth(t_s: float, truth_times: np.ndarray, window_s: float) -> Optional[int]:
    if len(truth_times) == 0:
        return None
    idx = int(np.searchsorted(truth_times, t_s))
    candidates = [i for i in (idx - 1, idx) if 0 <= i < len(truth_times)]
    best = min(candidates, key=lambda i: abs(truth_times[i] - t_s))
    return best if abs(truth_times[best] - t_s) <= window_s else None


def run_stream(model: CoordinatePredictor, frames: Iterable[Tuple[float, np.ndarray]],
               truth: Sequence[Tuple[float, GeoCoordinate]], bounds: GeoBounds, capacity: int,
               frame_interval_s: float, min_frames: int = INFERENCE_CONFIG['min_frames'],
               pairing_window_s: float = INFERENCE_CONFIG['pairing_window_s'],
               admit_tolerance_s: float = INFERENCE_CONFIG['admit_tolerance_s'],
               label: str = '') -> LocalizationTrace:
    """Localize a whole session.

    Args:
        model: Anything with predict_coords
        frames: (t_s, (H, W, 3) uint8 image) in time order
        truth: Time-sorted (t_s, coordinate) ground-truth fixes
        bounds: Normalization box of the model
        capacity: Buffer length (the trained sequence length)
        frame_interval_s: Trained spacing between frames
        min_frames: Buffered frames needed before predicting
        pairing_window_s: Largest time offset for pairing a prediction with truth
        admit_tolerance_s: Slack on the admission interval
        label: Name carried by the trace

    Returns:
        Trace with one entry per prediction; unpaired predictions have no truth
    """
    localizer = StreamLocalizer(model, bounds, capacity, frame_interval_s, min_frames, admit_tolerance_s)
    truth_times = np.array([t for t, _ in truth], dtype=np.float64)
    trace = LocalizationTrace(label=label)
    for t_s, image in frames:
        prediction = localizer.push(t_s, image)
        if prediction is None:
            continue
        idx = _pair_truth(prediction.t_s, truth_times, pairing_window_s)
        truth_coord = truth[idx][1] if idx is not None else None
        trace.append(TraceEntry(
            t_s=prediction.t_s,
            predicted=prediction.coord,
            truth=truth_coord,
            deviation_m=deviation_meters(prediction.coord, truth_coord) if truth_coord is not None else None,
            warm_up=prediction.warm_up,
            inference_ms=prediction.inference_ms,
        ))
    logger.info(f"Stream produced {len(trace)} predictions ({len(trace.deviations(True))} paired with truth)")
    return trace


def measure_throughput(model: Any, capacity: int, image_size: Tuple[int, int], n_predictions: int = 50,
                       seed: int = 0) -> Dict[str, float]:
    """Time full-buffer predictions and the frame encoder on random frames.

    Returns:
        predictions_per_s, mean_inference_ms and encoder_fps
    """
    width, height = image_size
    rng = np.random.default_rng(seed)
    frames = torch.from_numpy(rng.random((1, capacity, 3, height, width), dtype=np.float32))
    model.predict_coords(frames)

    started = time.perf_counter()
    for _ in range(n_predictions):
        model.predict_coords(frames)
    predict_s = time.perf_counter() - started

    encoder_fps = float('nan')
    encoder = getattr(model, 'encoder', None)
    if encoder is not None:
        with torch.no_grad():
            started = time.perf_counter()
            for _ in range(n_predictions):
                encoder(frames[0])
            encoder_fps = n_predictions * capacity / (time.perf_counter() - started)

    result = {
        'predictions_per_s': n_predictions / predict_s,
        'mean_inference_ms': predict_s * 1000.0 / n_predictions,
        'encoder_fps': encoder_fps,
    }
    logger.info(f"Throughput: {result['predictions_per_s']:.1f} predictions/s, "
                f"encoder {result['encoder_fps']:.1f} frames/s")
    return result
