"""
Streaming inference: frame buffer, per-frame predictions and throughput measurement.
"""
from .stream import (
    CoordinatePredictor,
    FrameBuffer,
    Prediction,
    StreamLocalizer,
    measure_throughput,
    run_stream,
)

__all__ = [
    'CoordinatePredictor', 'FrameBuffer', 'Prediction', 'StreamLocalizer', 'measure_throughput',
    'run_stream',
]
