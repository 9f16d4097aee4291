"""
Unit tests for the frame buffer, the streaming localizer and throughput measurement.
"""
import unittest

import numpy as np
import torch

from src.errors import NonMonotonicTimestampError
from src.datapipe import FrameRecord, SampleSequence, SequenceTensorDataset
from src.geo import GeoBounds, GeoCoordinate, NormalizedCoordinate, denormalize, deviation_meters, normalize
from src.inference import FrameBuffer, StreamLocalizer, measure_throughput, run_stream
from src.model import ModelConfig, SpatialTemporalModel

BOUNDS = GeoBounds.from_origin(32.8801, -117.2340, 200.0, 120.0)


def tagged_image(index, size=4):
    """Image whose first pixel encodes `index` in two channels."""
    image = np.zeros((size, size, 3), dtype=np.uint8)
    image[0, 0, 0] = index % 256
    image[0, 0, 1] = index // 256
    return image


class OracleModel:
    """Looks up the true normalized position of every tagged frame."""

    def __init__(self, positions):
        self.positions = positions

    def predict_coords(self, frames):
        ids = torch.round(frames[0, :, 0, 0, 0] * 255).long() + 256 * torch.round(frames[0, :, 1, 0, 0] * 255).long()
        coords = [self.positions[int(i)] for i in ids]
        return torch.tensor([coords], dtype=torch.float64)


class CenterModel:
    def predict_coords(self, frames):
        return torch.full((frames.size(0), frames.size(1), 2), 0.5)


def oracle_session(n_frames, interval_s, seed=0):
    rng = np.random.default_rng(seed)
    uv = rng.uniform(0.05, 0.95, size=(n_frames, 2))
    frames, truth = [], []
    for i in range(n_frames):
        t = i * interval_s
        frames.append((t, tagged_image(i)))
        truth.append((t, denormalize(NormalizedCoordinate(*uv[i]), BOUNDS)))
    return frames, truth, OracleModel({i: tuple(uv[i]) for i in range(n_frames)})


class TestFrameBuffer(unittest.TestCase):
    def test_decimates_fast_feed(self):
        buffer = FrameBuffer(capacity=24, frame_interval_s=10.0, admit_tolerance_s=0.1)
        admitted = [k for k in range(3600) if buffer.push(k / 36.0, tagged_image(0))]
        self.assertEqual(admitted, list(range(0, 3600, 357)))
        self.assertEqual(len(buffer), 11)

    def test_keeps_latest_frames(self):
        buffer = FrameBuffer(capacity=24, frame_interval_s=1.0)
        for t in range(30):
            self.assertTrue(buffer.push(float(t), tagged_image(t)))
        self.assertEqual(len(buffer), 24)
        self.assertTrue(buffer.full)
        self.assertEqual(buffer.timestamps(), tuple(float(t) for t in range(6, 30)))

    def test_rejects_non_monotonic_timestamps(self):
        buffer = FrameBuffer(capacity=4, frame_interval_s=1.0)
        buffer.push(5.0, tagged_image(0))
        with self.assertRaises(NonMonotonicTimestampError):
            buffer.push(5.0, tagged_image(1))
        with self.assertRaises(NonMonotonicTimestampError):
            buffer.push(4.0, tagged_image(1))

    def test_tensor_layout(self):
        buffer = FrameBuffer(capacity=3, frame_interval_s=1.0)
        for t in range(2):
            buffer.push(float(t), tagged_image(255))
        tensor = buffer.as_tensor()
        self.assertEqual(tuple(tensor.shape), (1, 2, 3, 4, 4))
        self.assertEqual(float(tensor[0, 1, 0, 0, 0]), 1.0)

    def test_invalid_capacity(self):
        with self.assertRaises(ValueError):
            FrameBuffer(capacity=0, frame_interval_s=1.0)


class TestStreamLocalizer(unittest.TestCase):
    def test_warm_up_flags(self):
        localizer = StreamLocalizer(CenterModel(), BOUNDS, capacity=3, frame_interval_s=10.0, min_frames=2)
        predictions = [localizer.push(t, tagged_image(0)) for t in (0.0, 10.0, 20.0, 30.0)]
        self.assertIsNone(predictions[0])
        self.assertEqual([p.warm_up for p in predictions[1:]], [True, False, False])
        self.assertEqual(predictions[1].t_s, 10.0)

    def test_rejected_frame_yields_nothing(self):
        localizer = StreamLocalizer(CenterModel(), BOUNDS, capacity=3, frame_interval_s=10.0, min_frames=1)
        self.assertIsNotNone(localizer.push(0.0, tagged_image(0)))
        self.assertIsNone(localizer.push(1.0, tagged_image(0)))

    def test_prediction_is_denormalized_model_output(self):
        torch.manual_seed(0)
        model = SpatialTemporalModel(ModelConfig.from_preset('micro'))
        localizer = StreamLocalizer(model, BOUNDS, capacity=3, frame_interval_s=1.0, min_frames=1)
        rng = np.random.default_rng(1)
        for t in range(4):
            prediction = localizer.push(float(t), rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8))
        expected = model.predict_coords(localizer.buffer.as_tensor())[0, -1]
        self.assertAlmostEqual(prediction.normalized.u, float(expected[0]), places=6)
        self.assertAlmostEqual(prediction.normalized.v, float(expected[1]), places=6)
        self.assertEqual(prediction.coord, denormalize(prediction.normalized, BOUNDS))
        self.assertGreaterEqual(prediction.inference_ms, 0.0)


class TestStreamMatchesBatch(unittest.TestCase):
    """A full buffer must reproduce the batch forward over the same frames."""

    def setUp(self):
        torch.manual_seed(3)
        self.model = SpatialTemporalModel(ModelConfig.from_preset('micro', seq_len=24))
        rng = np.random.default_rng(5)
        self.images = [rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8) for _ in range(30)]
        self.times = [10.0 * (k - 6) for k in range(30)]
        uv = rng.uniform(0.1, 0.9, size=(30, 2))
        self.coords = [denormalize(NormalizedCoordinate(*uv[k]), BOUNDS) for k in range(30)]

    def batch_prediction(self):
        records = [FrameRecord(self.times[k], self.images[k], self.coords[k], 0.02) for k in range(6, 30)]
        gmps = np.zeros((24, 8, 8, 3), dtype=np.uint8)
        dataset = SequenceTensorDataset([SampleSequence.from_frames(records, gmps, BOUNDS)])
        self.model.eval()
        with torch.no_grad():
            return self.model(dataset[0]['fpp'].unsqueeze(0), deterministic=True).coords[0, -1]

    def test_full_buffer_matches_batch_forward(self):
        feed = []
        for k in range(30):
            feed.append((self.times[k], self.images[k]))
            # off-cadence frames must be rejected by the buffer
            feed.append((self.times[k] + 2.5, np.full((8, 8, 3), 255, dtype=np.uint8)))
        truth = list(zip(self.times, self.coords))
        trace = run_stream(self.model, feed, truth, BOUNDS, capacity=24, frame_interval_s=10.0, min_frames=24)
        entries = list(trace)
        self.assertEqual(len(entries), 7)
        self.assertEqual(entries[-1].t_s, self.times[-1])
        self.assertFalse(entries[-1].warm_up)

        expected = self.batch_prediction()
        streamed = normalize(entries[-1].predicted, BOUNDS)
        self.assertLess(abs(streamed.u - float(expected[0])), 1e-6)
        self.assertLess(abs(streamed.v - float(expected[1])), 1e-6)


class TestRunStream(unittest.TestCase):
    def test_oracle_has_no_deviation(self):
        frames, truth, model = oracle_session(40, 10.0)
        trace = run_stream(model, frames, truth, BOUNDS, capacity=6, frame_interval_s=10.0, min_frames=2)
        self.assertEqual(len(trace), 39)
        deviations = trace.deviations(include_warm_up=True)
        self.assertEqual(len(deviations), 39)
        self.assertLess(float(deviations.max()), 0.01)
        self.assertEqual(len(trace.deviations()), 39 - 4)

    def test_fast_feed_is_decimated(self):
        frames, truth, model = oracle_session(400, 1.0)
        trace = run_stream(model, frames, truth, BOUNDS, capacity=6, frame_interval_s=10.0, min_frames=1)
        self.assertEqual([e.t_s for e in trace], [float(t) for t in range(0, 400, 10)])

    def test_constant_model_deviation(self):
        frames, truth, _ = oracle_session(10, 10.0, seed=2)
        trace = run_stream(CenterModel(), frames, truth, BOUNDS, capacity=3, frame_interval_s=10.0, min_frames=1)
        for entry, (_, coord) in zip(trace, truth):
            self.assertEqual(entry.predicted, denormalize(NormalizedCoordinate(0.5, 0.5), BOUNDS))
            self.assertAlmostEqual(entry.deviation_m, deviation_meters(entry.predicted, coord), places=6)

    def test_unpaired_predictions(self):
        frames, truth, model = oracle_session(10, 10.0)
        trace = run_stream(model, frames, truth[:5], BOUNDS, capacity=3, frame_interval_s=10.0, min_frames=1,
                           pairing_window_s=0.5)
        self.assertEqual(len(trace), 10)
        self.assertEqual(sum(e.paired for e in trace), 5)
        self.assertIsNone(trace.entries[-1].deviation_m)

    def test_empty_source(self):
        trace = run_stream(CenterModel(), [], [], BOUNDS, capacity=3, frame_interval_s=10.0, label='empty')
        self.assertEqual(len(trace), 0)
        self.assertEqual(trace.label, 'empty')
        self.assertEqual(len(trace.deviations()), 0)

    def test_pairs_nearest_truth_within_window(self):
        frames = [(10.2, tagged_image(0))]
        truth = [(9.0, GeoCoordinate(32.8801, -117.2340)), (10.0, BOUNDS.center)]
        trace = run_stream(OracleModel({0: (0.5, 0.5)}), frames, truth, BOUNDS, capacity=3,
                           frame_interval_s=10.0, min_frames=1)
        self.assertEqual(trace.entries[0].truth, BOUNDS.center)


class TestThroughput(unittest.TestCase):
    def test_reports_rates(self):
        torch.manual_seed(0)
        model = SpatialTemporalModel(ModelConfig.from_preset('micro'))
        result = measure_throughput(model, capacity=3, image_size=(8, 8), n_predictions=5)
        self.assertEqual(set(result), {'predictions_per_s', 'mean_inference_ms', 'encoder_fps'})
        self.assertGreater(result['predictions_per_s'], 0)
        self.assertGreater(result['encoder_fps'], 0)

    def test_model_without_encoder(self):
        result = measure_throughput(CenterModel(), capacity=3, image_size=(4, 4), n_predictions=3)
        self.assertTrue(np.isnan(result['encoder_fps']))


if __name__ == '__main__':
    unittest.main()
