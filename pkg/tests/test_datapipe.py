"""
Unit tests for frame extraction, filtering, windowing, splits and the dataset container.
"""
import tempfile
import unittest
from collections import namedtuple
from pathlib import Path

import numpy as np
import pandas as pd
import torch

from src.datapipe import (
    HEADER_DTYPE,
    DatasetHeader,
    FrameRecord,
    SampleSequence,
    SequenceTensorDataset,
    build_sequences,
    export_metadata_csv,
    extract_frames,
    filter_accuracy,
    grid_cell,
    read_dataset,
    read_header,
    resample_sequences,
    stratified_split,
    write_dataset,
)
from src.errors import BadMagicError, RecordCountMismatchError, TruncatedDatasetError
from src.geo import GeoBounds, GeoCoordinate

Item = namedtuple('Item', ['t_s', 'rtk_accuracy_m'])

BOUNDS = GeoBounds.from_origin(32.8801, -117.2340, 200.0, 120.0)


def make_records(times, rng, accuracy=0.02, size=(4, 4)):
    width, height = size
    records = []
    for t in times:
        u, v = rng.uniform(0.05, 0.95, size=2)
        coord = GeoCoordinate(BOUNDS.lat_min + u * BOUNDS.lat_span, BOUNDS.lon_min + v * BOUNDS.lon_span)
        fpp = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
        records.append(FrameRecord(float(t), fpp, coord, float(np.float32(accuracy))))
    return records


def flat_gmp(record):
    return np.full((4, 4, 3), int(record.t_s) % 256, dtype=np.uint8)


class TestExtractFrames(unittest.TestCase):
    def test_one_hertz_stream(self):
        stream = [Item(float(t), 0.02) for t in range(101)]
        selected = extract_frames(stream, 10.0)
        self.assertEqual([s.t_s for s in selected], [float(t) for t in range(0, 101, 10)])

    def test_gap_yields_no_records(self):
        times = list(range(0, 31)) + list(range(61, 101))
        selected = extract_frames([Item(float(t), 0.02) for t in times], 10.0)
        self.assertEqual([s.t_s for s in selected], [0, 10, 20, 30, 61, 70, 80, 90, 100])

    def test_jittered_stream_matches_nearest_neighbour(self):
        rng = np.random.default_rng(3)
        times = np.arange(0, 501, dtype=float) + rng.uniform(-0.3, 0.3, size=501)
        stream = [Item(float(t), 0.02) for t in times]
        selected = extract_frames(stream, 10.0, t0=0.0)
        expected = []
        for target in np.arange(0, 501, 10.0):
            nearest = int(np.argmin(np.abs(times - target)))
            if abs(times[nearest] - target) <= 5.0:
                expected.append(float(times[nearest]))
        self.assertEqual([s.t_s for s in selected], expected)
        for s in selected:
            self.assertLessEqual(abs(s.t_s - round(s.t_s / 10.0) * 10.0), 0.5)

    def test_empty_stream(self):
        self.assertEqual(extract_frames([], 10.0), [])

    def test_invalid_interval(self):
        with self.assertRaises(ValueError):
            extract_frames([Item(0.0, 0.02)], 0.0)


class TestFilterAccuracy(unittest.TestCase):
    def test_good_fixes_unchanged(self):
        items = [Item(float(t), 0.02) for t in range(5)]
        self.assertEqual(filter_accuracy(items), items)

    def test_bad_fixes_removed(self):
        self.assertEqual(filter_accuracy([Item(float(t), 6.0) for t in range(5)]), [])

    def test_boundary_is_inclusive(self):
        items = [Item(0.0, 1.0), Item(1.0, 5.0), Item(2.0, 5.01)]
        self.assertEqual(filter_accuracy(items, 5.0), items[:2])


class TestBuildSequences(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_exact_length_gives_one_window(self):
        records = make_records(np.arange(24) * 10.0, self.rng)
        sequences = build_sequences(records, flat_gmp, BOUNDS, 24, 10.0, stride=1)
        self.assertEqual(len(sequences), 1)
        self.assertEqual(len(sequences[0]), 24)
        self.assertEqual(sequences[0].gmp_targets.shape, (24, 4, 4, 3))

    def test_one_extra_record_gives_two_windows(self):
        records = make_records(np.arange(25) * 10.0, self.rng)
        self.assertEqual(len(build_sequences(records, flat_gmp, BOUNDS, 24, 10.0, stride=1)), 2)

    def test_windows_never_cross_a_gap(self):
        times = np.concatenate([np.arange(24) * 10.0, 270.0 + np.arange(24) * 10.0])
        records = make_records(times, self.rng)
        sequences = build_sequences(records, flat_gmp, BOUNDS, 24, 10.0, stride=1)
        self.assertEqual(len(sequences), 2)
        for seq in sequences:
            diffs = np.diff([f.t_s for f in seq.frames])
            np.testing.assert_allclose(diffs, 10.0)

    def test_default_stride_is_half_length(self):
        records = make_records(np.arange(48) * 10.0, self.rng)
        sequences = build_sequences(records, flat_gmp, BOUNDS, 24, 10.0)
        self.assertEqual([seq.frames[0].t_s for seq in sequences], [0.0, 120.0, 240.0])

    def test_too_few_records(self):
        self.assertEqual(build_sequences(make_records(np.arange(5) * 10.0, self.rng), flat_gmp, BOUNDS, 24), [])

    def test_coordinates_are_normalized(self):
        records = make_records(np.arange(24) * 10.0, self.rng)
        seq = build_sequences(records, flat_gmp, BOUNDS, 24, 10.0, stride=1)[0]
        self.assertTrue(np.all((seq.norm_coords >= 0) & (seq.norm_coords <= 1)))

    def test_resample_to_longer_interval(self):
        records = make_records(np.arange(24) * 10.0, self.rng)
        seq = build_sequences(records, flat_gmp, BOUNDS, 24, 10.0, stride=1)[0]
        resampled = resample_sequences([seq], 12, 20.0, 10.0)
        self.assertEqual(len(resampled), 1)
        self.assertEqual(len(resampled[0]), 12)
        np.testing.assert_allclose(np.diff([f.t_s for f in resampled[0].frames]), 20.0)
        self.assertEqual(resampled[0].frames[-1].t_s, 230.0)
        with self.assertRaises(ValueError):
            resample_sequences([seq], 12, 15.0, 10.0)


class TestDatasetContainer(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(5)
        records = make_records(np.arange(10 * 24) * 10.0, rng)
        self.sequences = [
            SampleSequence.from_frames(records[i * 24:(i + 1) * 24],
                                       np.stack([flat_gmp(r) for r in records[i * 24:(i + 1) * 24]]), BOUNDS)
            for i in range(10)
        ]
        self.header = DatasetHeader(bounds=BOUNDS, fpp_size=(4, 4), gmp_size=(4, 4),
                                    frame_interval_s=10.0, seq_len=24)
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'dataset.bin'

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_byte_identical(self):
        written = write_dataset(self.path, self.header, self.sequences)
        self.assertEqual(written.record_count, 240)
        header, sequences = read_dataset(self.path)
        self.assertEqual(header, written)
        self.assertEqual(len(sequences), 10)
        again = Path(self.tmp.name) / 'again.bin'
        write_dataset(again, header, sequences)
        self.assertEqual(self.path.read_bytes(), again.read_bytes())
        np.testing.assert_array_equal(sequences[3].fpp_stack(), self.sequences[3].fpp_stack())
        np.testing.assert_allclose(sequences[3].norm_coords, self.sequences[3].norm_coords)

    def test_header_only_read(self):
        write_dataset(self.path, self.header, self.sequences)
        self.assertEqual(read_header(self.path).sequence_count, 10)

    def test_truncated_file(self):
        write_dataset(self.path, self.header, self.sequences)
        data = self.path.read_bytes()
        self.path.write_bytes(data[:-5])
        with self.assertRaises(TruncatedDatasetError) as ctx:
            read_dataset(self.path)
        self.assertEqual(ctx.exception.actual_bytes, len(data) - 5)
        self.assertEqual(ctx.exception.expected_bytes, len(data))

    def test_file_cut_at_record_boundary(self):
        write_dataset(self.path, self.header, self.sequences)
        data = self.path.read_bytes()
        record_size = (len(data) - HEADER_DTYPE.itemsize) // 240
        self.path.write_bytes(data[:-24 * record_size])
        with self.assertRaises(TruncatedDatasetError) as ctx:
            read_dataset(self.path)
        self.assertEqual(ctx.exception.expected_bytes, len(data))
        self.assertEqual(ctx.exception.actual_bytes, len(data) - 24 * record_size)

    def test_record_count_mismatch(self):
        write_dataset(self.path, self.header, self.sequences)
        write_dataset(Path(self.tmp.name) / 'short.bin', self.header, self.sequences[:9])
        full = self.path.read_bytes()
        short = (Path(self.tmp.name) / 'short.bin').read_bytes()
        # header of the 9-sequence file followed by the 10-sequence body
        size = HEADER_DTYPE.itemsize
        self.path.write_bytes(short[:size] + full[size:])
        with self.assertRaises(RecordCountMismatchError):
            read_dataset(self.path)

    def test_bad_magic(self):
        write_dataset(self.path, self.header, self.sequences)
        data = self.path.read_bytes()
        self.path.write_bytes(b'NOTADATA' + data[8:])
        with self.assertRaises(BadMagicError):
            read_dataset(self.path)

    def test_wrong_sequence_length_rejected(self):
        with self.assertRaises(ValueError):
            write_dataset(self.path, DatasetHeader(BOUNDS, (4, 4), (4, 4), 10.0, 12), self.sequences)

    def test_metadata_csv(self):
        path = export_metadata_csv(self.sequences, Path(self.tmp.name) / 'metadata.csv')
        df = pd.read_csv(path)
        self.assertEqual(list(df.columns), ['sequence', 't_s', 'lat', 'lon', 'accuracy'])
        self.assertEqual(len(df), 240)


class TestStratifiedSplit(unittest.TestCase):
    def setUp(self):
        bounds = GeoBounds(0.0, 1.0, 0.0, 1.0)
        fpp = np.zeros((2, 2, 3), dtype=np.uint8)
        gmp = np.zeros((1, 2, 2, 3), dtype=np.uint8)
        self.sequences = []
        for row in range(8):
            for col in range(8):
                for k in range(10):
                    coord = GeoCoordinate((row + 0.5) / 8, (col + 0.5) / 8)
                    frame = FrameRecord(float(k), fpp, coord, 0.02)
                    self.sequences.append(SampleSequence.from_frames([frame], gmp, bounds))

    def test_full_fraction(self):
        subset, remainder = stratified_split(self.sequences, 1.0, seed=0)
        self.assertEqual(len(subset), len(self.sequences))
        self.assertEqual(remainder, [])

    def test_tenth_covers_every_cell(self):
        subset, remainder = stratified_split(self.sequences, 0.1, seed=1)
        self.assertLessEqual(abs(len(subset) - 64), 8)
        self.assertEqual(len(subset) + len(remainder), 640)
        cells = {grid_cell(*seq.norm_coords[-1], 8) for seq in subset}
        self.assertEqual(len(cells), 64)

    def test_same_seed_same_split(self):
        a, _ = stratified_split(self.sequences, 0.1, seed=4)
        b, _ = stratified_split(self.sequences, 0.1, seed=4)
        self.assertEqual([id(s) for s in a], [id(s) for s in b])

    def test_invalid_fraction(self):
        with self.assertRaises(ValueError):
            stratified_split(self.sequences, 1.5, seed=0)

    def test_grid_cell_clamps(self):
        self.assertEqual(grid_cell(-0.2, 1.3, 8), (0, 7))
        self.assertEqual(grid_cell(0.5, 0.5, 8), (4, 4))


class TestSequenceTensorDataset(unittest.TestCase):
    def setUp(self):
        records = make_records(np.arange(36) * 10.0, np.random.default_rng(2))
        self.sequences = build_sequences(records, flat_gmp, BOUNDS, 24, 10.0, stride=12)

    def test_overlapping_frames_stored_once(self):
        dataset = SequenceTensorDataset(self.sequences)
        self.assertEqual(len(dataset), 2)
        self.assertEqual(dataset.unique_frames, 36)

    def test_item_shapes_and_range(self):
        item = SequenceTensorDataset(self.sequences)[1]
        self.assertEqual(tuple(item['fpp'].shape), (24, 3, 4, 4))
        self.assertEqual(tuple(item['gmp'].shape), (24, 3, 4, 4))
        self.assertEqual(tuple(item['coords'].shape), (24, 2))
        self.assertEqual(item['fpp'].dtype, torch.float32)
        self.assertTrue(0.0 <= float(item['fpp'].min()) and float(item['fpp'].max()) <= 1.0)

    def test_pixels_match_source(self):
        item = SequenceTensorDataset(self.sequences)[0]
        expected = torch.from_numpy(self.sequences[0].frames[5].fpp).permute(2, 0, 1).float() / 255.0
        self.assertTrue(torch.equal(item['fpp'][5], expected))


if __name__ == '__main__':
    unittest.main()
