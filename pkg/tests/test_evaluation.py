"""
Unit tests for traces, LPC curves, AUC, median deviation, bands and ablation tables.
"""
import json
import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.errors import EmptyTraceError
from src.evaluation import (
    LocalizationTrace,
    TraceEntry,
    auc,
    compare_ablation,
    confidence_band,
    default_max_threshold,
    deviation_summary,
    export_curves,
    lpc,
    median_deviation,
    reference_baselines,
)
from src.geo import GeoCoordinate, deviation_meters


class TestLpc(unittest.TestCase):
    def test_perfect_localization(self):
        curve = lpc(np.zeros(50), max_threshold_m=10.0, n_points=11)
        self.assertTrue(np.all(curve.accuracy == 1.0))
        self.assertAlmostEqual(curve.auc, 1.0)

    def test_everything_beyond_range(self):
        curve = lpc(np.full(20, 100.0), max_threshold_m=10.0)
        self.assertTrue(np.all(curve.accuracy == 0.0))
        self.assertEqual(curve.auc, 0.0)

    def test_inclusive_thresholds(self):
        curve = lpc([0.0, 10.0, 20.0], max_threshold_m=20.0, n_points=3)
        np.testing.assert_allclose(curve.thresholds, [0.0, 10.0, 20.0])
        np.testing.assert_allclose(curve.accuracy, [1 / 3, 2 / 3, 1.0])

    def test_grid_endpoints(self):
        curve = lpc([1.0, 2.0], max_threshold_m=25.0, n_points=200)
        self.assertEqual(len(curve.thresholds), 200)
        self.assertEqual(curve.thresholds[0], 0.0)
        self.assertEqual(curve.max_threshold_m, 25.0)

    def test_monotonic(self):
        rng = np.random.default_rng(0)
        curve = lpc(rng.exponential(5.0, 500), max_threshold_m=30.0)
        self.assertTrue(np.all(np.diff(curve.accuracy) >= 0))
        self.assertTrue(0.0 <= curve.auc <= 1.0)

    def test_uniform_deviations_give_half(self):
        curve = lpc(np.linspace(0.0, 10.0, 10001), max_threshold_m=10.0, n_points=1001)
        self.assertAlmostEqual(curve.auc, 0.5, delta=1e-3)

    def test_auc_matches_trapezoid_loop(self):
        rng = np.random.default_rng(1)
        curve = lpc(rng.uniform(0, 12, 300), max_threshold_m=10.0, n_points=51)
        x, y = curve.thresholds, curve.accuracy
        area = sum((x[i + 1] - x[i]) * (y[i] + y[i + 1]) / 2 for i in range(len(x) - 1))
        self.assertAlmostEqual(auc(curve), area / 10.0, places=12)

    def test_rejects_bad_input(self):
        with self.assertRaises(EmptyTraceError):
            lpc([], max_threshold_m=10.0)
        with self.assertRaises(ValueError):
            lpc([1.0, -2.0], max_threshold_m=10.0)
        with self.assertRaises(ValueError):
            lpc([1.0], max_threshold_m=0.0)
        with self.assertRaises(ValueError):
            lpc([1.0], max_threshold_m=10.0, n_points=1)

    def test_warm_up_excluded_by_default(self):
        origin = GeoCoordinate(0.0, 0.0)
        trace = LocalizationTrace([
            TraceEntry(0.0, origin, origin, 50.0, warm_up=True),
            TraceEntry(10.0, origin, origin, 0.0),
        ], label='run')
        self.assertAlmostEqual(lpc(trace, 10.0).auc, 1.0)
        self.assertEqual(lpc(trace, 10.0).label, 'run')
        self.assertAlmostEqual(lpc(trace, 10.0, n_points=2, include_warm_up=True).accuracy[-1], 0.5)

    def test_default_max_threshold(self):
        self.assertAlmostEqual(default_max_threshold(233.2), 23.32)


class TestMedianDeviation(unittest.TestCase):
    def test_odd_count(self):
        self.assertEqual(median_deviation([3.0, 1.0, 2.0]), 2.0)

    def test_even_count_takes_lower_middle(self):
        self.assertEqual(median_deviation([4.0, 1.0, 3.0, 2.0]), 2.0)

    def test_all_equal(self):
        self.assertEqual(median_deviation([5.0] * 7), 5.0)

    def test_rayleigh_median(self):
        rng = np.random.default_rng(2)
        devs = rng.rayleigh(3.0, 20001)
        self.assertAlmostEqual(median_deviation(devs), 3.0 * math.sqrt(2 * math.log(2)), delta=0.02 * 3.53)


class TestConfidenceBand(unittest.TestCase):
    def test_identical_runs_collapse(self):
        devs = np.random.default_rng(3).uniform(0, 20, 100)
        band = confidence_band([devs, devs.copy(), devs.copy()], max_threshold_m=10.0)
        np.testing.assert_array_equal(band.lower, band.upper)
        np.testing.assert_array_equal(band.mean, band.lower)

    def test_dominating_run_bounds(self):
        good, bad = np.zeros(10), np.full(10, 5.0)
        band = confidence_band([good, bad], max_threshold_m=10.0, n_points=11, labels=['good', 'bad'])
        np.testing.assert_array_equal(band.upper, np.ones(11))
        np.testing.assert_array_equal(band.lower, lpc(bad, 10.0, 11).accuracy)
        self.assertAlmostEqual(band.mean_auc, (lpc(good, 10.0, 11).auc + lpc(bad, 10.0, 11).auc) / 2)
        self.assertIn('accuracy_good', band.to_frame().columns)

    def test_needs_two_runs(self):
        with self.assertRaises(ValueError):
            confidence_band([np.zeros(3)], max_threshold_m=10.0)


class TestReporting(unittest.TestCase):
    def test_ablation_ranking(self):
        results = {
            'w/o Recon': [np.full(20, 8.0), np.full(20, 9.0)],
            'w/ Recon': [np.full(20, 1.0), np.full(20, 2.0)],
        }
        table = compare_ablation(results, max_threshold_m=10.0)
        self.assertEqual(list(table['label']), ['w/ Recon', 'w/o Recon'])
        self.assertEqual(list(table['rank']), [1, 2])
        self.assertEqual(table.iloc[0]['median_deviation_m'], 1.5)
        self.assertGreater(table.iloc[1]['auc_range'], 0.0)
        self.assertTrue((table['source'] == 'computed').all())

    def test_ablation_with_references(self):
        table = compare_ablation({'w/ Recon': [np.zeros(5)]}, max_threshold_m=10.0, include_references=True)
        refs = table[table['source'] == 'reference']
        self.assertFalse(refs.empty)
        self.assertTrue(refs['rank'].isna().all())
        self.assertEqual(table.iloc[0]['label'], 'w/ Recon')

    def test_reference_baselines(self):
        df = reference_baselines()
        self.assertTrue((df['source'] == 'reference').all())
        auc_rows = df[df['metric'] == 'auc'].set_index('method')
        self.assertAlmostEqual(auc_rows.loc['VIGOR-200', 'value'], 0.295)
        self.assertAlmostEqual(auc_rows.loc['TransGeo', 'value'], 0.225)
        self.assertEqual(set(df['environment']) - {'campus', 'urban', 'cross-view benchmark', 'efficiency'}, set())

    def test_deviation_summary(self):
        summary = deviation_summary([1.0, 2.0, 3.0, 30.0], diagonal_m=100.0, speed_mps=2.0)
        self.assertEqual(summary['median_deviation_m'], 2.0)
        self.assertAlmostEqual(summary['median_pct_of_diagonal'], 2.0)
        self.assertEqual(summary['spikes'], 1)
        self.assertAlmostEqual(summary['median_seconds_of_travel'], 1.0)
        self.assertNotIn('median_seconds_of_travel', deviation_summary([1.0], diagonal_m=100.0))

    def test_export_curves(self):
        curves = [lpc(np.zeros(3), 10.0, label='seed1'), lpc(np.ones(3), 10.0, label='seed2')]
        band = confidence_band([np.zeros(3), np.ones(3)], 10.0, labels=['seed1', 'seed2'])
        with tempfile.TemporaryDirectory() as tmp:
            paths = export_curves(curves, band, Path(tmp), {'mean_auc': band.mean_auc})
            self.assertEqual(set(paths), {'curves', 'band', 'summary'})
            summary = json.loads(paths['summary'].read_text())
            self.assertAlmostEqual(summary['mean_auc'], band.mean_auc)
            header = paths['curves'].read_text().splitlines()[0]
            self.assertEqual(header, 'threshold_m,accuracy_seed1,accuracy_seed2')


class TestTrace(unittest.TestCase):
    def test_csv_keeps_unpaired_entries(self):
        a, b = GeoCoordinate(32.88, -117.23), GeoCoordinate(32.8801, -117.2301)
        trace = LocalizationTrace([
            TraceEntry(0.0, a, b, deviation_meters(a, b), warm_up=True, inference_ms=1.5),
            TraceEntry(10.0, a),
        ])
        with tempfile.TemporaryDirectory() as tmp:
            loaded = LocalizationTrace.from_csv(trace.to_csv(Path(tmp) / 'trace.csv'))
        self.assertEqual(len(loaded), 2)
        self.assertTrue(loaded.entries[0].warm_up)
        self.assertFalse(loaded.entries[1].paired)
        self.assertAlmostEqual(loaded.entries[0].deviation_m, deviation_meters(a, b), places=4)

    def test_from_arrays(self):
        trace = LocalizationTrace.from_arrays(np.array([0.0]), np.array([0.0]), np.array([0.0]),
                                              np.array([1.0]), np.array([0.0]))
        self.assertAlmostEqual(trace.entries[0].deviation_m, 111194.93, delta=0.01)

    def test_negative_deviation_rejected(self):
        origin = GeoCoordinate(0.0, 0.0)
        with self.assertRaises(ValueError):
            LocalizationTrace([TraceEntry(0.0, origin, origin, -1.0)])


if __name__ == '__main__':
    unittest.main()
