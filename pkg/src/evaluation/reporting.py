"""
Comparison tables, published reference numbers and metric exports.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ..config import EVAL_CONFIG
from .lpc import ConfidenceBand, DeviationSource, LpcCurve, collect_deviations, lpc, median_deviation

logger = logging.getLogger(__name__)

COMPUTED = 'computed'
REFERENCE = 'reference'

# Published numbers, for annotating plots only
_REFERENCE_ROWS = [
    ('VAE-Transformer', 'campus', 'auc', 0.777),
    ('Phone GPS', 'campus', 'auc', 0.797),
    ('VAE-Transformer w/o Recon', 'campus', 'auc', 0.794),
    ('VAE-Transformer', 'urban', 'auc', 0.652),
    ('VAE-Transformer w/o Recon', 'urban', 'auc', 0.564),
    ('VIGOR-200', 'cross-view benchmark', 'auc', 0.295),
    ('TransGeo', 'cross-view benchmark', 'auc', 0.225),
    ('VAE-Transformer', 'campus', 'median_deviation_m', 2.29),
    ('VAE-RNN', 'campus', 'median_deviation_m', 6.22),
    ('Phone GPS', 'campus', 'median_deviation_m', 3.22),
    ('VAE-Transformer', 'urban', 'median_deviation_m', 4.45),
    ('VAE-RNN', 'urban', 'median_deviation_m', 27.27),
    ('Phone GPS', 'urban', 'median_deviation_m', 1.95),
    ('VAE-Transformer', 'efficiency', 'parameters_m', 19.2),
    ('VAE-Transformer', 'efficiency', 'gpu_memory_gb', 2.12),
    ('VAE-Transformer', 'efficiency', 'gpu_inference_ms', 37.0),
    ('VIGOR (SAFA)', 'efficiency', 'parameters_m', 29.4),
    ('VIGOR (SAFA)', 'efficiency', 'gpu_memory_gb', 10.82),
    ('VIGOR (SAFA)', 'efficiency', 'gpu_inference_ms', 111.0),
    ('TransGeo', 'efficiency', 'parameters_m', 44.8),
    ('TransGeo', 'efficiency', 'gpu_memory_gb', 9.85),
    ('TransGeo', 'efficiency', 'gpu_inference_ms', 99.0),
]


def reference_baselines() -> pd.DataFrame:
    """Published localization and efficiency numbers, tagged so they never pass as local results."""
    df = pd.DataFrame(_REFERENCE_ROWS, columns=['method', 'environment', 'metric', 'value'])
    df['source'] = REFERENCE
    return df


def compare_ablation(results: Mapping[str, Sequence[DeviationSource]], max_threshold_m: float,
                     n_points: int = EVAL_CONFIG['n_points'],
                     include_warm_up: bool = EVAL_CONFIG['include_warm_up'],
                     include_references: bool = False) -> pd.DataFrame:
    """Rank labelled groups of runs by mean AUC.

    Args:
        results: Label -> traces (one per seed)
        max_threshold_m: Threshold range shared by every curve
        n_points: Threshold grid size
        include_warm_up: Keep warm-up predictions
        include_references: Append published AUC rows (source 'reference', unranked)

    Returns:
        One row per label with mean AUC, AUC range across seeds and median deviation
    """
    if not results:
        raise ValueError("compare_ablation needs at least one labelled group")
    rows = []
    for label, runs in results.items():
        if not runs:
            raise ValueError(f"Group '{label}' has no runs")
        aucs = np.array([lpc(r, max_threshold_m, n_points, include_warm_up).auc for r in runs])
        medians = np.array([median_deviation(r, include_warm_up) for r in runs])
        rows.append({
            'label': label,
            'runs': len(runs),
            'mean_auc': float(aucs.mean()),
            'auc_min': float(aucs.min()),
            'auc_max': float(aucs.max()),
            'auc_range': float(aucs.max() - aucs.min()),
            'median_deviation_m': float(np.mean(medians)),
            'max_threshold_m': float(max_threshold_m),
            'source': COMPUTED,
        })
    table = (pd.DataFrame(rows)
             .sort_values(['mean_auc', 'label'], ascending=[False, True], kind='mergesort')
             .reset_index(drop=True))
    table.insert(0, 'rank', range(1, len(table) + 1))

    if include_references:
        refs = reference_baselines()
        refs = refs[refs['metric'] == 'auc']
        ref_rows = pd.DataFrame({
            'label': refs['method'] + ' (' + refs['environment'] + ')',
            'mean_auc': refs['value'],
            'source': REFERENCE,
        })
        table = pd.concat([table, ref_rows], ignore_index=True)
    return table


def deviation_summary(source: DeviationSource, diagonal_m: float, speed_mps: Optional[float] = None,
                      spike_threshold_m: float = EVAL_CONFIG['spike_threshold_m'],
                      include_warm_up: bool = EVAL_CONFIG['include_warm_up']) -> Dict[str, Any]:
    """Median deviation put in context: share of the environment diagonal, seconds of travel, spikes."""
    devs = collect_deviations(source, include_warm_up)
    median = median_deviation(devs)
    summary = {
        'n': int(devs.size),
        'median_deviation_m': median,
        'mean_deviation_m': float(devs.mean()),
        'max_deviation_m': float(devs.max()),
        'median_pct_of_diagonal': 100.0 * median / diagonal_m,
        'spikes': int(np.sum(devs > spike_threshold_m)),
        'spike_threshold_m': spike_threshold_m,
    }
    if speed_mps:
        summary['median_seconds_of_travel'] = median / speed_mps
    return summary


def export_curves(curves: Sequence[LpcCurve], band: Optional[ConfidenceBand], directory: Path,
                  summary: Dict[str, Any]) -> Dict[str, Path]:
    """Write per-run curves, the band (when there are several runs) and a JSON summary."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths: Dict[str, Path] = {}

    curves_df = pd.DataFrame({'threshold_m': curves[0].thresholds}) if curves else pd.DataFrame()
    for i, curve in enumerate(curves):
        curves_df[f'accuracy_{curve.label or i}'] = curve.accuracy
    paths['curves'] = directory / 'lpc_curves.csv'
    curves_df.to_csv(paths['curves'], index=False, float_format='%.10g')

    if band is not None:
        paths['band'] = directory / 'lpc_band.csv'
        band.to_frame().to_csv(paths['band'], index=False, float_format='%.10g')

    paths['summary'] = directory / 'summary.json'
    with open(paths['summary'], 'w', encoding='utf-8') as f:
        json.dump(summary, f, indent=2, sort_keys=True, default=float)
    logger.info(f"Exported {len(curves)} curves and summary to {directory}")
    return paths
