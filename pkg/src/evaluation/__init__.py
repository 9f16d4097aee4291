"""
Evaluation: traces, LPC curves and AUC, median deviation, bands and ablation tables.
"""
from .lpc import ConfidenceBand, LpcCurve, auc, confidence_band, default_max_threshold, lpc, median_deviation
from .reporting import compare_ablation, deviation_summary, export_curves, reference_baselines
from .trace import TRACE_COLUMNS, LocalizationTrace, TraceEntry

__all__ = [
    'ConfidenceBand', 'LocalizationTrace', 'LpcCurve', 'TRACE_COLUMNS', 'TraceEntry', 'auc',
    'compare_ablation', 'confidence_band', 'default_max_threshold', 'deviation_summary',
    'export_curves', 'lpc', 'median_deviation', 'reference_baselines',
]
