"""
Localization performance characteristics: share of fixes within each deviation
threshold, the normalized area under that curve, and multi-run bands.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import integrate

from ..config import EVAL_CONFIG
from ..errors import EmptyTraceError
from .trace import LocalizationTrace

logger = logging.getLogger(__name__)

DeviationSource = Union[LocalizationTrace, Sequence[float], np.ndarray]


def collect_deviations(source: DeviationSource, include_warm_up: bool) -> np.ndarray:
    if isinstance(source, LocalizationTrace):
        devs = source.deviations(include_warm_up=include_warm_up)
    else:
        devs = np.asarray(source, dtype=np.float64).ravel()
    if devs.size == 0:
        raise EmptyTraceError("No paired deviations to evaluate")
    if np.any(devs < 0) or not np.all(np.isfinite(devs)):
        raise ValueError("Deviations must be finite and non-negative")
    return devs


def default_max_threshold(diagonal_m: float) -> float:
    """Upper end of the threshold grid when none is configured."""
    if EVAL_CONFIG['max_threshold_m'] is not None:
        return float(EVAL_CONFIG['max_threshold_m'])
    return EVAL_CONFIG['threshold_fraction'] * diagonal_m


@dataclass(frozen=True, eq=False)
class LpcCurve:
    thresholds: np.ndarray      # ascending, thresholds[0] == 0, thresholds[-1] == max_threshold_m
    accuracy: np.ndarray        # fraction of fixes with deviation <= threshold
    auc: float
    n: int
    label: str = ''

    @property
    def max_threshold_m(self) -> float:
        return float(self.thresholds[-1])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'threshold_m': self.thresholds, 'accuracy': self.accuracy})


def auc(curve: LpcCurve) -> float:
    """Trapezoidal area under the curve divided by the threshold range; in [0, 1]."""
    return float(integrate.trapezoid(curve.accuracy, curve.thresholds) / curve.thresholds[-1])


def lpc(source: DeviationSource, max_threshold_m: float, n_points: int = EVAL_CONFIG['n_points'],
        include_warm_up: bool = EVAL_CONFIG['include_warm_up'], label: str = '') -> LpcCurve:
    """Accuracy on an even threshold grid over [0, max_threshold_m].

    Args:
        source: Trace (paired entries only) or raw deviations in metres
        max_threshold_m: Upper end of the threshold grid
        n_points: Grid size
        include_warm_up: Keep predictions made before the buffer filled
        label: Name carried by the curve

    Returns:
        LpcCurve with its normalized AUC
    """
    if max_threshold_m <= 0:
        raise ValueError(f"max_threshold_m must be positive, got {max_threshold_m}")
    if n_points < 2:
        raise ValueError(f"n_points must be at least 2, got {n_points}")
    devs = np.sort(collect_deviations(source, include_warm_up))
    thresholds = np.linspace(0.0, max_threshold_m, n_points)
    accuracy = np.searchsorted(devs, thresholds, side='right') / devs.size
    if not label and isinstance(source, LocalizationTrace):
        label = source.label
    curve = LpcCurve(thresholds=thresholds, accuracy=accuracy, auc=0.0, n=int(devs.size), label=label)
    return LpcCurve(thresholds, accuracy, auc(curve), curve.n, label)


def median_deviation(source: DeviationSource, include_warm_up: bool = EVAL_CONFIG['include_warm_up']) -> float:
    """Median deviation; for an even count the lower of the two middle values."""
    devs = np.sort(collect_deviations(source, include_warm_up))
    return float(devs[(devs.size - 1) // 2])


@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    thresholds: np.ndarray
    accuracy: np.ndarray        # (runs, n_points)
    aucs: np.ndarray            # per run
    labels: List[str] = field(default_factory=list)

    @property
    def lower(self) -> np.ndarray:
        return self.accuracy.min(axis=0)

    @property
    def mean(self) -> np.ndarray:
        return self.accuracy.mean(axis=0)

    @property
    def upper(self) -> np.ndarray:
        return self.accuracy.max(axis=0)

    @property
    def mean_auc(self) -> float:
        return float(self.aucs.mean())

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({'threshold_m': self.thresholds})
        for label, row in zip(self.labels, self.accuracy):
            df[f'accuracy_{label}'] = row
        df['mean'] = self.mean
        df['min'] = self.lower
        df['max'] = self.upper
        return df


def confidence_band(sources: Sequence[DeviationSource], max_threshold_m: float,
                    n_points: int = EVAL_CONFIG['n_points'],
                    include_warm_up: bool = EVAL_CONFIG['include_warm_up'],
                    labels: Optional[Sequence[str]] = None) -> ConfidenceBand:
    """Pointwise min/mean/max of the curves of several runs on a shared grid."""
    if len(sources) < 2:
        raise ValueError(f"A confidence band needs at least two runs, got {len(sources)}")
    curves = [lpc(s, max_threshold_m, n_points, include_warm_up) for s in sources]
    labels = list(labels) if labels is not None else [c.label or f'run{i}' for i, c in enumerate(curves)]
    return ConfidenceBand(
        thresholds=curves[0].thresholds,
        accuracy=np.stack([c.accuracy for c in curves]),
        aucs=np.array([c.auc for c in curves]),
        labels=labels,
    )
