"""
Localization traces: timestamped predictions paired with ground truth.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..geo import GeoCoordinate, haversine_m

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ['t_s', 'pred_lat', 'pred_lon', 'truth_lat', 'truth_lon', 'deviation_m', 'warm_up', 'inference_ms']


@dataclass(frozen=True)
class TraceEntry:
    """One prediction; truth and deviation are None when no truth fix was close enough in time."""
    t_s: float
    predicted: GeoCoordinate
    truth: Optional[GeoCoordinate] = None
    deviation_m: Optional[float] = None
    warm_up: bool = False
    inference_ms: float = 0.0

    @property
    def paired(self) -> bool:
        return self.truth is not None


class LocalizationTrace:
    """Ordered sequence of trace entries with metric-ready views."""

    def __init__(self, entries: Sequence[TraceEntry] = (), label: str = ''):
        self.entries: List[TraceEntry] = list(entries)
        self.label = label
        for entry in self.entries:
            if entry.deviation_m is not None and entry.deviation_m < 0:
                raise ValueError(f"Negative deviation {entry.deviation_m} at t={entry.t_s}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TraceEntry]:
        return iter(self.entries)

    def append(self, entry: TraceEntry) -> None:
        self.entries.append(entry)

    def deviations(self, include_warm_up: bool = False) -> np.ndarray:
        """Deviations of paired entries, optionally keeping warm-up predictions."""
        return np.array([e.deviation_m for e in self.entries
                         if e.paired and (include_warm_up or not e.warm_up)], dtype=np.float64)

    @classmethod
    def from_deviations(cls, deviations: Sequence[float], label: str = '') -> 'LocalizationTrace':
        """Trace carrying only deviations, for metric code and synthetic runs."""
        origin = GeoCoordinate(0.0, 0.0)
        return cls([TraceEntry(float(i), origin, origin, float(d)) for i, d in enumerate(deviations)], label=label)

    @classmethod
    def from_arrays(cls, t_s: np.ndarray, pred_lat: np.ndarray, pred_lon: np.ndarray,
                    truth_lat: np.ndarray, truth_lon: np.ndarray, label: str = '') -> 'LocalizationTrace':
        deviations = haversine_m(pred_lat, pred_lon, truth_lat, truth_lon)
        entries = [
            TraceEntry(float(t), GeoCoordinate(float(pa), float(po)), GeoCoordinate(float(ta), float(to)), float(d))
            for t, pa, po, ta, to, d in zip(t_s, pred_lat, pred_lon, truth_lat, truth_lon, deviations)
        ]
        return cls(entries, label=label)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for e in self.entries:
            rows.append({
                't_s': e.t_s,
                'pred_lat': e.predicted.lat_deg,
                'pred_lon': e.predicted.lon_deg,
                'truth_lat': e.truth.lat_deg if e.truth else np.nan,
                'truth_lon': e.truth.lon_deg if e.truth else np.nan,
                'deviation_m': e.deviation_m if e.deviation_m is not None else np.nan,
                'warm_up': bool(e.warm_up),
                'inference_ms': e.inference_ms,
            })
        return pd.DataFrame(rows, columns=TRACE_COLUMNS)

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format='%.10g')
        logger.debug(f"Wrote trace of {len(self)} entries to {path}")
        return path

    @classmethod
    def from_csv(cls, path: Path, label: str = '') -> 'LocalizationTrace':
        df = pd.read_csv(path)
        missing = set(TRACE_COLUMNS) - set(df.columns)
        if missing:
            raise ValueError(f"Trace file {path} lacks columns {sorted(missing)}")
        entries = []
        for row in df.itertuples(index=False):
            paired = not (pd.isna(row.truth_lat) or pd.isna(row.truth_lon))
            entries.append(TraceEntry(
                t_s=float(row.t_s),
                predicted=GeoCoordinate(float(row.pred_lat), float(row.pred_lon)),
                truth=GeoCoordinate(float(row.truth_lat), float(row.truth_lon)) if paired else None,
                deviation_m=float(row.deviation_m) if paired else None,
                warm_up=bool(row.warm_up),
                inference_ms=float(row.inference_ms),
            ))
        return cls(entries, label=label)
