"""
Simulated RTK ground truth and phone-grade GPS along a trajectory.
"""
import logging
from dataclasses import dataclass, fields
from typing import Any, Dict, List, Sequence

import numpy as np

from ..config import SENSOR_CONFIG
from ..errors import ConfigValidationError
from ..evaluation.trace import LocalizationTrace, TraceEntry
from ..geo import GeoCoordinate, LocalFrame, haversine_m
from .trajectory import AgentPose

logger = logging.getLogger(__name__)

# Fixes reporting more than this are the ones the accuracy filter drops
BAD_FIX_ACCURACY_M = 5.0


@dataclass(frozen=True)
class SensorNoiseSpec:
    rtk_sigma_m: float = SENSOR_CONFIG['rtk_sigma_m']
    rtk_accuracy_median_m: float = SENSOR_CONFIG['rtk_accuracy_median_m']
    rtk_accuracy_log_sigma: float = SENSOR_CONFIG['rtk_accuracy_log_sigma']
    rtk_bad_fix_prob: float = SENSOR_CONFIG['rtk_bad_fix_prob']
    rtk_bad_fix_scale_m: float = SENSOR_CONFIG['rtk_bad_fix_scale_m']
    phone_sigma_m: float = SENSOR_CONFIG['phone_sigma_m']
    phone_outlier_prob: float = SENSOR_CONFIG['phone_outlier_prob']
    phone_outlier_sigma_m: float = SENSOR_CONFIG['phone_outlier_sigma_m']

    def __post_init__(self):
        for name in ('rtk_sigma_m', 'rtk_accuracy_median_m', 'rtk_accuracy_log_sigma',
                     'rtk_bad_fix_scale_m', 'phone_sigma_m', 'phone_outlier_sigma_m'):
            if getattr(self, name) < 0:
                raise ConfigValidationError(f"{name} must be non-negative, got {getattr(self, name)}")
        for name in ('rtk_bad_fix_prob', 'phone_outlier_prob'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigValidationError(f"{name} must lie in [0, 1], got {getattr(self, name)}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SensorNoiseSpec':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigValidationError(f"Unknown sensor settings: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> Dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class RtkFix:
    """RTK fix at a trajectory timestamp, with the accuracy value the receiver reports."""
    t_s: float
    coord: GeoCoordinate
    rtk_accuracy_m: float
    pose: AgentPose


def _positions(truth: Sequence[AgentPose]) -> np.ndarray:
    return np.array([[p.x_m, p.y_m] for p in truth], dtype=np.float64).reshape(-1, 2)


def simulate_rtk(truth: Sequence[AgentPose], noise: SensorNoiseSpec, seed: int,
                 frame: LocalFrame) -> List[RtkFix]:
    """Simulate RTK fixes: centimetre position noise plus a reported accuracy per fix.

    Good fixes report a lognormal accuracy around the configured median (never above
    5 m); with probability rtk_bad_fix_prob a fix reports more than 5 m instead.
    """
    rng = np.random.default_rng(seed)
    n = len(truth)
    xy = _positions(truth)
    offsets = rng.normal(0.0, noise.rtk_sigma_m, size=(n, 2))
    bad = rng.random(n) < noise.rtk_bad_fix_prob
    good_acc = noise.rtk_accuracy_median_m * np.exp(noise.rtk_accuracy_log_sigma * rng.standard_normal(n))
    bad_acc = BAD_FIX_ACCURACY_M + 1e-3 + rng.exponential(max(noise.rtk_bad_fix_scale_m, 1e-9), size=n)
    accuracy = np.where(bad, bad_acc, np.minimum(good_acc, BAD_FIX_ACCURACY_M))

    lat, lon = frame.to_geo_array(xy[:, 0] + offsets[:, 0], xy[:, 1] + offsets[:, 1])
    fixes = [RtkFix(p.t_s, GeoCoordinate(float(la), float(lo)), float(acc), p)
             for p, la, lo, acc in zip(truth, lat, lon, accuracy)]
    logger.debug(f"Simulated {n} RTK fixes, {int(bad.sum())} reporting > {BAD_FIX_ACCURACY_M} m")
    return fixes


def simulate_gps(truth: Sequence[AgentPose], noise: SensorNoiseSpec, seed: int,
                 frame: LocalFrame) -> LocalizationTrace:
    """Simulate phone GPS as a localization trace against the true poses.

    Each fix gets isotropic Gaussian noise of phone_sigma_m, or phone_outlier_sigma_m
    with probability phone_outlier_prob.
    """
    rng = np.random.default_rng(seed)
    n = len(truth)
    xy = _positions(truth)
    outlier = rng.random(n) < noise.phone_outlier_prob
    sigma = np.where(outlier, noise.phone_outlier_sigma_m, noise.phone_sigma_m)
    offsets = rng.standard_normal((n, 2)) * sigma[:, None]

    truth_lat, truth_lon = frame.to_geo_array(xy[:, 0], xy[:, 1])
    pred_lat, pred_lon = frame.to_geo_array(xy[:, 0] + offsets[:, 0], xy[:, 1] + offsets[:, 1])
    deviations = haversine_m(truth_lat, truth_lon, pred_lat, pred_lon)

    entries = [
        TraceEntry(p.t_s, GeoCoordinate(float(pa), float(po)), GeoCoordinate(float(ta), float(to)), float(d))
        for p, pa, po, ta, to, d in zip(truth, pred_lat, pred_lon, truth_lat, truth_lon, deviations)
    ]
    logger.debug(f"Simulated {n} phone GPS fixes ({int(outlier.sum())} outliers)")
    return LocalizationTrace(entries, label='Phone GPS')
