"""
Geodetic primitives: coordinates, the fixed normalization box, and metric distance.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_DEGREE = EARTH_RADIUS_M * math.pi / 180.0

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class GeoCoordinate:
    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        if not (-90.0 <= self.lat_deg <= 90.0):
            raise ValueError(f"Latitude {self.lat_deg} outside [-90, 90]")
        if not (-180.0 <= self.lon_deg <= 180.0):
            raise ValueError(f"Longitude {self.lon_deg} outside [-180, 180]")


@dataclass(frozen=True)
class NormalizedCoordinate:
    """Position inside the bounds box: u along latitude, v along longitude.

    Ground truth inside the bounds lies in [0, 1]; predictions are never clamped.
    """
    u: float
    v: float


@dataclass(frozen=True)
class GeoBounds:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        # Both corners must be valid coordinates
        GeoCoordinate(self.lat_min, self.lon_min)
        GeoCoordinate(self.lat_max, self.lon_max)
        if not self.lat_min < self.lat_max:
            raise ValueError(f"Degenerate latitude range [{self.lat_min}, {self.lat_max}]")
        if not self.lon_min < self.lon_max:
            raise ValueError(f"Degenerate longitude range [{self.lon_min}, {self.lon_max}]")

    @property
    def lat_span(self) -> float:
        return self.lat_max - self.lat_min

    @property
    def lon_span(self) -> float:
        return self.lon_max - self.lon_min

    @property
    def center(self) -> GeoCoordinate:
        return GeoCoordinate((self.lat_min + self.lat_max) / 2.0, (self.lon_min + self.lon_max) / 2.0)

    def contains(self, coord: GeoCoordinate) -> bool:
        return (self.lat_min <= coord.lat_deg <= self.lat_max
                and self.lon_min <= coord.lon_deg <= self.lon_max)

    @classmethod
    def from_origin(cls, lat_deg: float, lon_deg: float, width_m: float, height_m: float) -> 'GeoBounds':
        """Bounds whose south-west corner is the origin and whose extent is given in metres."""
        if width_m <= 0 or height_m <= 0:
            raise ValueError(f"Extent must be positive, got {width_m} x {height_m} m")
        lat_span = height_m / METERS_PER_DEGREE
        lat_mid = math.radians(lat_deg + lat_span / 2.0)
        lon_span = width_m / (METERS_PER_DEGREE * math.cos(lat_mid))
        return cls(lat_deg, lat_deg + lat_span, lon_deg, lon_deg + lon_span)

    def to_list(self) -> list:
        return [self.lat_min, self.lat_max, self.lon_min, self.lon_max]

    def to_dict(self) -> Dict[str, float]:
        return {
            'lat_min': self.lat_min,
            'lat_max': self.lat_max,
            'lon_min': self.lon_min,
            'lon_max': self.lon_max,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GeoBounds':
        return cls(float(data['lat_min']), float(data['lat_max']),
                   float(data['lon_min']), float(data['lon_max']))


def normalize(coord: GeoCoordinate, bounds: GeoBounds) -> NormalizedCoordinate:
    """Map a coordinate into the unit square spanned by the bounds."""
    return NormalizedCoordinate(
        u=(coord.lat_deg - bounds.lat_min) / bounds.lat_span,
        v=(coord.lon_deg - bounds.lon_min) / bounds.lon_span,
    )


def denormalize(n: NormalizedCoordinate, bounds: GeoBounds) -> GeoCoordinate:
    """Inverse of normalize; values outside [0, 1] extrapolate along the same affine map."""
    return GeoCoordinate(
        lat_deg=bounds.lat_min + n.u * bounds.lat_span,
        lon_deg=bounds.lon_min + n.v * bounds.lon_span,
    )


def normalize_array(lat: np.ndarray, lon: np.ndarray, bounds: GeoBounds) -> np.ndarray:
    """Vectorized normalize; returns (..., 2) with columns (u, v)."""
    u = (np.asarray(lat, dtype=np.float64) - bounds.lat_min) / bounds.lat_span
    v = (np.asarray(lon, dtype=np.float64) - bounds.lon_min) / bounds.lon_span
    return np.stack([u, v], axis=-1)


def denormalize_array(uv: np.ndarray, bounds: GeoBounds) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized denormalize of (..., 2) arrays; returns (lat, lon)."""
    uv = np.asarray(uv, dtype=np.float64)
    lat = bounds.lat_min + uv[..., 0] * bounds.lat_span
    lon = bounds.lon_min + uv[..., 1] * bounds.lon_span
    return lat, lon


def haversine_m(lat1: ArrayLike, lon1: ArrayLike, lat2: ArrayLike, lon2: ArrayLike) -> ArrayLike:
    """Great-circle distance in metres; accepts scalars or numpy arrays."""
    phi1 = np.radians(lat1)
    phi2 = np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(np.asarray(lon2, dtype=np.float64) - np.asarray(lon1, dtype=np.float64))
    a = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2.0) ** 2
    # rounding can push a a hair above 1 for antipodal points
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def deviation_meters(a: GeoCoordinate, b: GeoCoordinate) -> float:
    """Haversine distance between two coordinates."""
    if a == b:
        return 0.0
    return float(haversine_m(a.lat_deg, a.lon_deg, b.lat_deg, b.lon_deg))


def bounds_extent_meters(bounds: GeoBounds) -> Tuple[float, float]:
    """(width_m, height_m) of the bounds box measured through its centre lines."""
    lat_mid = (bounds.lat_min + bounds.lat_max) / 2.0
    lon_mid = (bounds.lon_min + bounds.lon_max) / 2.0
    height_m = deviation_meters(GeoCoordinate(bounds.lat_min, lon_mid), GeoCoordinate(bounds.lat_max, lon_mid))
    width_m = deviation_meters(GeoCoordinate(lat_mid, bounds.lon_min), GeoCoordinate(lat_mid, bounds.lon_max))
    return width_m, height_m


def bounds_diagonal_m(bounds: GeoBounds) -> float:
    width_m, height_m = bounds_extent_meters(bounds)
    return math.hypot(width_m, height_m)


class LocalFrame:
    """Local east/north metre frame anchored at the south-west corner of the bounds.

    The map is affine in both axes, so u = y / height_m and v = x / width_m exactly.
    """

    def __init__(self, bounds: GeoBounds):
        self.bounds = bounds
        self.width_m, self.height_m = bounds_extent_meters(bounds)
        logger.debug(f"Local frame {self.width_m:.1f} x {self.height_m:.1f} m over {bounds.to_list()}")

    def to_geo(self, x_m: float, y_m: float) -> GeoCoordinate:
        return denormalize(self.to_normalized(x_m, y_m), self.bounds)

    def to_normalized(self, x_m: float, y_m: float) -> NormalizedCoordinate:
        return NormalizedCoordinate(u=y_m / self.height_m, v=x_m / self.width_m)

    def to_local(self, coord: GeoCoordinate) -> Tuple[float, float]:
        n = normalize(coord, self.bounds)
        return n.v * self.width_m, n.u * self.height_m

    def to_geo_array(self, x_m: np.ndarray, y_m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        uv = np.stack([np.asarray(y_m, dtype=np.float64) / self.height_m,
                       np.asarray(x_m, dtype=np.float64) / self.width_m], axis=-1)
        return denormalize_array(uv, self.bounds)
