"""
Geodetic primitives: normalization against fixed bounds and metric distance.
"""
from .coordinates import (
    EARTH_RADIUS_M,
    GeoBounds,
    GeoCoordinate,
    LocalFrame,
    NormalizedCoordinate,
    bounds_diagonal_m,
    bounds_extent_meters,
    denormalize,
    denormalize_array,
    deviation_meters,
    haversine_m,
    normalize,
    normalize_array,
)

__all__ = [
    'EARTH_RADIUS_M', 'GeoBounds', 'GeoCoordinate', 'LocalFrame', 'NormalizedCoordinate',
    'bounds_diagonal_m', 'bounds_extent_meters', 'denormalize', 'denormalize_array',
    'deviation_meters', 'haversine_m', 'normalize', 'normalize_array',
]
