"""
Procedural world generation: a colored-block city with a connected path network.

The color grid plays the role of a high-resolution satellite base image; the
occupancy grid tells the raycaster where walls are.
"""
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, fields
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from PIL import Image, ImageColor
from scipy import ndimage
from scipy.sparse.csgraph import minimum_spanning_tree

from ..config import WORLD_PRESETS
from ..errors import ConfigValidationError, WorldGenerationError
from ..geo import GeoBounds, LocalFrame, bounds_extent_meters

logger = logging.getLogger(__name__)

GROUND_COLOR = np.array([92, 108, 80], dtype=np.int16)
PATH_COLOR = np.array([150, 146, 136], dtype=np.int16)
MIN_PATH_COVERAGE = 0.3


class PathSegment(NamedTuple):
    """Axis-aligned piece of the path network, endpoints in local metres."""
    start: Tuple[float, float]
    end: Tuple[float, float]

    @property
    def length_m(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])


@dataclass(frozen=True)
class WorldSpec:
    seed: int
    extent_m: Tuple[float, float]
    bounds: GeoBounds
    cell_size_m: float = 0.5
    building_density: float = 0.3
    palette_size: int = 12
    path_waypoint_count: int = 14
    distractor_count: int = 12
    path_width_m: float = 3.0
    building_size_m: Tuple[float, float] = (4.0, 16.0)
    distractor_speed_mps: float = 1.2
    distractor_size_m: float = 0.8
    distractor_height_m: float = 1.7
    agent_speed_mps: float = 0.66

    def __post_init__(self):
        width_m, height_m = self.extent_m
        if width_m <= 0 or height_m <= 0:
            raise ConfigValidationError(f"World extent must be positive, got {self.extent_m}")
        if self.cell_size_m <= 0:
            raise ConfigValidationError(f"cell_size_m must be positive, got {self.cell_size_m}")
        if not 0.0 <= self.building_density <= 1.0:
            raise ConfigValidationError(f"building_density must lie in [0, 1], got {self.building_density}")
        if self.palette_size < 1:
            raise ConfigValidationError("palette_size must be at least 1")
        if self.path_waypoint_count < 2:
            raise ConfigValidationError("path_waypoint_count must be at least 2")
        if self.distractor_count < 0:
            raise ConfigValidationError("distractor_count must be non-negative")
        if self.path_width_m <= 0:
            raise ConfigValidationError("path_width_m must be positive")
        lo, hi = self.building_size_m
        if not 0 < lo <= hi:
            raise ConfigValidationError(f"building_size_m must satisfy 0 < min <= max, got {self.building_size_m}")
        geo_w, geo_h = bounds_extent_meters(self.bounds)
        if abs(geo_w - width_m) > 0.01 * width_m or abs(geo_h - height_m) > 0.01 * height_m:
            raise ConfigValidationError(
                f"Bounds span {geo_w:.1f} x {geo_h:.1f} m but extent is {width_m:.1f} x {height_m:.1f} m"
            )

    @property
    def grid_shape(self) -> Tuple[int, int]:
        """(rows, cols) of the map grids."""
        width_m, height_m = self.extent_m
        return int(round(height_m / self.cell_size_m)), int(round(width_m / self.cell_size_m))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'WorldSpec':
        """Build a spec from a config section: an optional preset plus field overrides.

        Bounds come from either `bounds` (four decimal-degree fields) or `origin_deg`
        (south-west corner) combined with the extent.
        """
        data = dict(data)
        preset = data.pop('preset', None)
        merged: Dict[str, Any] = {}
        if preset is not None:
            if preset not in WORLD_PRESETS:
                raise ConfigValidationError(f"Unknown world preset '{preset}'. Use: {list(WORLD_PRESETS)}")
            merged.update(WORLD_PRESETS[preset])
        merged.update(data)

        known = {f.name for f in fields(cls)} | {'origin_deg'}
        unknown = set(merged) - known
        if unknown:
            raise ConfigValidationError(f"Unknown world settings: {sorted(unknown)}")

        extent = tuple(float(v) for v in merged['extent_m'])
        if 'bounds' in merged:
            bounds = merged['bounds']
            bounds = bounds if isinstance(bounds, GeoBounds) else GeoBounds.from_dict(bounds)
        elif 'origin_deg' in merged:
            lat0, lon0 = merged['origin_deg']
            bounds = GeoBounds.from_origin(float(lat0), float(lon0), extent[0], extent[1])
        else:
            raise ConfigValidationError("World settings need either 'bounds' or 'origin_deg'")
        merged.pop('origin_deg', None)
        merged['bounds'] = bounds
        merged['extent_m'] = extent
        merged['building_size_m'] = tuple(float(v) for v in merged.get('building_size_m', cls.building_size_m))
        return cls(**merged)

    @classmethod
    def from_preset(cls, name: str, **overrides: Any) -> 'WorldSpec':
        return cls.from_dict({'preset': name, **overrides})

    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['bounds'] = self.bounds.to_dict()
        data['extent_m'] = list(self.extent_m)
        data['building_size_m'] = list(self.building_size_m)
        return data


class PathGraph:
    """Adjacency view of the path network; nodes are segment endpoints."""

    def __init__(self, segments: List[PathSegment]):
        self.adjacency: Dict[Tuple[float, float], List[Tuple[float, float]]] = {}
        for seg in segments:
            a, b = _node_key(seg.start), _node_key(seg.end)
            if a == b:
                continue
            self.adjacency.setdefault(a, [])
            self.adjacency.setdefault(b, [])
            if b not in self.adjacency[a]:
                self.adjacency[a].append(b)
                self.adjacency[b].append(a)
        self.nodes: List[Tuple[float, float]] = sorted(self.adjacency)

    def neighbors(self, node: Tuple[float, float]) -> List[Tuple[float, float]]:
        return self.adjacency[node]


def _node_key(point: Tuple[float, float]) -> Tuple[float, float]:
    return (round(float(point[0]), 6), round(float(point[1]), 6))


@dataclass(frozen=True, eq=False)
class World:
    spec: WorldSpec
    color_grid: np.ndarray          # (rows, cols, 3) uint8, row 0 on the southern edge
    occupancy_grid: np.ndarray      # (rows, cols) bool, True = building
    path_network: List[PathSegment] = field(default_factory=list)
    path_mask: Optional[np.ndarray] = None

    @cached_property
    def frame(self) -> LocalFrame:
        return LocalFrame(self.spec.bounds)

    @cached_property
    def path_graph(self) -> PathGraph:
        return PathGraph(self.path_network)

    @property
    def occupied_fraction(self) -> float:
        return float(self.occupancy_grid.mean())

    def is_free(self, x_m: float, y_m: float) -> bool:
        rows, cols = self.occupancy_grid.shape
        col = int(math.floor(x_m / self.spec.cell_size_m))
        row = int(math.floor(y_m / self.spec.cell_size_m))
        return 0 <= row < rows and 0 <= col < cols and not self.occupancy_grid[row, col]

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.color_grid).tobytes())
        digest.update(np.packbits(self.occupancy_grid).tobytes())
        digest.update(repr([tuple(s) for s in self.path_network]).encode('utf-8'))
        return digest.hexdigest()


def generate_world(spec: WorldSpec) -> World:
    """Deterministically generate a world from its spec (seeded)."""
    rows, cols = spec.grid_shape
    rng = np.random.default_rng(spec.seed)
    logger.info(f"Generating {spec.extent_m[0]:.0f} x {spec.extent_m[1]:.0f} m world "
                f"({rows} x {cols} cells, seed {spec.seed})")

    color = GROUND_COLOR + rng.integers(-8, 9, size=(rows, cols, 1), dtype=np.int16)
    path_mask, segments = _route_paths(rng, spec, rows, cols)
    color[path_mask] = PATH_COLOR + rng.integers(-4, 5, size=(int(path_mask.sum()), 1), dtype=np.int16)

    n_components = ndimage.label(path_mask)[1]
    if n_components != 1:
        raise WorldGenerationError(f"Path network split into {n_components} components")

    occupancy = _place_buildings(rng, spec, path_mask, color)
    coverage = path_coverage(path_mask, occupancy)
    if coverage < MIN_PATH_COVERAGE:
        raise WorldGenerationError(
            f"Path network spans {coverage:.0%} of the free region, need at least {MIN_PATH_COVERAGE:.0%}"
        )
    color_grid = np.clip(color, 0, 255).astype(np.uint8)

    for grid in (color_grid, occupancy, path_mask):
        grid.setflags(write=False)
    world = World(spec=spec, color_grid=color_grid, occupancy_grid=occupancy,
                  path_network=segments, path_mask=path_mask)
    logger.info(f"World ready: {len(segments)} path segments, occupied fraction {world.occupied_fraction:.3f}")
    return world


def path_coverage(path_mask: np.ndarray, occupancy: np.ndarray) -> float:
    """Bounding-box area of the path network over that of the free cells."""
    def box_area(mask: np.ndarray) -> int:
        rows, cols = np.flatnonzero(mask.any(axis=1)), np.flatnonzero(mask.any(axis=0))
        if rows.size == 0:
            return 0
        return int((rows[-1] - rows[0] + 1) * (cols[-1] - cols[0] + 1))

    free = box_area(~occupancy)
    return box_area(path_mask) / free if free else 0.0


def _route_paths(rng: np.random.Generator, spec: WorldSpec, rows: int, cols: int):
    """Join jittered-grid waypoints with a spanning tree of L-shaped corridors."""
    half = max(1, int(round(spec.path_width_m / spec.cell_size_m / 2.0)))
    margin = half + 1
    if cols - 2 * margin < 2 or rows - 2 * margin < 2:
        raise WorldGenerationError(f"World of {rows} x {cols} cells is too small for {spec.path_width_m} m paths")

    n = spec.path_waypoint_count
    gx = max(1, int(math.ceil(math.sqrt(n * cols / rows))))
    gy = int(math.ceil(n / gx))
    grid_cells = [(i, j) for j in range(gy) for i in range(gx)]
    chosen = np.sort(rng.permutation(len(grid_cells))[:n])

    points = []
    for k in chosen:
        i, j = grid_cells[k]
        x_lo = margin + (cols - 2 * margin) * i / gx
        x_hi = margin + (cols - 2 * margin) * (i + 1) / gx
        y_lo = margin + (rows - 2 * margin) * j / gy
        y_hi = margin + (rows - 2 * margin) * (j + 1) / gy
        cx = int(rng.integers(int(x_lo), max(int(x_lo) + 1, int(x_hi))))
        cy = int(rng.integers(int(y_lo), max(int(y_lo) + 1, int(y_hi))))
        points.append((cx, cy))
    points = np.unique(np.array(points), axis=0)
    if len(points) < 2:
        raise WorldGenerationError("Fewer than two distinct path waypoints")

    manhattan = np.abs(points[:, None, :] - points[None, :, :]).sum(axis=-1).astype(float)
    tree = minimum_spanning_tree(manhattan).tocoo()
    edges = {(min(a, b), max(a, b)) for a, b in zip(tree.row, tree.col)}

    # A few short extra links turn the tree into a network with loops
    extra = max(1, len(points) // 4)
    candidates = sorted(
        ((manhattan[a, b], a, b) for a in range(len(points)) for b in range(a + 1, len(points))
         if (a, b) not in edges),
    )
    for _, a, b in candidates[:extra]:
        edges.add((a, b))

    path_mask = np.zeros((rows, cols), dtype=bool)
    segments: List[PathSegment] = []
    cell = spec.cell_size_m
    for a, b in sorted((int(a), int(b)) for a, b in edges):
        (ax, ay), (bx, by) = (int(v) for v in points[a]), (int(v) for v in points[b])
        corner = (bx, ay) if rng.random() < 0.5 else (ax, by)
        for (x1, y1), (x2, y2) in (((ax, ay), corner), (corner, (bx, by))):
            if (x1, y1) == (x2, y2):
                continue
            path_mask[min(y1, y2) - half:max(y1, y2) + half + 1,
                      min(x1, x2) - half:max(x1, x2) + half + 1] = True
            segments.append(PathSegment(((x1 + 0.5) * cell, (y1 + 0.5) * cell),
                                        ((x2 + 0.5) * cell, (y2 + 0.5) * cell)))
    return path_mask, segments


def _palette(rng: np.random.Generator, size: int) -> np.ndarray:
    hues = (np.arange(size) * 360.0 / size + rng.uniform(0, 360.0 / size)) % 360.0
    colors = []
    for hue in rng.permutation(hues):
        saturation = int(rng.integers(55, 91))
        value = int(rng.integers(60, 96))
        colors.append(ImageColor.getrgb(f"hsv({int(hue)},{saturation}%,{value}%)"))
    return np.array(colors, dtype=np.int16)


def _place_buildings(rng: np.random.Generator, spec: WorldSpec, path_mask: np.ndarray,
                     color: np.ndarray) -> np.ndarray:
    rows, cols = path_mask.shape
    occupancy = np.zeros((rows, cols), dtype=bool)
    target = int(round(spec.building_density * rows * cols))
    if target == 0:
        return occupancy

    blocked = ndimage.binary_dilation(path_mask, iterations=1)
    free = int((~blocked).sum())
    if free < target:
        raise WorldGenerationError(
            f"Building density {spec.building_density:.2f} needs {target} cells but only {free} "
            f"stay free after routing paths"
        )

    palette = _palette(rng, spec.palette_size)
    lo = max(1, int(round(spec.building_size_m[0] / spec.cell_size_m)))
    hi = max(lo, int(round(spec.building_size_m[1] / spec.cell_size_m)))
    min_side = max(1, lo // 2)
    candidates = np.argwhere(~blocked)

    placed = 0
    max_attempts = 20000 + 20 * target // (lo * lo)
    for _ in range(max_attempts):
        if placed >= target:
            break
        r0, c0 = candidates[rng.integers(len(candidates))]
        if blocked[r0, c0]:
            continue
        h = int(rng.integers(lo, hi + 1))
        w = int(rng.integers(lo, hi + 1))
        while h >= min_side and w >= min_side:
            r1, c1 = min(rows, r0 + h), min(cols, c0 + w)
            if not blocked[r0:r1, c0:c1].any():
                break
            if h >= w:
                h //= 2
            else:
                w //= 2
        else:
            continue
        occupancy[r0:r1, c0:c1] = True
        blocked[r0:r1, c0:c1] = True
        color[r0:r1, c0:c1] = palette[rng.integers(len(palette))]
        placed += (r1 - r0) * (c1 - c0)

    if placed < 0.9 * target:
        raise WorldGenerationError(
            f"Placed only {placed}/{target} building cells for density {spec.building_density:.2f}"
        )
    return occupancy


def export_world(world: World, directory: Path, config_hash: Optional[str] = None) -> Tuple[Path, Path]:
    """Write the satellite base image (lossless PNG, north up) and its metadata sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    image_path = directory / 'world.png'
    meta_path = directory / 'world.json'

    Image.fromarray(np.ascontiguousarray(world.color_grid[::-1])).save(image_path, format='PNG')
    rows, cols = world.occupancy_grid.shape
    metadata = {
        'bounds': world.spec.bounds.to_dict(),
        'spec': world.spec.to_dict(),
        'grid_shape': [rows, cols],
        'occupied_fraction': world.occupied_fraction,
        'path_segments': len(world.path_network),
        'fingerprint': world.fingerprint(),
        'config_hash': config_hash,
    }
    with open(meta_path, 'w', encoding='utf-8') as f:
        json.dump(metadata, f, indent=2, sort_keys=True)
    logger.info(f"World exported to {image_path} and {meta_path}")
    return image_path, meta_path
