"""
Rendering of first-person views (column raycaster) and overhead map tiles.

Both renderers are pure functions of the world and the pose; no global state.
"""
import logging
import math
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..config import RENDER_CONFIG
from ..errors import PoseInWallError
from .trajectory import AgentPose, Distractor
from .world import World

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
MIN_DISTANCE_M = 1e-3


def canonical_heading(heading_rad: float) -> float:
    """Reduce a heading to [0, 2*pi) with enough rounding that h and h + 2*pi agree exactly."""
    heading = round(heading_rad % TWO_PI, 9)
    return 0.0 if heading >= TWO_PI else heading


def _cast_rays(occupancy: np.ndarray, px: float, py: float, angles: np.ndarray):
    """Grid DDA for all rays at once, in cell units.

    Returns:
        (distance along the ray, hit row, hit col, whether the hit is the world edge)
    """
    rows, cols = occupancy.shape
    n = len(angles)
    dx, dy = np.cos(angles), np.sin(angles)
    map_x = np.full(n, int(math.floor(px)))
    map_y = np.full(n, int(math.floor(py)))

    with np.errstate(divide='ignore', invalid='ignore'):
        delta_x = np.where(dx == 0, np.inf, np.abs(1.0 / dx))
        delta_y = np.where(dy == 0, np.inf, np.abs(1.0 / dy))
        side_x = np.where(dx < 0, (px - map_x) * delta_x, (map_x + 1.0 - px) * delta_x)
        side_y = np.where(dy < 0, (py - map_y) * delta_y, (map_y + 1.0 - py) * delta_y)
    side_x = np.where(dx == 0, np.inf, side_x)
    side_y = np.where(dy == 0, np.inf, side_y)
    step_x = np.where(dx < 0, -1, 1)
    step_y = np.where(dy < 0, -1, 1)

    dist = np.zeros(n)
    hit = np.zeros(n, dtype=bool)
    boundary = np.zeros(n, dtype=bool)
    for _ in range(rows + cols + 2):
        active = ~hit
        if not active.any():
            break
        in_x = active & (side_x < side_y)
        in_y = active & ~in_x
        dist = np.where(in_x, side_x, np.where(in_y, side_y, dist))
        map_x = map_x + np.where(in_x, step_x, 0)
        map_y = map_y + np.where(in_y, step_y, 0)
        side_x = np.where(in_x, side_x + delta_x, side_x)
        side_y = np.where(in_y, side_y + delta_y, side_y)

        outside = active & ((map_x < 0) | (map_x >= cols) | (map_y < 0) | (map_y >= rows))
        boundary |= outside
        inside = active & ~outside
        wall = np.zeros(n, dtype=bool)
        wall[inside] = occupancy[map_y[inside], map_x[inside]]
        hit |= outside | wall
    return dist, map_y, map_x, boundary


def _slab_hits(box: Distractor, ox: float, oy: float, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Entry distance of every ray into an axis-aligned box; inf where it misses."""
    half = box.size_m / 2.0
    t_near = np.full(len(dx), -np.inf)
    t_far = np.full(len(dx), np.inf)
    for origin, direction, lo, hi in ((ox, dx, box.x_m - half, box.x_m + half),
                                      (oy, dy, box.y_m - half, box.y_m + half)):
        parallel = direction == 0
        with np.errstate(divide='ignore', invalid='ignore'):
            t1 = (lo - origin) / direction
            t2 = (hi - origin) / direction
        t_lo = np.where(parallel, -np.inf if lo <= origin <= hi else np.inf, np.minimum(t1, t2))
        t_hi = np.where(parallel, np.inf, np.maximum(t1, t2))
        t_near = np.maximum(t_near, t_lo)
        t_far = np.minimum(t_far, t_hi)
    return np.where((t_near <= t_far) & (t_near > 0) & np.isfinite(t_near), t_near, np.inf)


def render_fpp(world: World, pose: AgentPose, distractors: Sequence[Distractor] = (),
               resolution: Tuple[int, int] = (64, 64), fov_deg: Optional[float] = None,
               render_config: Dict[str, Any] = RENDER_CONFIG) -> np.ndarray:
    """Render a first-person view.

    Args:
        world: World to look at
        pose: Camera position and heading
        distractors: Moving boxes drawn in front of walls they occlude
        resolution: (W, H) in pixels
        fov_deg: Horizontal field of view; defaults to the render config
        render_config: Colors, wall and camera heights, shading distance

    Returns:
        (H, W, 3) uint8 image; column 0 is the left edge of the view
    """
    width, height = resolution
    if width <= 0 or height <= 0:
        raise ValueError(f"Resolution must be positive, got {resolution}")
    cell = world.spec.cell_size_m
    rows, cols = world.occupancy_grid.shape
    px, py = pose.x_m / cell, pose.y_m / cell
    ix, iy = int(math.floor(px)), int(math.floor(py))
    if not (0 <= ix < cols and 0 <= iy < rows):
        raise ValueError(f"Pose ({pose.x_m:.2f}, {pose.y_m:.2f}) lies outside the world")
    if world.occupancy_grid[iy, ix]:
        raise PoseInWallError(f"Pose ({pose.x_m:.2f}, {pose.y_m:.2f}) lies inside a building")

    fov = math.radians(render_config['fov_deg'] if fov_deg is None else fov_deg)
    heading = canonical_heading(pose.heading_rad)
    offsets = fov / 2.0 - (np.arange(width) + 0.5) * fov / width
    angles = heading + offsets

    dist_cells, hit_rows, hit_cols, boundary = _cast_rays(world.occupancy_grid, px, py, angles)
    perp = np.maximum(dist_cells * cell * np.cos(offsets), MIN_DISTANCE_M)

    wall_rgb = world.color_grid[np.clip(hit_rows, 0, rows - 1), np.clip(hit_cols, 0, cols - 1)].astype(np.float64)
    wall_rgb[boundary] = render_config['boundary_color']

    focal = (width / 2.0) / math.tan(fov / 2.0)
    horizon = height / 2.0
    cam_h = render_config['camera_height_m']
    shade_distance = render_config['shade_distance_m']
    rows_c = np.arange(height)[:, None] + 0.5

    image = np.empty((height, width, 3), dtype=np.float64)
    image[:] = render_config['floor_color']
    image[rows_c[:, 0] < horizon] = render_config['sky_color']

    def draw(column_mask, depth, top_h, color):
        top = horizon - focal * (top_h - cam_h) / depth
        bottom = horizon + focal * cam_h / depth
        mask = column_mask[None, :] & (rows_c >= top[None, :]) & (rows_c < bottom[None, :])
        shaded = color * (1.0 / (1.0 + depth / shade_distance))[:, None]
        image[mask] = np.broadcast_to(shaded[None, :, :], image.shape)[mask]

    draw(np.ones(width, dtype=bool), perp, render_config['wall_height_m'], wall_rgb)

    if distractors:
        ox, oy = pose.x_m, pose.y_m
        dx, dy = np.cos(angles), np.sin(angles)
        visible = [d for d in distractors if not d.contains(ox, oy)]
        visible.sort(key=lambda d: -math.hypot(d.x_m - ox, d.y_m - oy))
        for box in visible:
            t_hit = _slab_hits(box, ox, oy, dx, dy)
            depth = np.maximum(t_hit * np.cos(offsets), MIN_DISTANCE_M)
            in_front = np.isfinite(t_hit) & (depth < perp)
            if not in_front.any():
                continue
            color = np.broadcast_to(np.asarray(box.color, dtype=np.float64), (width, 3))
            draw(in_front, np.where(in_front, depth, 1.0), box.height_m, color)

    return np.clip(np.rint(image), 0, 255).astype(np.uint8)


def render_gmp(world: World, position: Tuple[float, float], coverage_m: float,
               resolution: Tuple[int, int] = (64, 64),
               out_of_world_color: Sequence[int] = tuple(RENDER_CONFIG['out_of_world_color'])) -> np.ndarray:
    """Crop the satellite base image around a position, north up.

    The centre pixel (H // 2, W // 2) samples the position itself; pixels beyond the
    world edge take the out-of-world color.
    """
    width, height = resolution
    if coverage_m <= 0:
        raise ValueError(f"coverage_m must be positive, got {coverage_m}")
    x0, y0 = position
    cell = world.spec.cell_size_m
    rows, cols = world.occupancy_grid.shape

    xs = x0 + (np.arange(width) - width // 2) * (coverage_m / width)
    ys = y0 - (np.arange(height) - height // 2) * (coverage_m / height)
    col_idx = np.floor(xs / cell).astype(np.int64)
    row_idx = np.floor(ys / cell).astype(np.int64)
    inside = ((row_idx >= 0) & (row_idx < rows))[:, None] & ((col_idx >= 0) & (col_idx < cols))[None, :]

    tile = np.empty((height, width, 3), dtype=np.uint8)
    tile[:] = np.asarray(out_of_world_color, dtype=np.uint8)
    sampled = world.color_grid[np.clip(row_idx, 0, rows - 1)[:, None], np.clip(col_idx, 0, cols - 1)[None, :]]
    tile[inside] = sampled[inside]
    return tile
