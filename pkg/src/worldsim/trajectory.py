"""
Agent and distractor motion along the world's path network.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .world import PathGraph, World

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
SPEED_JITTER = 0.10


@dataclass(frozen=True)
class AgentPose:
    x_m: float
    y_m: float
    heading_rad: float      # counter-clockwise from east, in [0, 2*pi)
    t_s: float


class _PathWalker:
    """Random walk along the path graph that never turns straight back unless at a dead end."""

    def __init__(self, graph: PathGraph, rng: np.random.Generator):
        self.graph = graph
        self.rng = rng
        self.node = graph.nodes[int(rng.integers(len(graph.nodes)))]
        self.pos = np.array(self.node, dtype=np.float64)
        self.target = self._pick_next(self.node, None)

    def _pick_next(self, node, came_from):
        options = [n for n in self.graph.neighbors(node) if n != came_from]
        if not options:
            options = self.graph.neighbors(node)
        return options[int(self.rng.integers(len(options)))]

    @property
    def heading(self) -> float:
        heading = math.atan2(self.target[1] - self.node[1], self.target[0] - self.node[0]) % TWO_PI
        return 0.0 if heading >= TWO_PI else heading

    def advance(self, distance: float) -> None:
        while distance > 1e-12:
            to_target = np.subtract(self.target, self.pos)
            remaining = float(np.hypot(*to_target))
            if distance < remaining:
                self.pos = self.pos + to_target / remaining * distance
                return
            self.pos = np.array(self.target, dtype=np.float64)
            distance -= remaining
            came_from, self.node = self.node, self.target
            self.target = self._pick_next(self.node, came_from)


def sample_trajectory(world: World, speed_mps: float, duration_s: float, seed: int,
                      start_t_s: float = 0.0) -> List[AgentPose]:
    """Sample a 1 Hz trajectory that follows the path network.

    Args:
        world: World whose path network constrains the motion
        speed_mps: Mean speed; each step is jittered by +/-10%
        duration_s: Length of the trajectory in seconds
        seed: Random seed
        start_t_s: Timestamp of the first pose

    Returns:
        Poses at start_t_s, start_t_s + 1, ... covering duration_s
    """
    if duration_s <= 0:
        raise ValueError(f"duration_s must be positive, got {duration_s}")
    if speed_mps < 0:
        raise ValueError(f"speed_mps must be non-negative, got {speed_mps}")
    graph = world.path_graph
    if not graph.nodes:
        raise ValueError("World has no path network to walk on")

    rng = np.random.default_rng(seed)
    walker = _PathWalker(graph, rng)
    n_poses = max(1, int(math.ceil(duration_s - 1e-9)))
    jitter = rng.uniform(1.0 - SPEED_JITTER, 1.0 + SPEED_JITTER, size=n_poses)

    poses = []
    for i in range(n_poses):
        poses.append(AgentPose(float(walker.pos[0]), float(walker.pos[1]), walker.heading, start_t_s + float(i)))
        walker.advance(speed_mps * jitter[i])
    logger.debug(f"Sampled {n_poses} poses at {speed_mps:.2f} m/s (seed {seed})")
    return poses


@dataclass(frozen=True)
class Distractor:
    """Moving axis-aligned box (pedestrian or vehicle) that occludes the first-person view."""
    x_m: float
    y_m: float
    size_m: float
    height_m: float
    color: Tuple[int, int, int]

    def contains(self, x_m: float, y_m: float) -> bool:
        half = self.size_m / 2.0
        return abs(x_m - self.x_m) <= half and abs(y_m - self.y_m) <= half


class DistractorField:
    """Distractors walking the path network, queried by timestamp."""

    def __init__(self, world: World, duration_s: float, seed: int, count: int = None,
                 start_t_s: float = 0.0):
        spec = world.spec
        self.count = spec.distractor_count if count is None else count
        self.start_t_s = start_t_s
        rng = np.random.default_rng(seed)
        self._colors = [tuple(int(c) for c in rng.integers(30, 230, size=3)) for _ in range(self.count)]
        self._tracks: List[Sequence[AgentPose]] = []
        for _ in range(self.count):
            speed = spec.distractor_speed_mps * float(rng.uniform(0.7, 1.3))
            self._tracks.append(sample_trajectory(world, speed, duration_s, seed=int(rng.integers(2 ** 31)),
                                                  start_t_s=start_t_s))
        self._size_m = spec.distractor_size_m
        self._height_m = spec.distractor_height_m
        logger.debug(f"Distractor field with {self.count} walkers over {duration_s:.0f} s")

    def state_at(self, t_s: float) -> List[Distractor]:
        """Distractor boxes at the given time (clamped to the simulated span)."""
        out = []
        for track, color in zip(self._tracks, self._colors):
            idx = min(max(int(round(t_s - self.start_t_s)), 0), len(track) - 1)
            pose = track[idx]
            out.append(Distractor(pose.x_m, pose.y_m, self._size_m, self._height_m, color))
        return out
