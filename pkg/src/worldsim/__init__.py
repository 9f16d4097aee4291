"""
Procedural synthetic environment: world generation, trajectories, renderers and sensors.
"""
from .renderer import canonical_heading, render_fpp, render_gmp
from .sensors import RtkFix, SensorNoiseSpec, simulate_gps, simulate_rtk
from .trajectory import AgentPose, Distractor, DistractorField, sample_trajectory
from .world import PathGraph, PathSegment, World, WorldSpec, export_world, generate_world, path_coverage

__all__ = [
    'AgentPose', 'Distractor', 'DistractorField', 'PathGraph', 'PathSegment', 'RtkFix',
    'SensorNoiseSpec', 'World', 'WorldSpec', 'canonical_heading', 'export_world',
    'generate_world', 'path_coverage', 'render_fpp', 'render_gmp', 'sample_trajectory', 'simulate_gps',
    'simulate_rtk',
]
