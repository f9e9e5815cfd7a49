"""Parallel self-assembly planning for square modular robots on grid maps."""
from .assembly_tree import AssemblyNode, best_division, build_tree
from .assignment import astar, cost_matrix, hungarian
from .continuous_nav import TrackConfig, simulate_track
from .experiments import render_trace, run_one, run_suite, summarize, summary_csv, write_render
from .extension import ExtensionConfig, ExtensionFailure, extend_targets
from .navigation import SimConfig, Trace, run, validate_trace
from .strategies import KINDS, Strategy, execute, plan
from .world import World, exemplar_maps, generate_suite, load_world, parse_world

__all__ = [
    "AssemblyNode", "best_division", "build_tree", "astar", "cost_matrix", "hungarian",
    "TrackConfig", "simulate_track", "render_trace", "run_one", "run_suite", "summarize",
    "summary_csv", "write_render", "ExtensionConfig", "ExtensionFailure", "extend_targets",
    "SimConfig", "Trace", "run", "validate_trace", "KINDS", "Strategy", "execute", "plan",
    "World", "exemplar_maps", "generate_suite", "load_world", "parse_world",
]
__version__ = "0.1.0"
