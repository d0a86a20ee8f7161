"""Deterministic virtual-time network for protocol tests and benchmarks."""

from .net import SimLink, SimNet, SimNode, Timer, ms_to_us
from ..rng import SplitMix64, derive_seed
from .scenario import (ScenarioRunner, ScenarioSpec, overlay_kind_namer,
                       parse_scenario)

__all__ = [
    "SimLink", "SimNet", "SimNode", "Timer", "ms_to_us",
    "SplitMix64", "derive_seed",
    "ScenarioRunner", "ScenarioSpec", "overlay_kind_namer", "parse_scenario",
]
