"""
Test package for the MAV navigation stack

This package contains unit tests, integration tests and end-to-end
mission tests, plus shared fixtures for building small scenarios.
"""

import copy
import os
from typing import Any, Dict

ROOT_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
SRC_DIR = os.path.join(ROOT_DIR, "src")
SCENARIO_DIR = os.path.join(ROOT_DIR, "config", "scenarios")
CONFIG_PATH = os.path.join(ROOT_DIR, "config", "config.yaml")

# Small obstacle-free scenario; tests deep-copy and adjust it
BASE_SCENARIO: Dict[str, Any] = {
    "name": "unit",
    "seed": 0,
    "world": {"bounds": {"min": [0.0, 0.0, 0.0], "max": [10.0, 10.0, 5.0]}},
    "mav": {"start": [2.0, 5.0, 2.0]},
    "sensor": {"azimuth_rays": 32, "elevation_rays": 4},
    "goals": [{"position": [2.0, 5.0, 2.0]}],
    "mission": {"max_duration": 5.0},
}


def scenario_path(name: str) -> str:
    """Path of a shipped scenario file, e.g. ``scenario_path("doorway")``."""
    return os.path.join(SCENARIO_DIR, f"{name}.yaml")


def scenario_data(**sections: Any) -> Dict[str, Any]:
    """Copy of ``BASE_SCENARIO`` with top-level sections replaced."""
    data = copy.deepcopy(BASE_SCENARIO)
    data.update(copy.deepcopy(sections))
    return data


__all__ = [
    "BASE_SCENARIO",
    "CONFIG_PATH",
    "ROOT_DIR",
    "SCENARIO_DIR",
    "SRC_DIR",
    "scenario_data",
    "scenario_path",
]
