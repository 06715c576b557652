"""
Scenario Loader Module

This module handles loading scenario YAML files, validating them into the
immutable Scenario model and applying command-line overrides.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import ValidationError

from mav_nav.core.errors import ScenarioError
from mav_nav.io.schema import Scenario

logger = logging.getLogger(__name__)

MODE_ALIASES = {
    "uniform": "uniform",
    "multires": "multiresolution",
    "multiresolution": "multiresolution",
}


def format_issues(error: ValidationError) -> List[str]:
    """Render pydantic errors as ``section.key: message`` lines."""
    issues = []
    for item in error.errors():
        location = ".".join(str(part) for part in item.get("loc", ())) or "scenario"
        issues.append(f"{location}: {item.get('msg', 'invalid value')}")
    return issues


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ScenarioLoader:
    """Loads a scenario file and exposes the validated model."""

    def __init__(self, scenario_path: str, overrides: Optional[Dict[str, Any]] = None):
        """
        Initialize the scenario loader.

        Args:
            scenario_path: Path to the scenario YAML file
            overrides: Nested mapping merged over the file before validation

        Raises:
            ScenarioError: If the file is missing, unparsable or invalid
        """
        self.scenario_path = Path(scenario_path)
        self.raw_data: Dict[str, Any] = {}
        self.overrides = dict(overrides or {})
        self.scenario = self._load()

    def _read(self) -> Dict[str, Any]:
        if not self.scenario_path.exists():
            raise ScenarioError(
                f"Scenario file not found: {self.scenario_path}",
                issues=[f"file: {self.scenario_path} does not exist"],
            )
        try:
            with open(self.scenario_path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ScenarioError(
                f"YAML parsing error in {self.scenario_path}: {e}", issues=[f"yaml: {e}"]
            ) from e
        if not isinstance(data, dict):
            raise ScenarioError(
                f"Scenario {self.scenario_path} must be a mapping",
                issues=["scenario: top level must be a mapping"],
            )
        return data

    def _load(self) -> Scenario:
        self.raw_data = _merge(self._read(), self.overrides)
        try:
            scenario = Scenario.model_validate(self.raw_data)
        except ValidationError as e:
            issues = format_issues(e)
            for issue in issues:
                logger.error(f"Scenario {self.scenario_path}: {issue}")
            raise ScenarioError(
                f"Scenario {self.scenario_path} is invalid ({len(issues)} issue(s))", issues=issues
            ) from e
        logger.info(f"Loaded scenario '{scenario.name}' from {self.scenario_path}")
        return scenario

    def get_config_value(self, key_path: str, default: Any = None) -> Any:
        """
        Look up a validated value by dot path, e.g. ``planner.tau`` or ``goals.0.position``.

        Args:
            key_path: Dot-separated path
            default: Returned when the path does not exist

        Returns:
            Any: The value, or ``default``
        """
        value: Any = self.scenario.model_dump(mode="json")
        for part in key_path.split("."):
            if isinstance(value, dict) and part in value:
                value = value[part]
            elif isinstance(value, list) and part.isdigit() and int(part) < len(value):
                value = value[int(part)]
            else:
                return default
        return value

    def dump(self) -> str:
        """Fully defaulted scenario as YAML."""
        return yaml.safe_dump(self.scenario.model_dump(mode="json"), sort_keys=False)

    def validate_configuration(self) -> Dict[str, Any]:
        """
        Report on a scenario that already passed schema validation.

        Returns:
            Dict[str, Any]: Validation report with warnings and statistics
        """
        scenario = self.scenario
        report: Dict[str, Any] = {"valid": True, "issues": [], "warnings": [], "statistics": {}}
        planner = scenario.planner
        if scenario.map.resolution != planner.base_resolution:
            report["warnings"].append(
                f"map.resolution ({scenario.map.resolution}) differs from "
                f"planner.base_resolution ({planner.base_resolution})"
            )
        if scenario.mission.t_plan <= 0.0:
            report["warnings"].append("mission.t_plan is 0; replans start at the current waypoint")
        if planner.v_max_lattice > min(scenario.mav.limits.v_max):
            report["warnings"].append(
                "planner.v_max_lattice exceeds the controller velocity limit"
            )
        for i, goal in enumerate(scenario.goals):
            if goal.tolerance < planner.position_tolerance:
                report["warnings"].append(
                    f"goals.{i}.tolerance ({goal.tolerance}) is tighter than the planner's "
                    f"goal tolerance ({planner.position_tolerance})"
                )
        report["statistics"] = {
            "goals": len(scenario.goals),
            "static_boxes": len(scenario.world.static),
            "dynamic_boxes": len(scenario.world.dynamic),
            "rays_per_scan": scenario.sensor.azimuth_rays * scenario.sensor.elevation_rays,
        }
        return report


def cli_overrides(
    seed: Optional[int] = None, mode: Optional[str] = None
) -> Dict[str, Any]:
    """Nested override mapping for ``--seed`` and ``--mode``."""
    overrides: Dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = int(seed)
    if mode is not None:
        if mode not in MODE_ALIASES:
            raise ScenarioError(
                f"Unknown planner mode '{mode}'", issues=[f"planner.mode: unknown mode '{mode}'"]
            )
        overrides["planner"] = {"mode": MODE_ALIASES[mode]}
    return overrides


def load_scenario(path: str, seed: Optional[int] = None, mode: Optional[str] = None) -> Scenario:
    return ScenarioLoader(path, cli_overrides(seed, mode)).scenario


def create_scenario_loader(
    scenario_path: str, overrides: Optional[Dict[str, Any]] = None
) -> ScenarioLoader:
    """Factory function to create a scenario loader"""
    return ScenarioLoader(scenario_path, overrides)
