"""
Error types for the navigation stack.

Library code raises these; only the command line runner turns them into
exit codes and log lines.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from mav_nav.core.dynamics import PiecewiseTrajectory


class MavNavError(Exception):
    """Base class for all navigation stack errors."""


class TrajectoryRangeError(MavNavError, ValueError):
    """Raised when a primitive or trajectory is evaluated outside its time span."""


class VoxelIndexError(MavNavError, IndexError):
    """Raised when a voxel index lies outside the grid."""


class ScanOrderError(MavNavError, ValueError):
    """Raised when scans are integrated with a non-increasing scan index."""


class ConfigError(MavNavError, ValueError):
    """Raised when a configuration cannot be used (e.g. empty acceleration set)."""


class ScenarioError(ConfigError):
    """Raised when a scenario file cannot be read or fails validation.

    Each entry of ``issues`` has the form ``section.key: message``.
    """

    def __init__(self, message: str, issues: Optional[list] = None):
        super().__init__(message)
        self.issues = list(issues or [])


class PlanInputError(MavNavError, ValueError):
    """Raised when a plan request is malformed (start or goal outside the map)."""


class NoPathError(MavNavError):
    """Raised when the lattice search cannot reach the goal."""

    def __init__(self, message: str, expanded: int = 0):
        super().__init__(message)
        self.expanded = expanded


class ReplanFailedError(MavNavError):
    """Raised when replanning fails; the previous trajectory stays in force."""

    def __init__(self, message: str, kept: "PiecewiseTrajectory", expanded: int = 0):
        super().__init__(message)
        self.kept = kept
        self.expanded = expanded


class FilterInputError(MavNavError, ValueError):
    """Raised for invalid state-filter inputs (non-unit quaternion, stale stamp)."""
