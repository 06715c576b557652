"""
Schema definitions for scenarios and module configuration.

This module defines the validated, immutable configuration models shared by
the planner, tracker, controller, state filter and simulator, and the
scenario file that bundles them.
"""

import math
from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
import logging

logger = logging.getLogger(__name__)

Vec3 = Tuple[float, float, float]


def _broadcast3(value):
    """Accept a scalar or a 3-sequence for per-axis values."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value),) * 3
    return value


class StrictModel(BaseModel):
    """Frozen model that rejects unknown keys."""

    model_config = ConfigDict(extra="forbid", frozen=True)


class PlannerMode(str, Enum):
    """Lattice layout used by the planner."""

    UNIFORM = "uniform"
    MULTIRESOLUTION = "multiresolution"


class MissionMode(str, Enum):
    """How goals reach the controller."""

    PLANNED = "planned"
    DIRECT = "direct"


class Limits(StrictModel):
    """Per-axis velocity, acceleration and jerk bounds (each min < 0 < max)."""

    v_min: Vec3 = Field(default=(-2.0, -2.0, -2.0), description="Velocity lower bound (m/s)")
    v_max: Vec3 = Field(default=(2.0, 2.0, 2.0), description="Velocity upper bound (m/s)")
    a_min: Vec3 = Field(default=(-2.0, -2.0, -2.0), description="Acceleration lower bound")
    a_max: Vec3 = Field(default=(2.0, 2.0, 2.0), description="Acceleration upper bound")
    j_min: Vec3 = Field(default=(-5.0, -5.0, -5.0), description="Jerk lower bound (m/s^3)")
    j_max: Vec3 = Field(default=(5.0, 5.0, 5.0), description="Jerk upper bound (m/s^3)")

    @field_validator("v_min", "v_max", "a_min", "a_max", "j_min", "j_max", mode="before")
    @classmethod
    def broadcast_scalars(cls, v):
        return _broadcast3(v)

    @model_validator(mode="after")
    def check_signs(self):
        for name in ("v", "a", "j"):
            lo = getattr(self, f"{name}_min")
            hi = getattr(self, f"{name}_max")
            for axis in range(3):
                if not lo[axis] < 0.0 < hi[axis]:
                    raise ValueError(
                        f"{name}_min < 0 < {name}_max violated on axis {axis}: "
                        f"{lo[axis]}, {hi[axis]}"
                    )
        return self

    def axis(self, i: int) -> "AxisLimits":
        return AxisLimits(
            v_min=self.v_min[i],
            v_max=self.v_max[i],
            a_min=self.a_min[i],
            a_max=self.a_max[i],
            j_min=self.j_min[i],
            j_max=self.j_max[i],
        )


class AxisLimits(StrictModel):
    """Bounds for a single axis."""

    v_min: float
    v_max: float
    a_min: float
    a_max: float
    j_min: float
    j_max: float

    def scaled(self, s: float) -> "AxisLimits":
        """Scale velocity and acceleration bounds by ``s``; jerk is kept."""
        return AxisLimits.model_construct(
            v_min=self.v_min * s,
            v_max=self.v_max * s,
            a_min=self.a_min * s,
            a_max=self.a_max * s,
            j_min=self.j_min,
            j_max=self.j_max,
        )


class LatticeConfig(StrictModel):
    """State-lattice planner parameters."""

    tau: float = Field(default=0.5, gt=0, description="Primitive duration (s)")
    a_max: float = Field(default=1.0, gt=0, description="Largest lattice acceleration (m/s^2)")
    accel_levels: int = Field(default=3, ge=3, description="Odd count of accelerations per axis")
    rho: float = Field(default=1000.0, ge=0, description="Time weight in edge cost")
    obstacle_weight: float = Field(default=50.0, ge=0, description="Scale of obstacle cost")
    invalid_penalty: float = Field(default=1e6, ge=0, description="Cost per invalid sample")
    d_min: float = Field(default=1.0, gt=0, description="Safety distance (m)")
    d_max: float = Field(default=2.0, gt=0, description="Obstacle cost ceiling distance (m)")
    v_max_lattice: float = Field(default=1.0, gt=0, description="Per-axis lattice speed bound")
    mode: PlannerMode = Field(default=PlannerMode.UNIFORM)
    base_resolution: float = Field(default=0.25, gt=0, description="Finest grid cell (m)")
    levels: int = Field(default=3, ge=1, description="Multiresolution level count")
    level_extent_cells: int = Field(default=16, ge=1, description="Cells spanned by each level")
    level_resolutions: Optional[Tuple[float, ...]] = Field(
        default=None, description="Explicit per-level cell sizes (multiples of base_resolution)"
    )
    goal_pos_tol: Optional[float] = Field(default=None, ge=0, description="Goal position tol")
    goal_speed_tol: Optional[float] = Field(default=None, ge=0, description="Goal speed tol")
    collision_sample_step: float = Field(default=0.1, gt=0, description="Sample spacing (m)")
    max_expansions: int = Field(default=200000, ge=1, description="Search expansion cap")
    use_heuristic: bool = Field(default=True, description="False gives plain Dijkstra")
    heuristic_max_distance: float = Field(
        default=50.0, gt=0, description="Distance covered by the 1D heuristic table (m)"
    )

    @model_validator(mode="after")
    def check_lattice(self):
        if self.accel_levels % 2 != 1:
            raise ValueError(f"accel_levels must be odd, got {self.accel_levels}")
        if not self.d_min < self.d_max:
            raise ValueError(f"d_min ({self.d_min}) must be below d_max ({self.d_max})")
        if self.level_resolutions is not None:
            if len(self.level_resolutions) != self.levels:
                raise ValueError(
                    f"level_resolutions has {len(self.level_resolutions)} entries, "
                    f"expected {self.levels}"
                )
            for res in self.level_resolutions:
                ratio = res / self.base_resolution
                if ratio < 1.0 - 1e-9 or abs(ratio - round(ratio)) > 1e-9:
                    raise ValueError(
                        f"level resolution {res} is not a multiple of {self.base_resolution}"
                    )
        return self

    @property
    def a_step(self) -> float:
        return self.a_max / ((self.accel_levels - 1) // 2)

    @property
    def velocity_bin(self) -> float:
        """Velocity lattice spacing ``a_step * tau``."""
        return self.a_step * self.tau

    @property
    def position_tolerance(self) -> float:
        if self.goal_pos_tol is not None:
            return self.goal_pos_tol
        return 0.5 * self.base_resolution

    @property
    def speed_tolerance(self) -> float:
        if self.goal_speed_tol is not None:
            return self.goal_speed_tol
        return self.velocity_bin

    def resolutions(self) -> Tuple[float, ...]:
        if self.mode == PlannerMode.UNIFORM:
            return (self.base_resolution,)
        if self.level_resolutions is not None:
            return tuple(self.level_resolutions)
        return tuple(self.base_resolution * 2**level for level in range(self.levels))


class TrackerConfig(StrictModel):
    """Waypoint tracker parameters."""

    t0: float = Field(default=1.0, ge=0, description="First-waypoint lead time (s)")
    dt_sample: float = Field(default=0.1, gt=0, description="Waypoint spacing on trajectory (s)")
    publish_rate: float = Field(default=10.0, gt=0, description="Waypoint rate (Hz)")
    d_tracking: float = Field(default=0.5, gt=0, description="Waypoint-hold distance (m)")
    d_replan: float = Field(default=1.0, gt=0, description="Path-abandon distance (m)")

    @model_validator(mode="after")
    def check_distances(self):
        if self.d_tracking > self.d_replan:
            raise ValueError(
                f"d_tracking ({self.d_tracking}) must not exceed d_replan ({self.d_replan})"
            )
        return self


class FilterConfig(StrictModel):
    """State filter noise parameters."""

    sigma_jerk: float = Field(default=1.0, ge=0, description="White-jerk process noise")
    sigma_accel: float = Field(default=0.05, ge=0, description="IMU acceleration noise")
    sigma_position: float = Field(default=0.02, ge=0, description="Position measurement noise")
    initial_position_std: float = Field(default=0.05, ge=0)
    initial_velocity_std: float = Field(default=0.1, ge=0)


class SensorModel(StrictModel):
    """Simulated LiDAR and odometry emulation."""

    azimuth_rays: int = Field(default=256, ge=1)
    elevation_rays: int = Field(default=32, ge=1)
    vertical_fov_deg: float = Field(default=90.0, gt=0, le=180)
    max_range: float = Field(default=30.0, gt=0)
    range_noise: float = Field(default=0.0, ge=0, description="Range noise sigma (m)")
    pose_noise: float = Field(default=0.02, ge=0, description="Pose measurement sigma (m)")
    drift_rate: float = Field(default=0.0, ge=0, description="Odometry drift (m/s)")


class MapConfig(StrictModel):
    """Occupancy map parameters."""

    resolution: float = Field(default=0.25, gt=0)
    scan_window: int = Field(default=30, ge=1)
    occupied_on_tie: bool = Field(default=True)


class Box(StrictModel):
    """Axis-aligned box given by its min and max corners."""

    min: Vec3
    max: Vec3

    @model_validator(mode="after")
    def check_extent(self):
        for axis in range(3):
            if not self.min[axis] < self.max[axis]:
                raise ValueError(f"degenerate box on axis {axis}: {self.min} .. {self.max}")
        return self


class ScheduleStop(StrictModel):
    """Center of a dynamic box at a given time."""

    t: float
    center: Vec3


class DynamicBox(StrictModel):
    """Box of fixed size moving along a piecewise-linear schedule."""

    size: Vec3
    schedule: Tuple[ScheduleStop, ...] = Field(..., min_length=1)

    @field_validator("size", mode="before")
    @classmethod
    def broadcast_size(cls, v):
        return _broadcast3(v)

    @model_validator(mode="after")
    def check_schedule(self):
        if any(s <= 0 for s in self.size):
            raise ValueError(f"box size must be positive, got {self.size}")
        times = [stop.t for stop in self.schedule]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"schedule times must increase, got {times}")
        return self


class WorldConfig(StrictModel):
    """Simulated world: bounds, static and dynamic boxes."""

    bounds: Box
    static: Tuple[Box, ...] = ()
    dynamic: Tuple[DynamicBox, ...] = ()


class MavConfig(StrictModel):
    """Vehicle start state, limits and plant response."""

    start: Vec3
    limits: Limits = Field(default_factory=Limits)
    attitude_lag: float = Field(default=0.15, ge=0, description="Tilt response time constant")
    disturbance_std: float = Field(default=0.0, ge=0, description="Acceleration disturbance")


class Goal(StrictModel):
    """One mission target."""

    position: Vec3
    tolerance: float = Field(default=0.1, gt=0, description="Position tolerance (m)")
    speed_tolerance: float = Field(default=0.1, gt=0, description="Speed threshold (m/s)")
    hold: float = Field(default=0.0, ge=0, description="Time to hold position (s)")


class MissionConfig(StrictModel):
    """Mission-level behaviour."""

    mode: MissionMode = Field(default=MissionMode.PLANNED)
    t_plan: float = Field(default=1.0, ge=0, description="Replanning lead time (s)")
    max_duration: float = Field(default=120.0, gt=0, description="Mission time budget (s)")
    recovery_budget: float = Field(default=5.0, ge=0, description="Time allowed to recover (s)")


class LoggingConfig(StrictModel):
    """Logging options merged over the project defaults."""

    level: Optional[str] = None
    console_level: Optional[str] = None


class Scenario(StrictModel):
    """Complete scenario file."""

    name: str = Field(default="scenario", max_length=100)
    seed: int = Field(default=0, ge=0)
    world: WorldConfig
    map: MapConfig = Field(default_factory=MapConfig)
    mav: MavConfig
    sensor: SensorModel = Field(default_factory=SensorModel)
    planner: LatticeConfig = Field(default_factory=LatticeConfig)
    tracker: TrackerConfig = Field(default_factory=TrackerConfig)
    filter: FilterConfig = Field(default_factory=FilterConfig)
    goals: Tuple[Goal, ...] = Field(..., min_length=1)
    mission: MissionConfig = Field(default_factory=MissionConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @model_validator(mode="after")
    def check_inside_world(self):
        lo, hi = self.world.bounds.min, self.world.bounds.max
        points = [("mav.start", self.mav.start)] + [
            (f"goals.{i}.position", goal.position) for i, goal in enumerate(self.goals)
        ]
        for label, point in points:
            if not all(lo[a] <= point[a] <= hi[a] for a in range(3)):
                raise ValueError(f"{label} {point} lies outside world bounds")
        if not all(math.isfinite(x) for x in self.mav.start):
            raise ValueError("mav.start must be finite")
        return self
