"""
World Module

This module handles the box world the vehicle flies in: static boxes,
boxes moving along piecewise-linear schedules, and the simulated LiDAR
that casts rays against them.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from mav_nav.core.dynamics import Pose
from mav_nav.io.schema import SensorModel, WorldConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MovingBox:
    """Box of fixed ``size`` whose center follows a schedule, clamped at both ends."""

    size: np.ndarray
    times: np.ndarray
    centers: np.ndarray

    def center_at(self, clock: float) -> np.ndarray:
        return np.array([np.interp(clock, self.times, self.centers[:, i]) for i in range(3)])

    def bounds_at(self, clock: float) -> Tuple[np.ndarray, np.ndarray]:
        center = self.center_at(clock)
        return center - self.size / 2.0, center + self.size / 2.0


class World:
    """Static and scheduled axis-aligned boxes inside the world bounds."""

    def __init__(self, lower, upper, static_boxes=(), moving_boxes=()):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        static = np.asarray(static_boxes, dtype=float).reshape(-1, 2, 3)
        self.static_lo = static[:, 0, :]
        self.static_hi = static[:, 1, :]
        self.moving = tuple(moving_boxes)

    @classmethod
    def from_config(cls, config: WorldConfig) -> "World":
        static = [(box.min, box.max) for box in config.static]
        moving = [
            MovingBox(
                size=np.asarray(box.size, dtype=float),
                times=np.array([stop.t for stop in box.schedule]),
                centers=np.array([stop.center for stop in box.schedule], dtype=float),
            )
            for box in config.dynamic
        ]
        return cls(config.bounds.min, config.bounds.max, static, moving)

    def boxes_at(self, clock: float) -> Tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners of every box at ``clock``, shape (B, 3) each."""
        if not self.moving:
            return self.static_lo, self.static_hi
        moving = [box.bounds_at(clock) for box in self.moving]
        lo = np.vstack([self.static_lo] + [m[0][None, :] for m in moving])
        hi = np.vstack([self.static_hi] + [m[1][None, :] for m in moving])
        return lo, hi

    def clearance(self, point, clock: float) -> float:
        """Distance from ``point`` to the nearest box surface (0 inside a box)."""
        lo, hi = self.boxes_at(clock)
        if len(lo) == 0:
            return float("inf")
        q = np.asarray(point, dtype=float).reshape(3)
        gap = np.maximum(np.maximum(lo - q, q - hi), 0.0)
        return float(np.min(np.linalg.norm(gap, axis=1)))


def ray_directions(sensor: SensorModel) -> np.ndarray:
    """Unit ray directions in the sensor frame, azimuth-major, shape (A * E, 3)."""
    azimuth = 2.0 * np.pi * np.arange(sensor.azimuth_rays) / sensor.azimuth_rays
    if sensor.elevation_rays == 1:
        elevation = np.zeros(1)
    else:
        half = np.deg2rad(sensor.vertical_fov_deg) / 2.0
        elevation = np.linspace(-half, half, sensor.elevation_rays)
    az, el = np.meshgrid(azimuth, elevation, indexing="ij")
    dirs = np.stack(
        [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)], axis=-1
    ).reshape(-1, 3)
    # exact zeros keep axis-aligned rays parallel to box faces
    dirs[np.abs(dirs) < 1e-15] = 0.0
    return dirs


def ray_box_distances(origin, directions, lo, hi) -> np.ndarray:
    """
    Entry distance of each ray into each box, ``inf`` for misses.

    Boxes containing the origin are ignored.

    Returns:
        np.ndarray: Shape (R, B)
    """
    o = np.asarray(origin, dtype=float).reshape(3)
    d = np.asarray(directions, dtype=float).reshape(-1, 3)
    lo = np.asarray(lo, dtype=float).reshape(-1, 3)
    hi = np.asarray(hi, dtype=float).reshape(-1, 3)
    if len(lo) == 0 or len(d) == 0:
        return np.full((len(d), len(lo)), np.inf)

    dd = d[:, None, :]
    parallel = dd == 0.0
    inside_slab = (o >= lo) & (o <= hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo[None, :, :] - o) / dd
        t2 = (hi[None, :, :] - o) / dd
    near = np.where(parallel, np.where(inside_slab, -np.inf, np.inf), np.minimum(t1, t2))
    far = np.where(parallel, np.where(inside_slab, np.inf, -np.inf), np.maximum(t1, t2))
    t_near = near.max(axis=2)
    t_far = far.min(axis=2)
    hit = (t_near <= t_far) & (t_near >= 0.0)
    return np.where(hit, t_near, np.inf)


def cast_scan(
    pose: Pose,
    world: World,
    sensor: SensorModel,
    clock: float,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Simulate one LiDAR sweep.

    Every ray returns the nearest box entry within ``max_range``, moved along
    the ray by Gaussian range noise; rays that hit nothing are omitted.

    Args:
        pose: Sensor pose in the world
        world: Box world
        sensor: Sensor model
        clock: Simulated time, used for moving boxes
        rng: Noise source; one draw per ray whether it hits or not

    Returns:
        np.ndarray: (N, 3) hit points in the sensor frame
    """
    dirs_sensor = ray_directions(sensor)
    dirs_world = pose.rotation.apply(dirs_sensor)
    dirs_world[np.abs(dirs_world) < 1e-15] = 0.0
    lo, hi = world.boxes_at(clock)
    ranges = ray_box_distances(pose.position, dirs_world, lo, hi)
    nearest = ranges.min(axis=1) if ranges.shape[1] else np.full(len(dirs_sensor), np.inf)

    noise = np.zeros(len(dirs_sensor))
    if rng is not None:
        noise = rng.normal(0.0, 1.0, len(dirs_sensor)) * sensor.range_noise
    valid = nearest <= sensor.max_range
    measured = np.maximum(nearest[valid] + noise[valid], 0.0)
    return dirs_sensor[valid] * measured[:, None]
