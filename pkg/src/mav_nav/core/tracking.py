"""
Trajectory Tracker Module

This module samples position waypoints from the planned trajectory and
hands them to the controller at the waypoint rate. It detects the two
tracking failures: the vehicle lagging behind along the path (hold the
waypoint) and the vehicle leaving the path (abort).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from mav_nav.core.dynamics import PiecewiseTrajectory
from mav_nav.io.schema import TrackerConfig

logger = logging.getLogger(__name__)


class TrackerMode(str, Enum):
    TRACKING = "tracking"
    WAITING = "waiting"
    ABORTED = "aborted"


def waypoint_times(traj: PiecewiseTrajectory, config: TrackerConfig) -> np.ndarray:
    """Trajectory times ``start + t0 + i * dt_sample`` before the end, then the end itself."""
    first = traj.start_time + config.t0
    end = traj.end_time
    if first >= end - 1e-9:
        return np.array([end])
    count = int(np.ceil((end - 1e-9 - first) / config.dt_sample))
    times = first + config.dt_sample * np.arange(count)
    times = times[times < end - 1e-9]
    return np.append(times, end)


def point_to_polyline(point, polyline) -> float:
    """Euclidean distance from ``point`` to the polyline through ``polyline`` rows."""
    q = np.asarray(point, dtype=float).reshape(3)
    pts = np.asarray(polyline, dtype=float).reshape(-1, 3)
    if len(pts) == 1:
        return float(np.linalg.norm(q - pts[0]))
    a = pts[:-1]
    ab = pts[1:] - a
    length2 = np.einsum("ij,ij->i", ab, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(length2 > 0.0, np.einsum("ij,ij->i", q - a, ab) / length2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[:, None] * ab
    return float(np.min(np.linalg.norm(closest - q, axis=1)))


@dataclass
class TrackerStatus:
    """Mutable tracker state; ``index`` points at the waypoint last emitted."""

    mode: TrackerMode
    index: int
    times: np.ndarray
    waypoints: np.ndarray
    polyline: np.ndarray
    started: bool = False

    @property
    def waypoint(self) -> np.ndarray:
        return self.waypoints[self.index]

    @property
    def waypoint_time(self) -> float:
        return float(self.times[self.index])

    @property
    def is_last(self) -> bool:
        return self.index == len(self.waypoints) - 1


def _polyline_for(
    traj: PiecewiseTrajectory, times: np.ndarray, config: TrackerConfig
) -> np.ndarray:
    lead = traj.start_time + config.dt_sample * np.arange(
        int(np.ceil((times[0] - traj.start_time) / config.dt_sample - 1e-9))
    )
    lead = lead[lead < times[0] - 1e-9]
    if len(lead) == 0:
        return traj.positions(times)
    return traj.positions(np.concatenate([lead, times]))


def start_tracking(traj: PiecewiseTrajectory, config: TrackerConfig) -> TrackerStatus:
    """
    Sample waypoints from ``traj`` and enter Tracking at index 0.

    An empty trajectory yields a single waypoint at its start position.

    Args:
        traj: Planned trajectory
        config: Tracker configuration

    Returns:
        TrackerStatus: Fresh tracking status
    """
    times = waypoint_times(traj, config)
    waypoints = traj.positions(times)
    status = TrackerStatus(
        mode=TrackerMode.TRACKING,
        index=0,
        times=times,
        waypoints=waypoints,
        polyline=_polyline_for(traj, times, config),
    )
    logger.debug(f"Tracking {len(waypoints)} waypoints from t={times[0]:.2f} to t={times[-1]:.2f}")
    return status


def retarget(
    status: TrackerStatus, traj: PiecewiseTrajectory, config: TrackerConfig
) -> TrackerStatus:
    """
    Switch to a replanned trajectory sharing the committed prefix.

    Waypoint times are resampled from the new trajectory and the current
    waypoint index is kept (clipped to the new waypoint count).
    """
    times = waypoint_times(traj, config)
    status.times = times
    status.waypoints = traj.positions(times)
    status.polyline = _polyline_for(traj, times, config)
    status.index = min(status.index, len(times) - 1)
    return status


def tracker_update(
    status: TrackerStatus, mav_position, config: TrackerConfig, clock: float = 0.0
) -> Tuple[TrackerStatus, Optional[np.ndarray]]:
    """
    Advance the tracker by one waypoint tick.

    Args:
        status: Tracker status (not Aborted)
        mav_position: Current vehicle position estimate
        config: Tracker configuration
        clock: Simulated clock, used for logging

    Returns:
        Tuple of the status and the waypoint to command, or None once aborted
    """
    if status.mode == TrackerMode.ABORTED:
        return status, None
    mav = np.asarray(mav_position, dtype=float).reshape(3)
    if not status.started:
        status.started = True
        return status, status.waypoint.copy()

    gap = float(np.linalg.norm(mav - status.waypoint))
    if status.mode == TrackerMode.WAITING:
        if gap <= config.d_tracking:
            status.mode = TrackerMode.TRACKING
            logger.debug(f"t={clock:.2f}: resumed tracking at waypoint {status.index}")
        else:
            if point_to_polyline(mav, status.polyline) > config.d_replan:
                status.mode = TrackerMode.ABORTED
                logger.info(f"t={clock:.2f}: left the planned path while waiting, aborting")
                return status, None
            return status, status.waypoint.copy()

    if gap > config.d_tracking:
        off_path = point_to_polyline(mav, status.polyline)
        if off_path > config.d_replan:
            status.mode = TrackerMode.ABORTED
            logger.info(
                f"t={clock:.2f}: {off_path:.2f} m from the planned path "
                f"(d_replan={config.d_replan}), aborting"
            )
            return status, None
        status.mode = TrackerMode.WAITING
        logger.debug(f"t={clock:.2f}: {gap:.2f} m behind waypoint {status.index}, waiting")
        return status, status.waypoint.copy()

    if not status.is_last:
        status.index += 1
    return status, status.waypoint.copy()
