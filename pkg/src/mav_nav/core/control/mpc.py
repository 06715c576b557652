"""
MPC Module

This module handles the 50 Hz control step: clamp the measured state into
the limits, re-solve the synchronized time-optimal profiles toward the
waypoint, advance them by one control period and convert the predicted
acceleration into pitch, roll and climb-rate commands.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from mav_nav.core.control.time_optimal import plan_profiles
from mav_nav.core.dynamics import FullState9
from mav_nav.io.schema import Limits

logger = logging.getLogger(__name__)

GRAVITY = 9.81
CONTROL_DT = 0.02


@dataclass(frozen=True)
class AttitudeCommand:
    """Pitch ``theta`` and roll ``phi`` (rad) plus climb rate ``climb`` (m/s)."""

    theta: float
    phi: float
    climb: float


def attitude_from_accel(accel, climb: float) -> AttitudeCommand:
    """Tilt angles that produce horizontal acceleration ``accel[:2]`` at hover thrust."""
    a = np.asarray(accel, dtype=float).reshape(3)
    return AttitudeCommand(
        theta=math.atan2(float(a[0]), GRAVITY),
        phi=math.atan2(float(a[1]), GRAVITY),
        climb=float(climb),
    )


def clamp_state(state: FullState9, limits: Limits) -> FullState9:
    """Clip velocity and acceleration into the limits, logging when anything changed."""
    v = np.clip(state.v, limits.v_min, limits.v_max)
    a = np.clip(state.a, limits.a_min, limits.a_max)
    if np.array_equal(v, state.v) and np.array_equal(a, state.a):
        return state
    logger.debug(f"Clamped controller state into limits: v {state.v.tolist()} a {state.a.tolist()}")
    return FullState9(state.p, v, a)


def mpc_step(
    state: FullState9, waypoint, limits: Limits, dt: float = CONTROL_DT
) -> Tuple[AttitudeCommand, FullState9]:
    """
    One model-predictive control step toward a resting waypoint.

    Args:
        state: Current (p, v, a) estimate
        waypoint: Target position
        limits: Velocity, acceleration and jerk limits
        dt: Control period in seconds

    Returns:
        Tuple of the attitude command and the state predicted after ``dt``
    """
    clamped = clamp_state(state, limits)
    profiles = plan_profiles(clamped, waypoint, limits)
    if profiles.any_fallback:
        logger.debug(f"Axis synchronization used a dwell fallback on {profiles.fallback}")
    predicted = profiles.state_at(min(dt, profiles.duration))
    command = attitude_from_accel(predicted.a, float(predicted.v[2]))
    return command, predicted


def initial_jerk(state: FullState9, waypoint, limits: Limits) -> np.ndarray:
    """Jerk the synchronized profiles apply at time 0+."""
    return plan_profiles(clamp_state(state, limits), waypoint, limits).jerk_at(0.0)
