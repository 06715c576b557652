"""
Plant Module

This module handles the simulated vehicle: a triple integrator whose
horizontal acceleration follows the commanded tilt through a first-order
lag, a climb-rate vertical channel, seeded acceleration disturbances and
the emulated IMU and odometry readings taken from the true state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from mav_nav.core.control.mpc import GRAVITY, AttitudeCommand
from mav_nav.core.dynamics import FullState9, Pose
from mav_nav.core.estimation.state_filter import ImuSample
from mav_nav.io.schema import MavConfig

_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True, eq=False)
class MavModel:
    """True vehicle state plus the plant parameters."""

    state: FullState9
    attitude_lag: float = 0.15
    disturbance_std: float = 0.0
    mean_accel: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def from_config(cls, config: MavConfig) -> "MavModel":
        return cls(
            state=FullState9(config.start, np.zeros(3)),
            attitude_lag=config.attitude_lag,
            disturbance_std=config.disturbance_std,
        )

    @property
    def position(self) -> np.ndarray:
        return self.state.p

    @property
    def velocity(self) -> np.ndarray:
        return self.state.v

    @property
    def rotation(self) -> Rotation:
        """Body orientation implied by the current horizontal acceleration."""
        theta = math.atan2(float(self.state.a[0]), GRAVITY)
        phi = math.atan2(float(self.state.a[1]), GRAVITY)
        return Rotation.from_euler("yx", [theta, -phi])

    @property
    def pose(self) -> Pose:
        return Pose.from_rotation(self.state.p, self.rotation)


def commanded_accel(cmd: AttitudeCommand) -> np.ndarray:
    """Horizontal acceleration requested by a tilt command (z left at 0)."""
    return np.array([GRAVITY * math.tan(cmd.theta), GRAVITY * math.tan(cmd.phi), 0.0])


def mav_step(
    model: MavModel, cmd: AttitudeCommand, dt: float, rng: Optional[np.random.Generator] = None
) -> MavModel:
    """
    Advance the plant by one control period.

    Horizontal acceleration relaxes toward ``g * tan(angle)`` with time
    constant ``attitude_lag``, integrated in closed form. The vertical channel
    reaches the commanded climb rate within the step. A disturbance
    acceleration, drawn from ``rng`` on every call, acts over the whole step.

    Args:
        model: Current plant
        cmd: Attitude command held for ``dt``
        dt: Step length in seconds
        rng: Disturbance source

    Returns:
        MavModel: Plant after ``dt``, with ``mean_accel`` set to the step's mean acceleration
    """
    s = model.state
    p0, v0, a0 = s.p.copy(), s.v.copy(), s.a.copy()
    ac = commanded_accel(cmd)
    tau = model.attitude_lag

    p1, v1, a1 = p0.copy(), v0.copy(), a0.copy()
    h = slice(0, 2)
    if tau > 0.0:
        decay = math.exp(-dt / tau)
        gap = a0[h] - ac[h]
        a1[h] = ac[h] + gap * decay
        v1[h] = v0[h] + ac[h] * dt + gap * tau * (1.0 - decay)
        p1[h] = p0[h] + v0[h] * dt + 0.5 * ac[h] * dt**2 + gap * tau * (dt - tau * (1.0 - decay))
    else:
        a1[h] = ac[h]
        v1[h] = v0[h] + ac[h] * dt
        p1[h] = p0[h] + v0[h] * dt + 0.5 * ac[h] * dt**2

    v1[2] = cmd.climb
    p1[2] = p0[2] + 0.5 * (v0[2] + cmd.climb) * dt
    a1[2] = 0.0

    draw = np.zeros(3) if rng is None else rng.normal(0.0, 1.0, 3)
    disturbance = draw * model.disturbance_std
    v1 = v1 + disturbance * dt
    p1 = p1 + 0.5 * disturbance * dt**2

    mean_accel = (v1 - v0) / dt
    return replace(model, state=FullState9(p1, v1, a1), mean_accel=mean_accel)


def imu_sample(model: MavModel, stamp: float) -> ImuSample:
    """Noiseless specific force over the last step, expressed in the body frame."""
    rotation = model.rotation
    specific_force = rotation.inv().apply(model.mean_accel + GRAVITY * _UP)
    return ImuSample(orientation=rotation.as_quat(), accel_body=specific_force, stamp=stamp)


def drift_direction(rng: np.random.Generator) -> np.ndarray:
    """Seeded unit vector along which emulated odometry drifts."""
    direction = rng.normal(0.0, 1.0, 3)
    norm = float(np.linalg.norm(direction))
    if norm < 1e-12:
        return np.array([1.0, 0.0, 0.0])
    return direction / norm


def measure_position(
    true_position,
    clock: float,
    noise_std: float,
    drift_rate: float,
    direction: np.ndarray,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Odometry emulation: truth plus linear drift plus Gaussian noise."""
    draw = np.zeros(3) if rng is None else rng.normal(0.0, 1.0, 3)
    return (
        np.asarray(true_position, dtype=float)
        + drift_rate * clock * np.asarray(direction, dtype=float)
        + draw * noise_std
    )
