"""
State Filter Module

This module fuses 50 Hz body-frame specific-force samples with 10 Hz
position measurements into position and velocity estimates. The process
model is linear (acceleration as a known input, white-jerk process noise),
so the usual EKF formulation reduces to a plain Kalman filter.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation

from mav_nav.core.errors import FilterInputError
from mav_nav.io.schema import FilterConfig

logger = logging.getLogger(__name__)

GRAVITY = 9.81
QUATERNION_TOLERANCE = 1e-6
EIGEN_CLIP = -1e-9

_H = np.hstack([np.eye(3), np.zeros((3, 3))])


@dataclass(frozen=True, eq=False)
class ImuSample:
    """Body-to-map orientation (x, y, z, w), specific force in the body frame, stamp."""

    orientation: np.ndarray
    accel_body: np.ndarray
    stamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=float))
        object.__setattr__(self, "accel_body", np.asarray(self.accel_body, dtype=float))


@dataclass(frozen=True, eq=False)
class PoseMeasurement:
    position: np.ndarray
    stamp: float = 0.0
    noise: np.ndarray = field(default_factory=lambda: np.eye(3) * 0.02**2)

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "noise", np.asarray(self.noise, dtype=float).reshape(3, 3))


@dataclass(frozen=True, eq=False)
class FilterState:
    """Estimate ``p``, ``v`` with 6x6 covariance ``P`` ordered (p, v)."""

    p: np.ndarray
    v: np.ndarray
    P: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))
    stamp: float = 0.0

    @property
    def mean(self) -> np.ndarray:
        return np.concatenate([self.p, self.v])


def world_accel(sample: ImuSample, g: float = GRAVITY) -> np.ndarray:
    """
    Rotate the specific force into the map frame and remove gravity.

    Raises:
        FilterInputError: If the orientation is not a unit quaternion
    """
    quat = sample.orientation.reshape(-1)
    if quat.shape != (4,) or abs(float(np.linalg.norm(quat)) - 1.0) > QUATERNION_TOLERANCE:
        raise FilterInputError(f"orientation {quat.tolist()} is not a unit quaternion")
    return Rotation.from_quat(quat).apply(sample.accel_body.reshape(3)) - np.array([0.0, 0.0, g])


def process_noise(dt: float, sigma_jerk: float, sigma_accel: float) -> np.ndarray:
    """
    6x6 process noise for one step: white jerk plus noise on the acceleration input.
    """
    q_axis = sigma_jerk**2 * np.array(
        [[dt**5 / 20.0, dt**4 / 8.0], [dt**4 / 8.0, dt**3 / 3.0]]
    ) + sigma_accel**2 * np.array([[dt**4 / 4.0, dt**3 / 2.0], [dt**3 / 2.0, dt**2]])
    q = np.zeros((6, 6))
    for i in range(3):
        idx = np.ix_([i, i + 3], [i, i + 3])
        q[idx] = q_axis
    return q


def _condition(P: np.ndarray) -> np.ndarray:
    P = 0.5 * (P + P.T)
    w, V = np.linalg.eigh(P)
    if w.min() < 0.0:
        if w.min() < EIGEN_CLIP:
            logger.debug(f"Clipping covariance eigenvalue {w.min():.3e}")
        P = (V * np.maximum(w, 0.0)) @ V.T
        P = 0.5 * (P + P.T)
    return P


def predict(
    state: FilterState, accel_world, dt: float, q_process: Optional[np.ndarray] = None
) -> FilterState:
    """
    Propagate the estimate with a known map-frame acceleration.

    Args:
        state: Current estimate
        accel_world: Map-frame acceleration (gravity removed)
        dt: Step length, positive
        q_process: 6x6 process noise; zero when omitted

    Returns:
        FilterState: Predicted estimate
    """
    if dt <= 0.0:
        raise FilterInputError(f"prediction step must be positive, got {dt}")
    a = np.asarray(accel_world, dtype=float).reshape(3)
    F = np.eye(6)
    F[:3, 3:] = dt * np.eye(3)
    p = state.p + state.v * dt + a * dt * dt / 2.0
    v = state.v + a * dt
    P = F @ state.P @ F.T
    if q_process is not None:
        P = P + q_process
    return replace(state, p=p, v=v, P=_condition(P), stamp=state.stamp + dt)


def update_position(state: FilterState, z: PoseMeasurement) -> FilterState:
    """
    Linear position update in Joseph form.

    Returns:
        FilterState: Posterior estimate
    """
    x = state.mean
    S = _H @ state.P @ _H.T + z.noise
    K = state.P @ _H.T @ np.linalg.pinv(S)
    innovation = z.position - x[:3]
    x = x + K @ innovation
    A = np.eye(6) - K @ _H
    P = A @ state.P @ A.T + K @ z.noise @ K.T
    return replace(state, p=x[:3], v=x[3:], P=_condition(P))


class StateFilter:
    """Single-owner filter fed in time order by the simulator."""

    def __init__(self, config: FilterConfig, position, velocity=None, stamp: float = 0.0):
        """
        Initialize the filter.

        Args:
            config: Noise parameters
            position: Initial position estimate
            velocity: Initial velocity estimate (zero when omitted)
            stamp: Initial time
        """
        self.config = config
        v0 = np.zeros(3) if velocity is None else np.asarray(velocity, dtype=float)
        P0 = np.diag(
            [config.initial_position_std**2] * 3 + [config.initial_velocity_std**2] * 3
        )
        self.state = FilterState(
            p=np.asarray(position, dtype=float).reshape(3), v=v0.reshape(3), P=P0, stamp=stamp
        )
        self.measurement_noise = np.eye(3) * config.sigma_position**2

    @property
    def position(self) -> np.ndarray:
        return self.state.p

    @property
    def velocity(self) -> np.ndarray:
        return self.state.v

    @property
    def orientation(self) -> np.ndarray:
        return self.state.orientation

    def _check_stamp(self, stamp: float, kind: str) -> None:
        if stamp < self.state.stamp - 1e-12:
            raise FilterInputError(
                f"{kind} stamped {stamp:.4f} arrived after {self.state.stamp:.4f}"
            )

    def predict(self, sample: ImuSample) -> FilterState:
        """Predict up to the sample's stamp using its map-frame acceleration."""
        self._check_stamp(sample.stamp, "IMU sample")
        accel = world_accel(sample)
        dt = sample.stamp - self.state.stamp
        if dt > 0.0:
            q = process_noise(dt, self.config.sigma_jerk, self.config.sigma_accel)
            self.state = predict(self.state, accel, dt, q)
        self.state = replace(
            self.state, orientation=sample.orientation.copy(), stamp=sample.stamp
        )
        return self.state

    def update(self, position, stamp: float) -> FilterState:
        self._check_stamp(stamp, "position measurement")
        z = PoseMeasurement(position=position, stamp=stamp, noise=self.measurement_noise)
        self.state = update_position(self.state, z)
        return self.state
