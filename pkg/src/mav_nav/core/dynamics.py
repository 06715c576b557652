"""
Dynamics Core Module

This module holds the shared kinematic value types (planner state, poses,
constant-acceleration motion primitives and piecewise trajectories) and the
pure functions that evaluate them.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from mav_nav.core.errors import TrajectoryRangeError

JUNCTION_TOLERANCE = 1e-9


def _vec3(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class State6:
    """Planner state: position ``p`` (m) and velocity ``v`` (m/s)."""

    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _vec3(self.p, "p"))
        object.__setattr__(self, "v", _vec3(self.v, "v"))

    def __eq__(self, other) -> bool:
        if not isinstance(other, State6):
            return NotImplemented
        return bool(np.array_equal(self.p, other.p) and np.array_equal(self.v, other.v))

    def __hash__(self) -> int:
        return hash((self.p.tobytes(), self.v.tobytes()))

    def allclose(self, other: "State6", atol: float = JUNCTION_TOLERANCE) -> bool:
        return bool(
            np.all(np.abs(self.p - other.p) <= atol) and np.all(np.abs(self.v - other.v) <= atol)
        )

    def __repr__(self) -> str:
        return f"State6(p={self.p.tolist()}, v={self.v.tolist()})"


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid pose: position (m) and body-to-map orientation as an (x, y, z, w) quaternion."""

    position: np.ndarray
    quaternion: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.0, 1.0]))

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        quat = np.array(self.quaternion, dtype=float).reshape(-1)
        if quat.shape != (4,):
            raise ValueError(f"quaternion must have 4 components, got {quat.shape}")
        quat.setflags(write=False)
        object.__setattr__(self, "quaternion", quat)

    @property
    def rotation(self) -> Rotation:
        return Rotation.from_quat(self.quaternion)

    @classmethod
    def from_rotation(cls, position, rotation: Rotation) -> "Pose":
        return cls(position=position, quaternion=rotation.as_quat())


@dataclass(frozen=True, eq=False)
class MotionPrimitive:
    """Constant acceleration ``u`` applied from ``s0`` for ``tau`` seconds."""

    s0: State6
    u: np.ndarray
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "u", _vec3(self.u, "u"))
        tau = float(self.tau)
        if not np.isfinite(tau) or tau <= 0.0:
            raise ValueError(f"primitive duration must be positive, got {self.tau}")
        object.__setattr__(self, "tau", tau)

    def truncated(self, tau: float) -> "MotionPrimitive":
        """Return the same primitive cut short at local time ``tau``."""
        return MotionPrimitive(self.s0, self.u, tau)

    @property
    def end_state(self) -> State6:
        return eval_primitive(self, self.tau)


def eval_primitive(prim: MotionPrimitive, t: float) -> State6:
    """
    Evaluate ``p + t*v + t^2/2*u`` and ``v + t*u`` at local time ``t``.

    Args:
        prim: Motion primitive to evaluate
        t: Local time in [0, tau]

    Returns:
        State6: State reached after ``t`` seconds

    Raises:
        TrajectoryRangeError: If ``t`` lies outside [0, tau]
    """
    if not (0.0 <= t <= prim.tau):
        raise TrajectoryRangeError(f"t={t} outside primitive span [0, {prim.tau}]")
    if t == 0.0:
        return prim.s0
    s0 = prim.s0
    return State6(s0.p + t * s0.v + 0.5 * t * t * prim.u, s0.v + t * prim.u)


def primitive_cost(prim: MotionPrimitive, rho: float) -> float:
    """Control effort plus weighted duration: ``|u|^2 * tau + rho * tau``."""
    if rho < 0.0:
        raise ValueError(f"time weight must be non-negative, got {rho}")
    return float(np.dot(prim.u, prim.u)) * prim.tau + rho * prim.tau


@dataclass(frozen=True, eq=False)
class PiecewiseTrajectory:
    """
    Time-indexed chain of motion primitives on an absolute clock.

    An empty trajectory still carries the state it sits at (``origin``).
    Velocities always match at junctions. Positions may jump by up to
    ``max_gap`` per axis, which lattice plans use for the offset between a
    primitive's end and the grid corner its node snaps to.
    At a junction time the trajectory reports the end of the earlier segment,
    so a prefix split there ends on the same state.
    """

    start_time: float
    segments: Tuple[MotionPrimitive, ...] = ()
    origin: Optional[State6] = None
    max_gap: float = 0.0
    _starts: Tuple[float, ...] = field(init=False, repr=False)

    def __post_init__(self):
        segments = tuple(self.segments)
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "start_time", float(self.start_time))
        if not segments and self.origin is None:
            raise ValueError("an empty trajectory needs an origin state")
        if segments and self.origin is None:
            object.__setattr__(self, "origin", segments[0].s0)

        if self.max_gap < 0.0:
            raise ValueError(f"junction gap bound must be non-negative, got {self.max_gap}")
        for i in range(len(segments) - 1):
            end = segments[i].end_state
            nxt = segments[i + 1].s0
            gap = float(np.max(np.abs(end.p - nxt.p)))
            if gap > self.max_gap + JUNCTION_TOLERANCE or not np.all(
                np.abs(end.v - nxt.v) <= JUNCTION_TOLERANCE
            ):
                raise ValueError(
                    f"trajectory is not continuous at junction {i}: {end} vs {nxt}"
                )

        starts = []
        t = self.start_time
        for seg in segments:
            starts.append(t)
            t = t + seg.tau
        object.__setattr__(self, "_starts", tuple(starts))

    def __len__(self) -> int:
        return len(self.segments)

    @property
    def is_empty(self) -> bool:
        return not self.segments

    @property
    def end_time(self) -> float:
        if not self.segments:
            return self.start_time
        return self._starts[-1] + self.segments[-1].tau

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    @property
    def initial_state(self) -> State6:
        return self.origin

    @property
    def final_state(self) -> State6:
        if not self.segments:
            return self.origin
        return self.segments[-1].end_state

    @property
    def segment_start_times(self) -> Tuple[float, ...]:
        return self._starts

    def _locate(self, t: float) -> Tuple[int, float]:
        if not (self.start_time <= t <= self.end_time):
            raise TrajectoryRangeError(
                f"t={t} outside trajectory span [{self.start_time}, {self.end_time}]"
            )
        # a junction time belongs to the segment that ends there
        i = bisect.bisect_left(self._starts, t) - 1
        i = min(max(i, 0), len(self.segments) - 1)
        local = min(max(t - self._starts[i], 0.0), self.segments[i].tau)
        return i, local

    def state_at(self, t: float) -> State6:
        if not self.segments:
            if t != self.start_time:
                raise TrajectoryRangeError(
                    f"t={t} outside empty trajectory at {self.start_time}"
                )
            return self.origin
        i, local = self._locate(t)
        return eval_primitive(self.segments[i], local)

    def acceleration_at(self, t: float) -> np.ndarray:
        if not self.segments:
            return np.zeros(3)
        i, _ = self._locate(t)
        return self.segments[i].u.copy()

    def split_at(self, t: float) -> "PiecewiseTrajectory":
        """
        Return the prefix of this trajectory up to absolute time ``t``.

        The containing segment is truncated, so states of the prefix are
        bitwise identical to states of this trajectory over [start, t].
        """
        if not self.segments:
            self.state_at(t)
            return self
        i, local = self._locate(t)
        kept: List[MotionPrimitive] = list(self.segments[:i])
        if local > 0.0:
            if local == self.segments[i].tau:
                kept.append(self.segments[i])
            else:
                kept.append(self.segments[i].truncated(local))
        if not kept:
            return PiecewiseTrajectory(self.start_time, (), origin=self.origin)
        return PiecewiseTrajectory(
            self.start_time, tuple(kept), origin=self.origin, max_gap=self.max_gap
        )

    def concatenate(self, other: "PiecewiseTrajectory") -> "PiecewiseTrajectory":
        """Append ``other``, which must start where and when this trajectory ends."""
        if abs(other.start_time - self.end_time) > JUNCTION_TOLERANCE:
            raise ValueError(
                f"cannot concatenate: gap between {self.end_time} and {other.start_time}"
            )
        if not self.final_state.allclose(other.initial_state):
            raise ValueError("cannot concatenate: states differ at the junction")
        max_gap = max(self.max_gap, other.max_gap)
        if not self.segments:
            return PiecewiseTrajectory(
                self.start_time, other.segments, origin=self.origin, max_gap=max_gap
            )
        return PiecewiseTrajectory(
            self.start_time, self.segments + other.segments, origin=self.origin, max_gap=max_gap
        )

    def sample_times(self, dt: float) -> np.ndarray:
        """Times ``start, start+dt, ...`` plus the end time, without duplicates."""
        if dt <= 0.0:
            raise ValueError(f"sample spacing must be positive, got {dt}")
        count = int(np.floor(self.duration / dt + 1e-9)) + 1
        times = self.start_time + dt * np.arange(count)
        if self.end_time - times[-1] > 1e-9:
            times = np.append(times, self.end_time)
        times[-1] = min(times[-1], self.end_time)
        return times

    def sample(self, dt: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """
        Sample positions, velocities and accelerations at ``dt`` spacing.

        Returns:
            Tuple of (times, positions, velocities, accelerations) arrays
        """
        times = self.sample_times(dt)
        positions = np.empty((len(times), 3))
        velocities = np.empty((len(times), 3))
        accels = np.empty((len(times), 3))
        for k, t in enumerate(times):
            state = self.state_at(float(t))
            positions[k] = state.p
            velocities[k] = state.v
            accels[k] = self.acceleration_at(float(t))
        return times, positions, velocities, accels

    def positions(self, times: Sequence[float]) -> np.ndarray:
        return np.array([self.state_at(float(t)).p for t in times]).reshape(-1, 3)


def trajectory_state_at(traj: PiecewiseTrajectory, t: float) -> State6:
    """Evaluate ``traj`` at absolute time ``t`` (range error outside its span)."""
    return traj.state_at(t)


@dataclass(frozen=True, eq=False)
class FullState9:
    """Controller state: position, velocity and acceleration per axis."""

    p: np.ndarray
    v: np.ndarray
    a: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "p", _vec3(self.p, "p"))
        object.__setattr__(self, "v", _vec3(self.v, "v"))
        object.__setattr__(self, "a", _vec3(self.a, "a"))

    def axis(self, i: int) -> Tuple[float, float, float]:
        return float(self.p[i]), float(self.v[i]), float(self.a[i])

    def __repr__(self) -> str:
        return f"FullState9(p={self.p.tolist()}, v={self.v.tolist()}, a={self.a.tolist()})"
