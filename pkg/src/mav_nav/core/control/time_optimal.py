"""
Time-Optimal Profile Module

This module handles per-axis jerk-limited time-optimal profiles from an
arbitrary (p, v, a) state to rest at a target position, and the
synchronization of three axes to a common duration.

A profile is split at its velocity extremum: a velocity change to the peak
velocity with zero acceleration, an optional cruise at a velocity bound,
and a velocity change back to rest. The peak velocity is found by root
finding on the distance equation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from mav_nav.core.dynamics import FullState9
from mav_nav.io.schema import AxisLimits, Limits

logger = logging.getLogger(__name__)

Phase = Tuple[float, float]

MIN_PHASE = 1e-12
SCAN_POINTS = 33
SYNC_TOLERANCE = 1e-4
SYNC_ACCEPT = 1e-3


def _advance(p: float, v: float, a: float, j: float, dt: float) -> Tuple[float, float, float]:
    return (
        p + v * dt + a * dt * dt / 2.0 + j * dt * dt * dt / 6.0,
        v + a * dt + j * dt * dt / 2.0,
        a + j * dt,
    )


def _integrate(p: float, v: float, a: float, phases: Sequence[Phase]) -> Tuple[float, float, float]:
    for j, dt in phases:
        p, v, a = _advance(p, v, a, j, dt)
    return p, v, a


def _phase_time(phases: Sequence[Phase]) -> float:
    return sum(dt for _, dt in phases)


def velocity_change_phases(v0: float, a0: float, vt: float, limits: AxisLimits) -> List[Phase]:
    """
    Fastest jerk schedule taking (v0, a0) to (vt, 0), ignoring position.

    Args:
        v0: Initial velocity
        a0: Initial acceleration, within [a_min, a_max]
        vt: Target velocity
        limits: Axis limits (acceleration and jerk are used)

    Returns:
        List[Phase]: (jerk, duration) phases; at most three
    """
    j_up = limits.j_max
    j_down = -limits.j_min
    if a0 > 0.0:
        v_nat = v0 + a0 * a0 / (2.0 * j_down)
    else:
        v_nat = v0 - a0 * a0 / (2.0 * j_up)
    c = 1.0 / (2.0 * j_up) + 1.0 / (2.0 * j_down)

    if vt >= v_nat:
        peak = math.sqrt(max(0.0, (vt - v0 + a0 * a0 / (2.0 * j_up)) / c))
        hold = 0.0
        if peak > limits.a_max:
            peak = limits.a_max
            hold = (
                vt - v0 - (peak * peak - a0 * a0) / (2.0 * j_up) - peak * peak / (2.0 * j_down)
            ) / peak
        phases = [
            (limits.j_max, max(0.0, (peak - a0) / j_up)),
            (0.0, max(0.0, hold)),
            (limits.j_min, peak / j_down),
        ]
    else:
        trough = -math.sqrt(max(0.0, (v0 - vt + a0 * a0 / (2.0 * j_down)) / c))
        hold = 0.0
        if trough < limits.a_min:
            trough = limits.a_min
            hold = (vt - v0 - a0 * a0 / (2.0 * j_down) + trough * trough * c) / trough
        phases = [
            (limits.j_min, max(0.0, (a0 - trough) / j_down)),
            (0.0, max(0.0, hold)),
            (limits.j_max, -trough / j_up),
        ]
    return [(j, dt) for j, dt in phases if dt > MIN_PHASE]


@dataclass(frozen=True)
class AxisProfile:
    """Piecewise-constant jerk schedule for one axis, starting at (p0, v0, a0)."""

    p0: float
    v0: float
    a0: float
    phases: Tuple[Phase, ...] = ()

    @property
    def duration(self) -> float:
        return _phase_time(self.phases)

    @property
    def final_state(self) -> Tuple[float, float, float]:
        return _integrate(self.p0, self.v0, self.a0, self.phases)

    def state_at(self, t: float) -> Tuple[float, float, float]:
        """Exact (p, v, a) at time ``t``; the final state persists after the end."""
        p, v, a = self.p0, self.v0, self.a0
        remaining = max(0.0, t)
        for j, dt in self.phases:
            if remaining <= dt:
                return _advance(p, v, a, j, remaining)
            p, v, a = _advance(p, v, a, j, dt)
            remaining -= dt
        return p, v, a

    def jerk_at(self, t: float) -> float:
        """Jerk applied just after ``t`` (0 once the profile has ended)."""
        elapsed = 0.0
        for j, dt in self.phases:
            if t < elapsed + dt:
                return j
            elapsed += dt
        return 0.0

    def boundary_states(self) -> Iterator[Tuple[float, float, float]]:
        p, v, a = self.p0, self.v0, self.a0
        yield p, v, a
        for j, dt in self.phases:
            p, v, a = _advance(p, v, a, j, dt)
            yield p, v, a

    def sample(self, hz: float = 1000.0) -> Tuple[np.ndarray, np.ndarray]:
        """
        Sample the profile at ``hz``.

        Returns:
            Tuple of (times, states) with states shaped (N, 3) as p, v, a
        """
        times = np.arange(0.0, self.duration + 0.5 / hz, 1.0 / hz)
        states = np.array([self.state_at(float(t)) for t in times]).reshape(-1, 3)
        return times, states

    def with_dwell(self, dwell: float) -> "AxisProfile":
        if dwell <= MIN_PHASE:
            return self
        return AxisProfile(self.p0, self.v0, self.a0, self.phases + ((0.0, dwell),))


def _candidate(
    p0: float, v0: float, a0: float, vp: float, cruise: float, limits: AxisLimits
) -> Tuple[float, List[Phase]]:
    phases = velocity_change_phases(v0, a0, vp, limits)
    if cruise > MIN_PHASE:
        phases.append((0.0, cruise))
    phases.extend(velocity_change_phases(vp, 0.0, 0.0, limits))
    return _phase_time(phases), phases


def axis_time_optimal(
    p0: float, v0: float, a0: float, p_target: float, limits: AxisLimits
) -> AxisProfile:
    """
    Minimum-time jerk-limited profile from (p0, v0, a0) to (p_target, 0, 0).

    The peak velocity ``vp`` is scanned over [v_min, v_max]; every bracketed
    root of the distance equation is refined with Brent's method, and
    cruises at either velocity bound cover distances beyond the reachable
    range. The fastest candidate wins.

    Args:
        p0: Initial position
        v0: Initial velocity, within limits
        a0: Initial acceleration, within limits
        p_target: Target position
        limits: Axis limits

    Returns:
        AxisProfile: Profile reaching the target at rest; empty if already there
    """
    dp = p_target - p0
    if abs(dp) <= MIN_PHASE and v0 == 0.0 and a0 == 0.0:
        return AxisProfile(p0, v0, a0, ())

    def distance(vp: float) -> float:
        first = velocity_change_phases(v0, a0, vp, limits)
        second = velocity_change_phases(vp, 0.0, 0.0, limits)
        end_p, _, _ = _integrate(0.0, v0, a0, first)
        stop_p, _, _ = _integrate(0.0, vp, 0.0, second)
        return end_p + stop_p

    def residual(vp: float) -> float:
        return distance(vp) - dp

    candidates: List[Tuple[float, List[Phase]]] = []
    grid = np.linspace(limits.v_min, limits.v_max, SCAN_POINTS)
    values = [residual(float(vp)) for vp in grid]
    for i, vp in enumerate(grid):
        if abs(values[i]) <= MIN_PHASE:
            candidates.append(_candidate(p0, v0, a0, float(vp), 0.0, limits))
    for i in range(len(grid) - 1):
        lo, hi = values[i], values[i + 1]
        if abs(lo) <= MIN_PHASE or abs(hi) <= MIN_PHASE or lo * hi > 0.0:
            continue
        root = brentq(residual, float(grid[i]), float(grid[i + 1]), xtol=1e-14, maxiter=200)
        candidates.append(_candidate(p0, v0, a0, root, 0.0, limits))

    d_top = distance(limits.v_max)
    if dp >= d_top:
        cruise = (dp - d_top) / limits.v_max
        candidates.append(_candidate(p0, v0, a0, limits.v_max, cruise, limits))
    d_bottom = distance(limits.v_min)
    if dp <= d_bottom:
        cruise = (dp - d_bottom) / limits.v_min
        candidates.append(_candidate(p0, v0, a0, limits.v_min, cruise, limits))

    if not candidates:
        # Two roots inside one scan bracket cancel out; use the closest grid point.
        logger.warning(f"No peak velocity found for p0={p0}, v0={v0}, a0={a0}, target={p_target}")
        fine = np.linspace(limits.v_min, limits.v_max, 16 * SCAN_POINTS)
        best = float(fine[np.argmin([abs(residual(float(vp))) for vp in fine])])
        candidates.append(_candidate(p0, v0, a0, best, 0.0, limits))

    _, phases = min(candidates, key=lambda c: c[0])
    return AxisProfile(p0, v0, a0, tuple(phases))


@dataclass(frozen=True)
class SynchronizedProfiles:
    """Three axis profiles sharing one duration; ``fallback`` flags dwell-padded axes."""

    profiles: Tuple[AxisProfile, AxisProfile, AxisProfile]
    duration: float
    fallback: Tuple[bool, bool, bool] = (False, False, False)

    def __iter__(self) -> Iterator[AxisProfile]:
        return iter(self.profiles)

    def __getitem__(self, i: int) -> AxisProfile:
        return self.profiles[i]

    def __len__(self) -> int:
        return 3

    @property
    def any_fallback(self) -> bool:
        return any(self.fallback)

    def state_at(self, t: float) -> FullState9:
        rows = np.array([profile.state_at(t) for profile in self.profiles])
        return FullState9(rows[:, 0], rows[:, 1], rows[:, 2])

    def jerk_at(self, t: float) -> np.ndarray:
        return np.array([profile.jerk_at(t) for profile in self.profiles])


def _scale_floor(v0: float, a0: float, limits: AxisLimits) -> float:
    ratios = [1e-3]
    if v0 > 0.0:
        ratios.append(v0 / limits.v_max)
    elif v0 < 0.0:
        ratios.append(v0 / limits.v_min)
    if a0 > 0.0:
        ratios.append(a0 / limits.a_max)
    elif a0 < 0.0:
        ratios.append(a0 / limits.a_min)
    return max(ratios)


def stretch_profile(
    profile: AxisProfile, target: float, limits: AxisLimits, duration: float
) -> Tuple[AxisProfile, bool]:
    """
    Re-solve one axis with velocity and acceleration limits scaled by ``s``
    so its duration matches ``duration``.

    Returns:
        Tuple of (profile, fallback). On fallback the unscaled profile is
        padded with a zero-jerk dwell.
    """
    p0, v0, a0 = profile.p0, profile.v0, profile.a0
    if not profile.phases and p0 == target:
        return AxisProfile(p0, v0, a0, ((0.0, duration),) if duration > MIN_PHASE else ()), False

    def solve(s: float) -> AxisProfile:
        return axis_time_optimal(p0, v0, a0, target, limits.scaled(s))

    lo = _scale_floor(v0, a0, limits)
    best: Optional[AxisProfile] = None
    if lo < 1.0:
        slow = solve(lo)
        if slow.duration >= duration - SYNC_ACCEPT:
            best = slow
            hi = 1.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                candidate = solve(mid)
                if abs(candidate.duration - duration) < abs(best.duration - duration):
                    best = candidate
                if abs(candidate.duration - duration) <= SYNC_TOLERANCE or hi - lo < 1e-12:
                    break
                if candidate.duration > duration:
                    lo = mid
                else:
                    hi = mid

    if best is not None and abs(best.duration - duration) <= SYNC_ACCEPT:
        return best, False
    logger.debug(
        f"Synchronization fell back to a dwell: duration {profile.duration:.4f} s "
        f"padded to {duration:.4f} s"
    )
    return profile.with_dwell(duration - profile.duration), True


def synchronize_axes(
    profiles: Sequence[AxisProfile], targets, limits: Limits
) -> SynchronizedProfiles:
    """
    Stretch the faster axes so all three arrive together.

    The slowest axis is kept unchanged. Axes already resting on their
    target become zero-motion dwells of the common duration.

    Args:
        profiles: Time-optimal profiles per axis
        targets: Target position per axis
        limits: Per-axis limits

    Returns:
        SynchronizedProfiles: Profiles, common duration and fallback flags
    """
    targets = np.asarray(targets, dtype=float).reshape(3)
    t_star = max(profile.duration for profile in profiles)
    result: List[AxisProfile] = []
    fallback: List[bool] = []
    for i, profile in enumerate(profiles):
        if t_star - profile.duration <= SYNC_TOLERANCE:
            result.append(profile)
            fallback.append(False)
            continue
        stretched, fell_back = stretch_profile(
            profile, float(targets[i]), limits.axis(i), t_star
        )
        result.append(stretched)
        fallback.append(fell_back)
    return SynchronizedProfiles(tuple(result), t_star, tuple(fallback))


def plan_profiles(state: FullState9, target, limits: Limits) -> SynchronizedProfiles:
    """Per-axis time-optimal profiles from ``state`` to rest at ``target``, synchronized."""
    targets = np.asarray(target, dtype=float).reshape(3)
    profiles = [
        axis_time_optimal(*state.axis(i), float(targets[i]), limits.axis(i)) for i in range(3)
    ]
    return synchronize_axes(profiles, targets, limits)
