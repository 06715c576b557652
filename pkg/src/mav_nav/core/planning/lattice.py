"""
State Lattice Module

This module handles the lattice geometry (uniform or local multiresolution),
the control set, the obstacle cost of motion primitives and successor
generation for the search.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from mav_nav.core.dynamics import MotionPrimitive, State6, primitive_cost
from mav_nav.core.errors import ConfigError
from mav_nav.core.mapping.obstacle_index import MapSnapshot, ObstacleIndex
from mav_nav.io.schema import LatticeConfig

logger = logging.getLogger(__name__)

NodeKey = Tuple[int, int, int, int, int, int]

SNAP_EPS = 1e-9


def snap_cells(x, step=None) -> np.ndarray:
    """
    Nearest integer; ties fall back toward where ``step`` came from.

    Without a step, ties round up. Shifting ``x`` by an integer shifts the
    result by the same integer, so a primitive advances the same number of
    corners wherever it starts, and mirrored steps advance mirrored counts.
    """
    x = np.asarray(x, dtype=float)
    up = np.floor(x + 0.5 + SNAP_EPS)
    if step is None:
        return up.astype(np.int64)
    down = np.ceil(x - 0.5 - SNAP_EPS)
    return np.where(np.asarray(step) > 0.0, down, up).astype(np.int64)


def acceleration_set(config: LatticeConfig) -> np.ndarray:
    """
    Evenly spaced per-axis accelerations spanning [-a_max, a_max].

    Raises:
        ConfigError: If the set is empty or has no non-zero level
    """
    levels = int(config.accel_levels)
    if levels < 1 or levels % 2 != 1:
        raise ConfigError(f"acceleration set needs an odd, positive level count, got {levels}")
    accels = np.linspace(-config.a_max, config.a_max, levels)
    if levels < 3 or config.a_max <= 0:
        raise ConfigError("acceleration set has no non-zero control")
    return accels


def control_set(config: LatticeConfig) -> np.ndarray:
    """Cartesian product of per-axis accelerations, shape (L^3, 3)."""
    accels = acceleration_set(config)
    return np.array(list(itertools.product(accels, accels, accels)), dtype=float)


def sample_count(speed_bound: float, config: LatticeConfig) -> int:
    """Samples per primitive: spacing at most ``collision_sample_step``, never fewer than 5."""
    arc = speed_bound * config.tau
    return max(5, int(math.ceil(arc / config.collision_sample_step - 1e-9)) + 1)


def score_distance_profiles(distances, config: LatticeConfig) -> np.ndarray:
    """
    Obstacle cost for rows of nearest-obstacle distances sampled along primitives.

    Each sample costs ``(d_max - d) / (d_max - d_min)`` clipped to [0, 1];
    the row cost is the maximum scaled by ``obstacle_weight``. A row whose
    first sample lies inside ``d_min`` survives only if its distances never
    decrease, paying ``invalid_penalty`` per invalid sample. Any other row
    with an invalid sample is rejected.

    Returns:
        np.ndarray: Cost per row, NaN for rejected rows
    """
    d = np.atleast_2d(np.asarray(distances, dtype=float))
    invalid = d < config.d_min
    span = config.d_max - config.d_min
    with np.errstate(invalid="ignore"):
        ramp = np.clip((config.d_max - d) / span, 0.0, 1.0)
        ramp = np.where(invalid, 0.0, ramp)
        base = config.obstacle_weight * ramp.max(axis=1)
        monotone = np.all(np.diff(d, axis=1) >= 0.0, axis=1)
    penalty = config.invalid_penalty * invalid.sum(axis=1)
    any_invalid = invalid.any(axis=1)
    escape = invalid[:, 0] & monotone
    return np.where(any_invalid, np.where(escape, base + penalty, np.nan), base)


def score_distance_profile(distances, config: LatticeConfig) -> Optional[float]:
    """Single-row form of :func:`score_distance_profiles`; None means invalid."""
    cost = float(score_distance_profiles(np.asarray(distances, dtype=float)[None, :], config)[0])
    return None if math.isnan(cost) else cost


def primitive_samples(prim: MotionPrimitive, config: LatticeConfig) -> np.ndarray:
    end = prim.end_state
    bound = max(float(np.linalg.norm(prim.s0.v)), float(np.linalg.norm(end.v)))
    t = np.linspace(0.0, prim.tau, sample_count(bound, config))[:, None]
    return prim.s0.p + t * prim.s0.v + 0.5 * t * t * prim.u


def obstacle_cost_of_primitive(
    prim: MotionPrimitive, index: ObstacleIndex, config: LatticeConfig
) -> Optional[float]:
    """
    Obstacle cost of one primitive against the obstacle index.

    Args:
        prim: Primitive to check
        index: Nearest-obstacle index
        config: Lattice configuration (d_min, d_max, weight, penalty, sample step)

    Returns:
        Optional[float]: Weighted cost, or None if the primitive is invalid
    """
    return score_distance_profile(index.distances(primitive_samples(prim, config)), config)


class LatticeGeometry:
    """
    Lattice anchored at a plan's start state.

    Node positions are grid corners in units of ``base_resolution``; the
    cell size at a location grows with its Chebyshev distance from the
    anchor in multiresolution mode. Velocities are integer multiples of
    ``a_step * tau`` relative to the start velocity. A node's state is a
    function of its key alone: its corner and its bin velocity.
    """

    def __init__(self, config: LatticeConfig, anchor: State6):
        self.config = config
        self.anchor_p = anchor.p.copy()
        self.anchor_v = anchor.v.copy()
        self.base = config.base_resolution
        self.resolutions = np.asarray(config.resolutions(), dtype=float)
        self.factors = np.rint(self.resolutions / self.base).astype(np.int64)
        extents = config.level_extent_cells * self.resolutions
        self.radii = np.cumsum(extents)
        self.radii[-1] = np.inf
        self.velocity_bin = config.velocity_bin

    def levels_of(self, positions) -> np.ndarray:
        pts = np.asarray(positions, dtype=float).reshape(-1, 3)
        cheb = np.abs(pts - self.anchor_p).max(axis=1)
        return np.searchsorted(self.radii, cheb - 1e-9, side="left")

    def resolution_at(self, position) -> float:
        return float(self.resolutions[self.levels_of(position)[0]])

    def keys(self, positions, velocities, steps=None) -> np.ndarray:
        """
        Integer node keys (corner xyz in base units, velocity bins xyz), shape (N, 6).

        ``steps`` are the displacements that led to ``positions``; a position
        halfway between corners snaps back toward where it came from.
        """
        pts = np.asarray(positions, dtype=float).reshape(-1, 3)
        vel = np.asarray(velocities, dtype=float).reshape(-1, 3)
        if steps is not None:
            steps = np.asarray(steps, dtype=float).reshape(-1, 3)
        factor = self.factors[self.levels_of(pts)][:, None]
        cells = snap_cells((pts - self.anchor_p) / (self.base * factor), steps) * factor
        vbins = np.rint((vel - self.anchor_v) / self.velocity_bin).astype(np.int64)
        return np.concatenate([cells, vbins], axis=1)

    def key(self, state: State6) -> NodeKey:
        return tuple(int(x) for x in self.keys(state.p, state.v)[0])

    def corner(self, key: NodeKey) -> np.ndarray:
        return self.anchor_p + np.asarray(key[:3], dtype=float) * self.base

    def velocity(self, key: NodeKey) -> np.ndarray:
        return self.anchor_v + np.asarray(key[3:], dtype=float) * self.velocity_bin

    def node_state(self, key: NodeKey) -> State6:
        return State6(self.corner(key), self.velocity(key))

    @property
    def max_gap(self) -> float:
        """Largest per-axis offset between a primitive end and its snapped corner."""
        return 0.5 * float(self.resolutions.max())

    def goal_tolerance(self, goal) -> float:
        """Goal position tolerance, widened to half a cell on coarse levels."""
        return max(self.config.position_tolerance, 0.5 * self.resolution_at(goal))


@dataclass(frozen=True, eq=False)
class Successor:
    """One expanded edge of the lattice graph."""

    key: NodeKey
    state: State6
    primitive: MotionPrimitive
    cost: float
    obstacle_cost: float


def snap_sample_count(max_gap: float, config: LatticeConfig) -> int:
    """Samples on the straight hop from a primitive's end to its snapped corner."""
    return max(1, int(math.ceil(math.sqrt(3.0) * max_gap / config.collision_sample_step - 1e-9)))


def successors(
    state: State6,
    geometry: LatticeGeometry,
    config: LatticeConfig,
    snapshot: MapSnapshot,
    controls: Optional[np.ndarray] = None,
) -> List[Successor]:
    """
    Unroll every control in the control set from ``state``.

    Each end snaps to its node's nearest grid corner (ties back toward
    ``state``) and bin velocity, so the successor state depends only on its
    key. Collision samples follow the primitive and then the straight hop
    to that corner. Candidates that land on the node they started from,
    exceed ``v_max_lattice`` (unless braking toward it), leave the map or
    collide are discarded. Edge cost is the primitive cost plus the
    obstacle cost.

    Args:
        state: Snapped state of the node being expanded
        geometry: Lattice anchored at the plan's start
        config: Lattice configuration
        snapshot: Frozen map view
        controls: Control set, computed from ``config`` when omitted

    Returns:
        List[Successor]: Surviving successors in control-set order
    """
    if controls is None:
        controls = control_set(config)
    tau = config.tau
    p, v = state.p, state.v
    v_end = v + tau * controls
    p_end = p + tau * v + 0.5 * tau * tau * controls

    speed_ok = np.all(
        (np.abs(v_end) <= config.v_max_lattice + 1e-9) | (np.abs(v_end) < np.abs(v)), axis=1
    )
    keys = geometry.keys(p_end, v_end, p_end - p)
    own = np.asarray(geometry.key(state))
    moved = np.any(keys != own, axis=1)
    keep = np.flatnonzero(speed_ok & moved)
    if keep.size == 0:
        return []

    sub = controls[keep]
    ends = p_end[keep]
    corners = geometry.anchor_p + keys[keep, :3].astype(float) * geometry.base
    bound = max(float(np.linalg.norm(v)), float(np.linalg.norm(v_end[keep], axis=1).max()))
    t = np.linspace(0.0, tau, sample_count(bound, config))
    along = p + t[None, :, None] * v + 0.5 * (t * t)[None, :, None] * sub[:, None, :]
    s = np.linspace(0.0, 1.0, snap_sample_count(geometry.max_gap, config) + 1)[1:]
    hop = ends[:, None, :] + s[None, :, None] * (corners - ends)[:, None, :]
    samples = np.concatenate([along, hop], axis=1)
    flat = samples.reshape(-1, 3)
    inside = snapshot.contains(flat).reshape(len(keep), -1).all(axis=1)
    dists = snapshot.index.distances(flat).reshape(len(keep), -1)
    obstacle = score_distance_profiles(dists, config)

    result = []
    for row, i in enumerate(keep):
        if not inside[row] or math.isnan(obstacle[row]):
            continue
        key = tuple(int(x) for x in keys[i])
        prim = MotionPrimitive(state, controls[i], tau)
        cost = primitive_cost(prim, config.rho) + float(obstacle[row])
        result.append(
            Successor(
                key=key,
                state=State6(corners[row], geometry.velocity(key)),
                primitive=prim,
                cost=cost,
                obstacle_cost=float(obstacle[row]),
            )
        )
    return result
