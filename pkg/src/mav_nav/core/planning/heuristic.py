"""
Heuristic Table Module

This module precomputes optimal one-dimensional lattice trajectories to a
resting goal and combines them into the planner's admissible cost-to-go
estimate: the slowest axis sets the time, and its control cost is added.

The one-dimensional lattice snaps exactly like the planner's uniform
lattice: positions are base-resolution corners, and every step moves by the
rounded primitive displacement. Velocities count bins from an offset, the
axis velocity of the plan's start state.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from mav_nav.core.dynamics import State6
from mav_nav.core.planning.lattice import acceleration_set, snap_cells
from mav_nav.io.schema import LatticeConfig

logger = logging.getLogger(__name__)

Entry = Tuple[float, float]


@dataclass(frozen=True, eq=False)
class Heuristic1DTable:
    """
    Optimal 1D (time, control cost) keyed by (distance bin, velocity bin).

    Distance bins count ``cell_size`` corners still to cover toward the
    goal; velocity bins count ``velocity_bin`` steps from
    ``velocity_offset``. ``v_max`` is the fastest progress the lattice
    allows and extends estimates beyond the table's range.
    """

    cell_size: float
    velocity_bin: float
    max_distance_bin: int
    max_velocity_bin: int
    rho: float
    v_max: float
    entries: Dict[Tuple[int, int], Entry] = field(repr=False)
    velocity_offset: float = 0.0

    def __contains__(self, key) -> bool:
        return tuple(key) in self.entries

    def lookup(self, d_bin: int, v_bin: int) -> Entry:
        """Exact entry for integer bins; KeyError when outside the table."""
        return self.entries[(int(d_bin), int(v_bin))]

    def rows(self) -> Iterator[Tuple[int, int, float, float]]:
        for (d_bin, v_bin) in sorted(self.entries):
            time, control = self.entries[(d_bin, v_bin)]
            yield d_bin, v_bin, time, control

    def axis_estimate(self, distance: float, velocity: float) -> Entry:
        """
        (time, control) estimate for continuous distance-to-go and velocity.

        Fractional bins take the cheapest of the surrounding entries. Beyond
        the table's distance range the boundary entry is extended at
        ``v_max`` for the remaining distance.
        """
        x = distance / self.cell_size
        y = (velocity - self.velocity_offset) / self.velocity_bin
        k_max = self.max_velocity_bin
        v_bins = {min(max(math.floor(y), -k_max), k_max), min(max(math.ceil(y), -k_max), k_max)}

        extra_time = 0.0
        if abs(x) > self.max_distance_bin:
            d_bins = {int(math.copysign(self.max_distance_bin, x))}
            excess = (abs(x) - self.max_distance_bin) * self.cell_size
            extra_time = excess / self.v_max
        else:
            d_bins = {math.floor(x), math.ceil(x)}

        best = None
        for d_bin in sorted(d_bins):
            for v_bin in sorted(v_bins):
                entry = self.entries.get((d_bin, v_bin))
                if entry is None:
                    continue
                time, control = entry[0] + extra_time, entry[1]
                score = self.rho * time + control
                if best is None or score < best[0]:
                    best = (score, time, control)
        if best is None:
            return extra_time, 0.0
        return best[1], best[2]


def velocity_bins(config: LatticeConfig, velocity_offset: float = 0.0) -> List[int]:
    """
    Velocity bins an axis can hold, counted from ``velocity_offset``.

    Bins above ``v_max_lattice`` are kept up to the offset's own speed, so a
    fast start can brake down into range.
    """
    delta = config.velocity_bin
    cap = max(config.v_max_lattice, abs(velocity_offset)) + 1e-9
    k_lo = int(math.ceil((-cap - velocity_offset) / delta))
    k_hi = int(math.floor((cap - velocity_offset) / delta))
    return list(range(k_lo, k_hi + 1))


def _speed_ok(config: LatticeConfig, v_from: float, v_to: float) -> bool:
    return abs(v_to) <= config.v_max_lattice + 1e-9 or abs(v_to) < abs(v_from)


def cell_shift(config: LatticeConfig, velocity: float, m: int) -> int:
    """Corners advanced by one primitive with ``m`` acceleration steps from ``velocity``."""
    tau = config.tau
    displacement = tau * velocity + 0.5 * tau * tau * m * config.a_step
    return int(snap_cells(displacement / config.base_resolution, displacement))


def _transitions(
    config: LatticeConfig, velocity_offset: float
) -> Tuple[List[int], Dict[Tuple[int, int], int]]:
    accels = acceleration_set(config)
    steps = sorted({int(round(a / config.a_step)) for a in accels})
    bins = velocity_bins(config, velocity_offset)
    valid = set(bins)
    delta = config.velocity_bin
    shifts: Dict[Tuple[int, int], int] = {}
    for k in bins:
        v_from = velocity_offset + k * delta
        for m in steps:
            if k + m not in valid:
                continue
            if not _speed_ok(config, v_from, velocity_offset + (k + m) * delta):
                continue
            shifts[(k, m)] = cell_shift(config, v_from, m)
    return bins, shifts


def max_progress_speed(config: LatticeConfig, velocity_offset: float = 0.0) -> float:
    """Fastest progress per unit time on the snapped 1D lattice, never below ``v_max_lattice``."""
    _, shifts = _transitions(config, float(velocity_offset))
    step_max = max((abs(s) for s in shifts.values()), default=0)
    return max(config.v_max_lattice, step_max * config.base_resolution / config.tau)


def build_heuristic_table(config: LatticeConfig, velocity_offset: float = 0.0) -> Heuristic1DTable:
    """
    Exhaustive backward Dijkstra over the obstacle-free, snapped 1D lattice.

    The terminal set uses the planner's goal tolerances and the transitions
    use the planner's corner snapping, so the combined estimate never
    exceeds the true uniform-lattice cost.

    Args:
        config: Lattice configuration
        velocity_offset: Axis velocity that velocity bins count from

    Returns:
        Heuristic1DTable: Optimal entries for every bin within range

    Raises:
        ConfigError: If the acceleration set is empty
    """
    offset = float(velocity_offset)
    bins, shifts = _transitions(config, offset)
    tau = config.tau
    res = config.base_resolution
    delta = config.velocity_bin
    a2 = config.a_step * config.a_step
    step_max = max((abs(s) for s in shifts.values()), default=0)
    d_max = int(math.ceil(config.heuristic_max_distance / res - 1e-9))
    d_limit = d_max + (len(bins) + 1) * step_max + 2
    pos_tol = config.position_tolerance + 1e-12
    speed_tol = config.speed_tolerance + 1e-12

    predecessors: Dict[int, List[Tuple[int, int, int]]] = {k: [] for k in bins}
    for (k0, m), shift in shifts.items():
        predecessors[k0 + m].append((k0, m, shift))

    # label: (cost, steps, sum of m^2)
    best: Dict[Tuple[int, int], Tuple[float, int, int]] = {}
    heap = []
    for k in bins:
        if abs(offset + k * delta) > speed_tol:
            continue
        for d in range(-d_limit, d_limit + 1):
            if abs(d) * res <= pos_tol:
                best[(d, k)] = (0.0, 0, 0)
                heap.append((0.0, 0, d, k))
    heapq.heapify(heap)

    while heap:
        cost, n, d, k = heapq.heappop(heap)
        label = best[(d, k)]
        if (cost, n) > (label[0], label[1]):
            continue
        effort = label[2]
        # predecessor (d0, k0) applies m: k = k0 + m, d = d0 - shift
        for k0, m, shift in predecessors[k]:
            d0 = d + shift
            if abs(d0) > d_limit:
                continue
            n0 = n + 1
            s0 = effort + m * m
            c0 = n0 * config.rho * tau + s0 * a2 * tau
            old = best.get((d0, k0))
            if old is None or (c0, n0) < (old[0], old[1]):
                best[(d0, k0)] = (c0, n0, s0)
                heapq.heappush(heap, (c0, n0, d0, k0))

    entries: Dict[Tuple[int, int], Entry] = {}
    for d in range(-d_max, d_max + 1):
        for k in bins:
            label = best.get((d, k))
            if label is None:
                continue
            entries[(d, k)] = (label[1] * tau, label[2] * a2 * tau)

    logger.info(
        f"Built 1D heuristic table: {len(entries)} entries, "
        f"|d| <= {d_max} x {res:.4f} m, bins {bins[0]}..{bins[-1]} x {delta:.4f} m/s "
        f"from {offset:+.4f} m/s"
    )
    return Heuristic1DTable(
        cell_size=res,
        velocity_bin=delta,
        max_distance_bin=d_max,
        max_velocity_bin=max(abs(bins[0]), abs(bins[-1])),
        rho=config.rho,
        v_max=max(config.v_max_lattice, step_max * res / tau),
        entries=entries,
        velocity_offset=offset,
    )


@lru_cache(maxsize=16)
def cached_heuristic_table(config: LatticeConfig, velocity_offset: float = 0.0) -> Heuristic1DTable:
    return build_heuristic_table(config, velocity_offset)


def axis_tables(
    config: LatticeConfig, velocity, table: Optional[Heuristic1DTable] = None
) -> Tuple[Heuristic1DTable, ...]:
    """
    One table per axis, each counting velocity bins from that axis's velocity.

    ``table`` is reused for every axis whose velocity matches its offset.
    """
    tables = []
    for offset in np.asarray(velocity, dtype=float).reshape(3).tolist():
        if table is not None and table.velocity_offset == offset:
            tables.append(table)
        else:
            tables.append(cached_heuristic_table(config, offset))
    return tuple(tables)


def heuristic_estimate(
    s: State6,
    goal,
    table: Union[Heuristic1DTable, Sequence[Heuristic1DTable]],
    rho: float,
    slack: float = 0.0,
) -> float:
    """
    Combine per-axis 1D optima: ``rho * T + control`` of the slowest axis.

    When several axes share the largest time the larger control cost is
    used. ``slack`` shrinks each axis distance, covering goal regions wider
    than the table's terminal set.

    Args:
        s: Current state
        goal: Goal position
        table: One 1D table for all axes, or one per axis
        rho: Time weight
        slack: Extra goal tolerance (m) to discount

    Returns:
        float: Cost-to-go estimate
    """
    tables = (table,) * 3 if isinstance(table, Heuristic1DTable) else tuple(table)
    remaining = np.asarray(goal, dtype=float) - s.p
    best_time = -1.0
    best_control = 0.0
    for axis in range(3):
        d = float(remaining[axis])
        if slack > 0.0:
            d = math.copysign(max(0.0, abs(d) - slack), d)
        time, control = tables[axis].axis_estimate(d, float(s.v[axis]))
        if time > best_time:
            best_time, best_control = time, control
        elif time == best_time and control > best_control:
            best_control = control
    return rho * max(best_time, 0.0) + best_control
