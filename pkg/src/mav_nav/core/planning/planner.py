"""
Lattice Planner Module

This module handles A* search over the motion-primitive lattice and
committed-prefix replanning. Plans are pure functions of the request and
its frozen map snapshot.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass
from typing import Dict, Optional, Set, Tuple

import numpy as np

from mav_nav.core.dynamics import MotionPrimitive, PiecewiseTrajectory, State6
from mav_nav.core.errors import NoPathError, PlanInputError, ReplanFailedError
from mav_nav.core.mapping.obstacle_index import MapSnapshot
from mav_nav.core.planning.heuristic import Heuristic1DTable, axis_tables, heuristic_estimate
from mav_nav.core.planning.lattice import LatticeGeometry, NodeKey, control_set, successors
from mav_nav.io.schema import LatticeConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PlanRequest:
    """Start state, goal position, map snapshot and lattice configuration."""

    start: State6
    goal: np.ndarray
    snapshot: MapSnapshot
    config: LatticeConfig
    start_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=float).reshape(3))


@dataclass(frozen=True, eq=False)
class PlanResult:
    trajectory: PiecewiseTrajectory
    expanded: int
    wall_time: float
    cost: float
    obstacle_cost: float = 0.0


@dataclass(eq=False)
class _Node:
    key: NodeKey
    state: State6
    g: float
    obstacle: float
    parent: Optional["_Node"] = None
    primitive: Optional[MotionPrimitive] = None


def _reached(state: State6, goal: np.ndarray, pos_tol: float, speed_tol: float) -> bool:
    return bool(
        np.max(np.abs(state.p - goal)) <= pos_tol + 1e-12
        and np.linalg.norm(state.v) <= speed_tol + 1e-12
    )


def _trajectory_of(
    node: _Node, start: State6, start_time: float, geometry: LatticeGeometry
) -> PiecewiseTrajectory:
    goal_corner = node.state.p
    prims = []
    while node.parent is not None:
        prims.append(node.primitive)
        node = node.parent
    prims.reverse()
    if len(prims) > 1:
        # end on the goal node's corner; the first primitive must keep the exact start
        last = prims[-1]
        shifted = State6(last.s0.p + (goal_corner - last.end_state.p), last.s0.v)
        prims[-1] = MotionPrimitive(shifted, last.u, last.tau)
    return PiecewiseTrajectory(
        start_time, tuple(prims), origin=start, max_gap=2.0 * geometry.max_gap
    )


def plan(request: PlanRequest, table: Optional[Heuristic1DTable] = None) -> PlanResult:
    """
    Find the minimum-cost lattice trajectory from the start to the goal.

    Nodes are (grid corner, velocity bin) pairs and each carries its
    snapped state, so an edge depends only on its source node and control,
    and the search graph is the same with or without the heuristic.
    Primitives run from snapped states, so the returned trajectory jumps by
    up to a cell at junctions while its velocity stays continuous. The last
    primitive is moved onto the goal node's corner unless it is also the
    first. Ties on f are broken by lower h, then by insertion order.

    Args:
        request: Plan request
        table: 1D heuristic table, used for axes whose start velocity matches its
            offset; the others are built (and cached) from the config

    Returns:
        PlanResult: Trajectory starting exactly at the requested start state

    Raises:
        PlanInputError: If the start or goal lies outside the map
        NoPathError: If the open set is exhausted or the expansion cap is hit
    """
    config = request.config
    snapshot = request.snapshot
    start = request.start
    goal = request.goal
    started_at = time.perf_counter()

    if not snapshot.contains_point(start.p):
        raise PlanInputError(f"start {start.p.tolist()} lies outside the map")
    if not snapshot.contains_point(goal):
        raise PlanInputError(f"goal {goal.tolist()} lies outside the map")

    geometry = LatticeGeometry(config, start)
    pos_tol = geometry.goal_tolerance(goal)
    speed_tol = config.speed_tolerance

    if _reached(start, goal, pos_tol, speed_tol):
        logger.info("Start already satisfies the goal; returning an empty trajectory")
        return PlanResult(
            trajectory=PiecewiseTrajectory(request.start_time, (), origin=start),
            expanded=0,
            wall_time=time.perf_counter() - started_at,
            cost=0.0,
        )

    goal_clearance, _ = snapshot.index.nearest(goal)
    if goal_clearance < config.d_min:
        raise NoPathError(
            f"goal {goal.tolist()} is {goal_clearance:.3f} m from an obstacle "
            f"(d_min={config.d_min})",
            expanded=0,
        )

    slack = max(0.0, pos_tol - config.position_tolerance)
    if config.use_heuristic:
        tables = axis_tables(config, start.v, table)

        def h_of(state: State6) -> float:
            return heuristic_estimate(state, goal, tables, config.rho, slack)

    else:

        def h_of(state: State6) -> float:
            return 0.0

    controls = control_set(config)
    counter = itertools.count()
    root = _Node(key=geometry.key(start), state=start, g=0.0, obstacle=0.0)
    nodes: Dict[NodeKey, _Node] = {root.key: root}
    closed: Set[NodeKey] = set()
    h0 = h_of(start)
    open_heap = [(h0, h0, next(counter), root.key, 0.0)]
    expanded = 0

    while open_heap:
        _, _, _, key, g_push = heapq.heappop(open_heap)
        node = nodes[key]
        if key in closed or g_push > node.g:
            continue
        if _reached(node.state, goal, pos_tol, speed_tol):
            trajectory = _trajectory_of(node, start, request.start_time, geometry)
            wall_time = time.perf_counter() - started_at
            logger.info(
                f"Plan found: {len(trajectory)} primitives, {trajectory.duration:.2f} s, "
                f"cost {node.g:.3f}, {expanded} expansions in {wall_time * 1000:.1f} ms"
            )
            return PlanResult(
                trajectory=trajectory,
                expanded=expanded,
                wall_time=wall_time,
                cost=node.g,
                obstacle_cost=node.obstacle,
            )

        closed.add(key)
        expanded += 1
        if expanded > config.max_expansions:
            raise NoPathError(
                f"expansion cap {config.max_expansions} reached without reaching the goal",
                expanded=expanded,
            )

        for succ in successors(node.state, geometry, config, snapshot, controls):
            g = node.g + succ.cost
            known = nodes.get(succ.key)
            if known is not None and g >= known.g:
                continue
            child = _Node(
                key=succ.key,
                state=succ.state,
                g=g,
                obstacle=node.obstacle + succ.obstacle_cost,
                parent=node,
                primitive=succ.primitive,
            )
            nodes[succ.key] = child
            closed.discard(succ.key)
            h = h_of(succ.state)
            heapq.heappush(open_heap, (g + h, h, next(counter), succ.key, g))

    logger.warning(f"Open set exhausted after {expanded} expansions")
    raise NoPathError("open set exhausted without reaching the goal", expanded=expanded)


def replan_with_result(
    current: PiecewiseTrajectory,
    waypoint_time: float,
    t_plan: float,
    snapshot: MapSnapshot,
    goal,
    config: LatticeConfig,
    table: Optional[Heuristic1DTable] = None,
) -> Tuple[PiecewiseTrajectory, PlanResult]:
    """
    Keep the committed prefix of ``current`` and plan a fresh suffix.

    The split time ``waypoint_time + t_plan`` is clamped to the trajectory
    span, so a split past the end replans from the final state.

    Args:
        current: Trajectory being tracked
        waypoint_time: Trajectory time of the current waypoint
        t_plan: Lead time of the split point
        snapshot: New map snapshot
        goal: Goal position
        config: Lattice configuration
        table: Optional 1D heuristic table

    Returns:
        Tuple of the spliced trajectory and the fresh plan's result

    Raises:
        ReplanFailedError: If the fresh plan fails; ``kept`` carries ``current``
    """
    t_split = min(max(waypoint_time + t_plan, current.start_time), current.end_time)
    prefix = current.split_at(t_split)
    s_replan = prefix.final_state
    request = PlanRequest(
        start=s_replan, goal=goal, snapshot=snapshot, config=config, start_time=prefix.end_time
    )
    try:
        fresh = plan(request, table)
    except (NoPathError, PlanInputError) as e:
        logger.warning(f"Replan from t={t_split:.2f} failed: {e}")
        raise ReplanFailedError(
            f"replan from t={t_split:.2f} failed: {e}",
            kept=current,
            expanded=getattr(e, "expanded", 0),
        ) from e
    return prefix.concatenate(fresh.trajectory), fresh


def replan(
    current: PiecewiseTrajectory,
    waypoint_time: float,
    t_plan: float,
    snapshot: MapSnapshot,
    goal,
    config: LatticeConfig,
    table: Optional[Heuristic1DTable] = None,
) -> PiecewiseTrajectory:
    """Spliced trajectory of :func:`replan_with_result`."""
    trajectory, _ = replan_with_result(
        current, waypoint_time, t_plan, snapshot, goal, config, table
    )
    return trajectory
