"""
Mission Simulator

This module runs the closed navigation loop on a fixed 50 Hz schedule:
IMU prediction, LiDAR scans folded into the voxel map, position updates,
waypoint publishing, 1 Hz replanning, model-predictive control and the
plant step. Everything is single-threaded and seeded, so a scenario and
seed always produce the same mission log.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from mav_nav.core.control.mpc import CONTROL_DT, AttitudeCommand, mpc_step
from mav_nav.core.dynamics import FullState9, PiecewiseTrajectory, Pose, State6
from mav_nav.core.errors import NoPathError, PlanInputError, ReplanFailedError
from mav_nav.core.estimation.state_filter import StateFilter
from mav_nav.core.mapping.obstacle_index import MapSnapshot
from mav_nav.core.mapping.voxel_grid import RecordedScan, VoxelGrid
from mav_nav.core.planning.planner import PlanRequest, plan, replan_with_result
from mav_nav.core.tracking import (
    TrackerMode,
    TrackerStatus,
    point_to_polyline,
    retarget,
    start_tracking,
    tracker_update,
)
from mav_nav.core.utils.logging import MissionMetrics
from mav_nav.core.utils.run_summary import RunSummaryWriter
from mav_nav.io.schema import Goal, MissionMode, Scenario
from mav_nav.io.writers.csv import write_map_export, write_mission_log, write_scan_log
from mav_nav.io.writers.report import write_report
from mav_nav.pipeline.plant import (
    MavModel,
    drift_direction,
    imu_sample,
    mav_step,
    measure_position,
)
from mav_nav.pipeline.world import World, cast_scan

logger = logging.getLogger(__name__)

CLEARANCE_SAMPLE_DT = 0.05

DEFAULT_OUTPUTS = {
    "mission_log": "mission_log.csv",
    "map_export": "map.csv",
    "report": "report.txt",
    "scans": "scans.csv",
}


class Phase(str, Enum):
    PLANNING = "planning"
    TRACKING = "tracking"
    APPROACH = "approach"
    HOLD = "hold"
    RECOVERING = "recovering"
    DONE = "done"
    FAILED = "failed"


@dataclass
class Scheduler:
    """Fixed-step clock: control every tick, scans and waypoints every 5th, replans every 50th."""

    dt: float = CONTROL_DT
    scan_every: int = 5
    waypoint_every: int = 5
    replan_every: int = 50
    tick: int = 0
    counts: Dict[str, int] = field(
        default_factory=lambda: {"control": 0, "scan": 0, "waypoint": 0, "replan": 0}
    )

    @property
    def clock(self) -> float:
        return self.tick * self.dt

    def events(self, tick: Optional[int] = None) -> List[str]:
        """Schedule events due at ``tick`` (the current tick by default), in execution order."""
        k = self.tick if tick is None else tick
        due = ["control"]
        if k % self.scan_every == 0:
            due.append("scan")
        if k > 0 and k % self.replan_every == 0:
            due.append("replan")
        if k % self.waypoint_every == 0:
            due.append("waypoint")
        return due

    def advance(self) -> List[str]:
        """Count the current tick's events, then step the clock."""
        due = self.events()
        for name in due:
            self.counts[name] += 1
        self.tick += 1
        return due


@dataclass
class GoalRecord:
    """Per-goal outcome."""

    position: np.ndarray
    started_at: float
    approach_direction: np.ndarray
    reached_at: Optional[float] = None
    reach_position: Optional[np.ndarray] = None
    overshoot: float = 0.0
    hold_drift: float = 0.0
    final_error: float = float("nan")

    def observe(self, true_position: np.ndarray, holding: bool) -> None:
        offset = true_position - self.position
        self.overshoot = max(self.overshoot, float(offset @ self.approach_direction))
        if holding and self.reach_position is not None:
            drift = float(np.linalg.norm(true_position - self.reach_position))
            self.hold_drift = max(self.hold_drift, drift)


@dataclass
class MissionReport:
    """Outcome of one simulated mission."""

    scenario: str
    seed: int
    success: bool
    reason: str
    duration: float
    goals_total: int
    goals: List[GoalRecord]
    distance_flown: float
    max_tracking_error: float
    mean_tracking_error: float
    min_clearance_map: float
    min_clearance_world: float
    prefix_preserved: bool
    metrics: Dict[str, Any]

    @property
    def goals_reached(self) -> int:
        return sum(1 for g in self.goals if g.reached_at is not None)

    def as_items(self, include_latency: bool = True) -> Dict[str, Any]:
        """Ordered report fields; wall-clock latencies only when ``include_latency``."""
        items: Dict[str, Any] = {
            "scenario": self.scenario,
            "seed": self.seed,
            "success": self.success,
            "reason": self.reason,
            "duration": float(self.duration),
            "goals_total": self.goals_total,
            "goals_reached": self.goals_reached,
            "distance_flown": float(self.distance_flown),
            "max_tracking_error": float(self.max_tracking_error),
            "mean_tracking_error": float(self.mean_tracking_error),
            "min_clearance_map": float(self.min_clearance_map),
            "min_clearance_world": float(self.min_clearance_world),
            "prefix_preserved": self.prefix_preserved,
        }
        for name in MissionMetrics.COUNTERS:
            items[name] = int(self.metrics.get(name, 0))
        if include_latency:
            items["plan_latency_max"] = float(self.metrics.get("plan_latency_max", 0.0))
            items["plan_latency_mean"] = float(self.metrics.get("plan_latency_mean", 0.0))
        for i, goal in enumerate(self.goals):
            items[f"goal_{i}_reached_at"] = goal.reached_at
            items[f"goal_{i}_final_error"] = float(goal.final_error)
            items[f"goal_{i}_overshoot"] = float(max(goal.overshoot, 0.0))
            items[f"goal_{i}_hold_drift"] = float(goal.hold_drift)
        return items


def trajectory_clearance(
    traj: PiecewiseTrajectory,
    snapshot: MapSnapshot,
    t_from: Optional[float] = None,
    dt: float = CLEARANCE_SAMPLE_DT,
) -> float:
    """Smallest obstacle distance along ``traj`` from ``t_from`` on, sampled every ``dt``."""
    times = traj.sample_times(dt)
    if t_from is not None:
        times = times[times >= t_from - 1e-9]
    if len(times) == 0:
        return float("inf")
    dists = snapshot.index.distances(traj.positions(times))
    return float(dists.min()) if len(dists) else float("inf")


def build_grid(scenario: Scenario) -> VoxelGrid:
    """Empty voxel map covering the world bounds."""
    bounds = scenario.world.bounds
    return VoxelGrid.from_bounds(
        bounds.min,
        bounds.max,
        resolution=scenario.map.resolution,
        scan_window=scenario.map.scan_window,
        occupied_on_tie=scenario.map.occupied_on_tie,
    )


def mission_rngs(seed: int) -> Tuple[np.random.Generator, ...]:
    """Independent sensor, pose, disturbance and drift streams for ``seed``."""
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4))


def initial_snapshot(scenario: Scenario) -> Tuple[VoxelGrid, MapSnapshot]:
    """
    Map built from a single scan at the start pose, as available before takeoff.

    Uses the same sensor stream and scan index as the first tick of a mission.
    """
    world = World.from_config(scenario.world)
    grid = build_grid(scenario)
    sensor_rng = mission_rngs(scenario.seed)[0]
    pose = Pose(position=scenario.mav.start)
    points = cast_scan(pose, world, scenario.sensor, 0.0, sensor_rng)
    grid.integrate_scan(pose, points, 0)
    return grid, grid.snapshot(0.0)


def map_from_scans(scenario: Scenario, scans: Sequence[RecordedScan]) -> VoxelGrid:
    """
    Rebuild the occupancy map by replaying recorded scans.

    Scans go through the same integration and aging as during a mission, so
    replaying a mission's own recording reproduces its final map.

    Raises:
        ScanOrderError: If scan indices do not increase
    """
    grid = build_grid(scenario)
    for scan in scans:
        grid.integrate_scan(scan.pose, scan.points, scan.scan_index)
        grid.expire_old_scans(scan.scan_index)
    logger.info(f"Replayed {len(scans)} scans into the '{scenario.name}' map")
    return grid


def prefix_identical(old: PiecewiseTrajectory, new: PiecewiseTrajectory, t_split: float) -> bool:
    """Whether ``new`` reproduces ``old`` bit for bit at sampled times up to ``t_split``."""
    times = old.sample_times(CLEARANCE_SAMPLE_DT)
    times = np.append(times[times < t_split], t_split)
    return all(old.state_at(float(t)) == new.state_at(float(t)) for t in times)


class MissionSimulator:
    """Deterministic closed-loop mission for one scenario."""

    def __init__(
        self,
        scenario: Scenario,
        out_dir: Optional[str] = None,
        metrics: Optional[MissionMetrics] = None,
        progress: bool = False,
        outputs: Optional[Dict[str, str]] = None,
        record_scans: bool = False,
    ):
        """
        Initialize the simulator.

        Args:
            scenario: Validated scenario
            out_dir: Directory for mission outputs; nothing is written when omitted
            metrics: Shared metrics collector (a fresh one when omitted)
            progress: Show a tqdm progress bar over simulated ticks
            outputs: File names for the mission log, map export, report and scan log
            record_scans: Keep every scan and write the scan log with the other outputs
        """
        self.scenario = scenario
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.metrics = metrics if metrics is not None else MissionMetrics()
        self.progress = progress
        self.outputs = {**DEFAULT_OUTPUTS, **(outputs or {})}
        self.record_scans = record_scans

        self.world = World.from_config(scenario.world)
        self.grid = build_grid(scenario)
        self.snapshot = self.grid.snapshot(0.0)
        self.plant = MavModel.from_config(scenario.mav)
        self.filter = StateFilter(scenario.filter, scenario.mav.start)
        self.scheduler = Scheduler()

        self.sensor_rng, self.pose_rng, self.disturbance_rng, drift_rng = mission_rngs(
            scenario.seed
        )
        self.drift_direction = drift_direction(drift_rng)

        self.summary = RunSummaryWriter(
            run_id=f"{scenario.name}-{scenario.seed}",
            out_dir=str(self.out_dir) if self.out_dir is not None else None,
        )
        self.rows: List[Dict[str, Any]] = []
        self.tracking_errors: List[float] = []
        self.scan_index = 0
        self.recorded_scans: List[RecordedScan] = []

        self.phase = Phase.PLANNING
        self.goal_index = 0
        self.goal_records: List[GoalRecord] = []
        self.trajectory: Optional[PiecewiseTrajectory] = None
        self.status: Optional[TrackerStatus] = None
        self.waypoint = np.asarray(scenario.mav.start, dtype=float).copy()
        self.hold_started: Optional[float] = None
        self.recovery_started: Optional[float] = None
        self.predicted_accel = np.zeros(3)
        self.command = AttitudeCommand(0.0, 0.0, 0.0)
        self.failure_reason = ""
        self.prefix_preserved = True

    @property
    def goal(self) -> Goal:
        return self.scenario.goals[self.goal_index]

    @property
    def planned(self) -> bool:
        return self.scenario.mission.mode == MissionMode.PLANNED

    # Sensing

    def _scan(self, clock: float) -> None:
        true_pose = self.plant.pose
        points = cast_scan(true_pose, self.world, self.scenario.sensor, clock, self.sensor_rng)
        measured = measure_position(
            self.plant.position,
            clock,
            self.scenario.sensor.pose_noise,
            self.scenario.sensor.drift_rate,
            self.drift_direction,
            self.pose_rng,
        )
        sensor_pose = Pose(position=measured, quaternion=true_pose.quaternion)
        self.grid.integrate_scan(sensor_pose, points, self.scan_index)
        if self.record_scans:
            self.recorded_scans.append(RecordedScan(self.scan_index, clock, sensor_pose, points))
        self.grid.expire_old_scans(self.scan_index)
        self.snapshot = self.grid.snapshot(clock)
        self.filter.update(measured, clock)
        self.metrics.increment("scans")
        self.scan_index += 1

    # Planning

    def _start_goal(self, clock: float) -> None:
        target = np.asarray(self.goal.position, dtype=float)
        direction = target - self.plant.position
        norm = float(np.linalg.norm(direction))
        unit = direction / norm if norm > 1e-9 else np.zeros(3)
        self.goal_records.append(
            GoalRecord(position=target, started_at=clock, approach_direction=unit)
        )
        logger.info(f"t={clock:.2f}: heading for goal {self.goal_index} at {target.tolist()}")
        if self.planned:
            self.phase = Phase.PLANNING
            self._plan(clock)
        else:
            self.phase = Phase.APPROACH
            self.waypoint = target.copy()

    def _planning_start(self) -> State6:
        cap = self.scenario.planner.v_max_lattice
        return State6(self.filter.position.copy(), np.clip(self.filter.velocity, -cap, cap))

    def _plan(self, clock: float) -> None:
        request = PlanRequest(
            start=self._planning_start(),
            goal=self.goal.position,
            snapshot=self.snapshot,
            config=self.scenario.planner,
            start_time=clock,
        )
        try:
            result = plan(request)
        except (NoPathError, PlanInputError) as e:
            expanded = getattr(e, "expanded", 0)
            self.metrics.log_plan_failure(expanded)
            self.summary.append_event(
                {
                    "event": "plan_failed",
                    "goal": self.goal_index,
                    "expanded": expanded,
                    "reason": str(e),
                },
                clock=clock,
            )
            logger.warning(f"t={clock:.2f}: planning to goal {self.goal_index} failed: {e}")
            self._enter_recovery(clock)
            return

        self.metrics.log_plan(result.expanded, result.wall_time)
        self.summary.append_event(
            {
                "event": "plan",
                "goal": self.goal_index,
                "expanded": result.expanded,
                "cost": result.cost,
                "segments": len(result.trajectory),
                "clearance": trajectory_clearance(result.trajectory, self.snapshot),
            },
            clock=clock,
        )
        self.recovery_started = None
        self.trajectory = result.trajectory
        if result.trajectory.is_empty:
            self.status = None
            self.phase = Phase.APPROACH
            self.waypoint = np.asarray(self.goal.position, dtype=float).copy()
            return
        self.status = start_tracking(result.trajectory, self.scenario.tracker)
        self.phase = Phase.TRACKING

    def _enter_recovery(self, clock: float) -> None:
        if self.recovery_started is None:
            self.recovery_started = clock
            self.waypoint = self.filter.position.copy()
        self.status = None
        self.trajectory = None
        if clock - self.recovery_started >= self.scenario.mission.recovery_budget:
            self._fail(clock, "recovery budget exhausted without a plan")
            return
        self.phase = Phase.RECOVERING

    def _replan(self, clock: float) -> None:
        if self.trajectory is None or self.status is None or self.trajectory.is_empty:
            return
        t_plan = self.scenario.mission.t_plan
        t_split = min(
            max(self.status.waypoint_time + t_plan, self.trajectory.start_time),
            self.trajectory.end_time,
        )
        try:
            spliced, result = replan_with_result(
                self.trajectory,
                self.status.waypoint_time,
                t_plan,
                self.snapshot,
                self.goal.position,
                self.scenario.planner,
            )
        except ReplanFailedError as e:
            self.metrics.log_replan_failure(e.expanded)
            self.summary.append_event(
                {
                    "event": "replan_failed",
                    "goal": self.goal_index,
                    "expanded": e.expanded,
                    "t_split": t_split,
                },
                clock=clock,
            )
            return

        preserved = prefix_identical(self.trajectory, spliced, t_split)
        self.prefix_preserved = self.prefix_preserved and preserved
        self.metrics.log_plan(result.expanded, result.wall_time, replan=True)
        self.summary.append_event(
            {
                "event": "replan",
                "goal": self.goal_index,
                "expanded": result.expanded,
                "cost": result.cost,
                "t_split": t_split,
                "prefix_identical": preserved,
                "clearance": trajectory_clearance(spliced, self.snapshot, t_from=t_split),
            },
            clock=clock,
        )
        self.trajectory = spliced
        self.status = retarget(self.status, spliced, self.scenario.tracker)

    # Mission logic

    def _waypoint_tick(self, clock: float) -> None:
        if self.phase != Phase.TRACKING or self.status is None:
            return
        self.status, waypoint = tracker_update(
            self.status, self.filter.position, self.scenario.tracker, clock
        )
        if waypoint is None:
            self.metrics.increment("aborts")
            self.summary.append_event(
                {"event": "abort", "goal": self.goal_index, "index": self.status.index},
                clock=clock,
            )
            self._plan(clock)
            return
        self.metrics.increment("waypoints")
        self.waypoint = waypoint
        if self.status.is_last and self.status.mode == TrackerMode.TRACKING:
            self.phase = Phase.APPROACH
            self.waypoint = np.asarray(self.goal.position, dtype=float).copy()

    def _check_goal(self, clock: float) -> None:
        record = self.goal_records[-1]
        if self.phase == Phase.APPROACH:
            error = float(np.linalg.norm(self.filter.position - self.goal.position))
            speed = float(np.linalg.norm(self.filter.velocity))
            if error <= self.goal.tolerance and speed <= self.goal.speed_tolerance:
                record.reached_at = clock
                record.reach_position = self.plant.position.copy()
                self.metrics.increment("goals_reached")
                self.summary.append_event(
                    {"event": "goal_reached", "goal": self.goal_index, "error": error},
                    clock=clock,
                )
                logger.info(f"t={clock:.2f}: reached goal {self.goal_index}")
                self.phase = Phase.HOLD
                self.hold_started = clock
        if self.phase == Phase.HOLD and clock - self.hold_started >= self.goal.hold - 1e-9:
            record.final_error = float(np.linalg.norm(self.plant.position - record.position))
            if self.goal_index + 1 < len(self.scenario.goals):
                self.goal_index += 1
                self._start_goal(clock)
            else:
                self.phase = Phase.DONE

    def _fail(self, clock: float, reason: str) -> None:
        self.phase = Phase.FAILED
        self.failure_reason = reason
        logger.error(f"t={clock:.2f}: mission failed: {reason}")

    def _mode_label(self) -> str:
        if self.phase == Phase.TRACKING and self.status is not None:
            return self.status.mode.value
        return self.phase.value

    def _log_row(self, clock: float, tracking_err: float) -> None:
        true = self.plant.state
        est_p, est_v = self.filter.position, self.filter.velocity
        clearance, _ = self.snapshot.index.nearest(true.p)
        row = {"clock": clock}
        for name, values in (
            ("true_p", true.p),
            ("true_v", true.v),
            ("est_p", est_p),
            ("est_v", est_v),
        ):
            for axis, value in zip("xyz", values):
                row[f"{name}{axis}"] = float(value)
        for axis, value in zip("xyz", self.waypoint):
            row[f"wp_{axis}"] = float(value)
        row["theta"] = self.command.theta
        row["phi"] = self.command.phi
        row["climb"] = self.command.climb
        row["tracking_err"] = tracking_err
        row["min_clearance"] = clearance
        row["mode"] = self._mode_label()
        self.rows.append(row)

    def _tracking_error(self) -> float:
        if not self.planned or self.status is None:
            return 0.0
        return point_to_polyline(self.plant.position, self.status.polyline)

    # Main loop

    def run(self) -> MissionReport:
        """
        Fly the scenario until every goal is held, the mission fails or time runs out.

        Returns:
            MissionReport: Mission outcome
        """
        scenario = self.scenario
        dt = self.scheduler.dt
        limits = scenario.mav.limits
        max_ticks = int(round(scenario.mission.max_duration / dt))
        logger.info(
            f"Starting mission '{scenario.name}' (seed {scenario.seed}, "
            f"{len(scenario.goals)} goal(s), mode {scenario.mission.mode.value})"
        )

        distance = 0.0
        min_world = float("inf")
        min_map = float("inf")
        clock = 0.0
        bar = tqdm(total=max_ticks, desc=scenario.name, unit="tick", disable=not self.progress)
        try:
            while True:
                clock = self.scheduler.clock
                due = self.scheduler.events()

                if self.scheduler.tick > 0:
                    self.filter.predict(imu_sample(self.plant, clock))
                if "scan" in due:
                    self._scan(clock)
                if self.scheduler.tick == 0:
                    self._start_goal(clock)
                if "replan" in due:
                    if self.phase == Phase.TRACKING:
                        self._replan(clock)
                    elif self.phase == Phase.RECOVERING:
                        self._plan(clock)
                if "waypoint" in due:
                    self._waypoint_tick(clock)
                if self.phase in (Phase.APPROACH, Phase.HOLD):
                    self._check_goal(clock)
                if self.phase == Phase.HOLD:
                    self.goal_records[-1].observe(self.plant.position, holding=True)
                elif self.goal_records:
                    self.goal_records[-1].observe(self.plant.position, holding=False)

                state = FullState9(self.filter.position, self.filter.velocity, self.predicted_accel)
                self.command, predicted = mpc_step(state, self.waypoint, limits, dt)
                self.predicted_accel = predicted.a
                self.metrics.increment("control_ticks")

                tracking_err = self._tracking_error()
                self.tracking_errors.append(tracking_err)
                self._log_row(clock, tracking_err)
                min_map = min(min_map, self.rows[-1]["min_clearance"])
                min_world = min(min_world, self.world.clearance(self.plant.position, clock))

                if self.phase in (Phase.DONE, Phase.FAILED):
                    break
                if self.scheduler.tick >= max_ticks:
                    self._fail(clock, f"timed out after {scenario.mission.max_duration:.1f} s")
                    break

                previous = self.plant.position
                self.plant = mav_step(self.plant, self.command, dt, self.disturbance_rng)
                distance += float(np.linalg.norm(self.plant.position - previous))
                self.scheduler.advance()
                bar.update(1)
        finally:
            bar.close()

        success = self.phase == Phase.DONE
        metrics = self.metrics.get_current_metrics()
        errors = np.asarray(self.tracking_errors) if self.tracking_errors else np.zeros(1)
        report = MissionReport(
            scenario=scenario.name,
            seed=scenario.seed,
            success=success,
            reason="completed" if success else self.failure_reason,
            duration=clock,
            goals_total=len(scenario.goals),
            goals=self.goal_records,
            distance_flown=distance,
            max_tracking_error=float(errors.max()),
            mean_tracking_error=float(errors.mean()),
            min_clearance_map=min_map,
            min_clearance_world=min_world,
            prefix_preserved=self.prefix_preserved,
            metrics=metrics,
        )
        self.summary.append_event(
            {"event": "mission_end", "success": success, "reason": report.reason},
            clock=clock,
        )
        logger.info(
            f"Mission '{scenario.name}' {'succeeded' if success else 'failed'} at t={clock:.2f}s "
            f"({report.goals_reached}/{report.goals_total} goals, "
            f"{metrics['replans']} replans, {metrics['aborts']} aborts)"
        )
        self._write_outputs(report, clock)
        return report

    def _write_outputs(self, report: MissionReport, clock: float) -> None:
        if self.out_dir is None:
            self.summary.write_final_summary(report.as_items(include_latency=False), clock)
            return
        names = self.outputs
        write_mission_log(self.rows, str(self.out_dir / names["mission_log"]))
        write_map_export(self.grid.export_lines(), str(self.out_dir / names["map_export"]))
        write_report(report.as_items(include_latency=True), str(self.out_dir / names["report"]))
        if self.record_scans:
            write_scan_log(self.recorded_scans, str(self.out_dir / names["scans"]))
        self.summary.write_final_summary(report.as_items(include_latency=False), clock)


def run_mission(
    scenario: Scenario,
    out_dir: Optional[str] = None,
    metrics: Optional[MissionMetrics] = None,
    progress: bool = False,
    outputs: Optional[Dict[str, str]] = None,
    record_scans: bool = False,
) -> MissionReport:
    """Run ``scenario`` to completion and return its report."""
    simulator = MissionSimulator(
        scenario,
        out_dir=out_dir,
        metrics=metrics,
        progress=progress,
        outputs=outputs,
        record_scans=record_scans,
    )
    return simulator.run()
