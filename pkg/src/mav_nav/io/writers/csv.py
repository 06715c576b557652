"""
CSV Writer Module

This module handles the line-oriented exports: the mission log, the
occupied-voxel map export, sampled trajectories and heuristic tables.
All files use LF line endings and fixed number formatting so equal inputs
give byte-identical files.
"""

import logging
from pathlib import Path
from typing import Iterable, List, Mapping, Sequence

import numpy as np
import pandas as pd

from mav_nav.core.dynamics import PiecewiseTrajectory
from mav_nav.core.mapping.voxel_grid import RecordedScan
from mav_nav.core.planning.heuristic import Heuristic1DTable

logger = logging.getLogger(__name__)

MISSION_LOG_COLUMNS = [
    "clock",
    "true_px",
    "true_py",
    "true_pz",
    "true_vx",
    "true_vy",
    "true_vz",
    "est_px",
    "est_py",
    "est_pz",
    "est_vx",
    "est_vy",
    "est_vz",
    "wp_x",
    "wp_y",
    "wp_z",
    "theta",
    "phi",
    "climb",
    "tracking_err",
    "min_clearance",
    "mode",
]

TRAJECTORY_COLUMNS = ["t", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az"]
MAP_HEADER = "ix,iy,iz,cx,cy,cz"
HEURISTIC_HEADER = "d_bin,v_bin,time,control_cost"
SCAN_LOG_COLUMNS = ["scan", "clock", "sx", "sy", "sz", "qx", "qy", "qz", "qw", "px", "py", "pz"]


def _prepare(path: str) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def write_mission_log(rows: Sequence[Mapping], path: str) -> Path:
    """
    Write mission log rows (one per control tick) with 6-decimal floats.

    Args:
        rows: Mappings keyed by ``MISSION_LOG_COLUMNS``
        path: Output CSV path

    Returns:
        Path: Written file
    """
    out = _prepare(path)
    frame = pd.DataFrame(list(rows), columns=MISSION_LOG_COLUMNS)
    frame.to_csv(out, index=False, float_format="%.6f", lineterminator="\n")
    logger.info(f"Wrote mission log with {len(frame)} rows to {out}")
    return out


def write_map_export(lines: Iterable[str], path: str, header: bool = False) -> Path:
    """Write ``ix,iy,iz,cx,cy,cz`` lines of occupied voxels."""
    out = _prepare(path)
    count = 0
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        if header:
            f.write(MAP_HEADER + "\n")
        for line in lines:
            f.write(line + "\n")
            count += 1
    logger.info(f"Wrote {count} occupied voxels to {out}")
    return out


def trajectory_frame(traj: PiecewiseTrajectory, dt: float = 0.02) -> pd.DataFrame:
    times, pos, vel, acc = traj.sample(dt)
    data = {"t": times}
    for i, axis in enumerate("xyz"):
        data[f"p{axis}"] = pos[:, i]
    for i, axis in enumerate("xyz"):
        data[f"v{axis}"] = vel[:, i]
    for i, axis in enumerate("xyz"):
        data[f"a{axis}"] = acc[:, i]
    return pd.DataFrame(data, columns=TRAJECTORY_COLUMNS)


def write_trajectory(traj: PiecewiseTrajectory, path: str, dt: float = 0.02) -> Path:
    """Write trajectory samples at ``dt`` spacing."""
    out = _prepare(path)
    frame = trajectory_frame(traj, dt)
    frame.to_csv(out, index=False, float_format="%.6f", lineterminator="\n")
    logger.info(f"Wrote {len(frame)} trajectory samples to {out}")
    return out


def heuristic_lines(table: Heuristic1DTable) -> List[str]:
    return [f"{d},{k},{time!r},{control!r}" for d, k, time, control in table.rows()]


def write_heuristic_table(table: Heuristic1DTable, path: str) -> Path:
    """Dump every table entry as ``d_bin,v_bin,time,control_cost``, sorted by bins."""
    out = _prepare(path)
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        f.write(HEURISTIC_HEADER + "\n")
        for line in heuristic_lines(table):
            f.write(line + "\n")
    logger.info(f"Wrote {len(table.entries)} heuristic entries to {out}")
    return out


def scan_log_frame(scans: Sequence[RecordedScan]) -> pd.DataFrame:
    """
    One row per point, with the scan's index, clock and sensor pose repeated.

    A scan without points keeps a single row with empty point columns so the
    scan sequence survives a round trip.
    """
    indices: List[np.ndarray] = []
    values: List[np.ndarray] = []
    for scan in scans:
        points = np.asarray(scan.points, dtype=float).reshape(-1, 3)
        if len(points) == 0:
            points = np.full((1, 3), np.nan)
        head = np.concatenate(([scan.clock], scan.pose.position, scan.pose.quaternion))
        indices.append(np.full(len(points), int(scan.scan_index), dtype=np.int64))
        values.append(np.hstack([np.tile(head, (len(points), 1)), points]))
    if not values:
        return pd.DataFrame(columns=SCAN_LOG_COLUMNS)
    frame = pd.DataFrame(np.vstack(values), columns=SCAN_LOG_COLUMNS[1:])
    frame.insert(0, "scan", np.concatenate(indices))
    return frame


def write_scan_log(scans: Sequence[RecordedScan], path: str) -> Path:
    """Write recorded scans at full float precision so a replay rebuilds the same map."""
    out = _prepare(path)
    frame = scan_log_frame(scans)
    frame.to_csv(out, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(scans)} scans ({len(frame)} rows) to {out}")
    return out
