"""
Scan Log Reader Module

This module handles reading scans recorded during a mission, one point per
row as ``scan,clock,sx,sy,sz,qx,qy,qz,qw,px,py,pz``. The sensor pose is
the measured one the map saw, and points are in the sensor frame.
"""

import logging
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd

from mav_nav.core.dynamics import Pose
from mav_nav.core.errors import ConfigError
from mav_nav.core.mapping.voxel_grid import RecordedScan

logger = logging.getLogger(__name__)

HEADER = ["scan", "clock", "sx", "sy", "sz", "qx", "qy", "qz", "qw", "px", "py", "pz"]


def read_scan_log(path: str) -> List[RecordedScan]:
    """
    Read a scan log into scans ordered by scan index.

    Args:
        path: Scan log CSV

    Returns:
        List[RecordedScan]: Scans in increasing index order

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If the header or a value is malformed
    """
    log_path = Path(path)
    if not log_path.exists():
        raise FileNotFoundError(f"Scan log not found: {log_path}")
    try:
        frame = pd.read_csv(log_path, float_precision="round_trip")
    except (ValueError, pd.errors.ParserError) as e:
        raise ConfigError(f"Malformed scan log {log_path}: {e}") from e
    if list(frame.columns) != HEADER:
        raise ConfigError(f"Scan log {log_path} has header {list(frame.columns)}")
    if frame[HEADER[:9]].isna().any().any():
        raise ConfigError(f"Scan log {log_path} has rows without a scan index or pose")

    scans = []
    try:
        for scan_index, group in frame.groupby("scan", sort=True):
            head = group.iloc[0]
            points = group[["px", "py", "pz"]].to_numpy(dtype=float)
            points = points[~np.isnan(points).any(axis=1)]
            pose = Pose(
                position=head[["sx", "sy", "sz"]].to_numpy(dtype=float),
                quaternion=head[["qx", "qy", "qz", "qw"]].to_numpy(dtype=float),
            )
            scans.append(RecordedScan(int(scan_index), float(head["clock"]), pose, points))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Malformed scan log {log_path}: {e}") from e
    logger.info(f"Read {len(scans)} scans from {log_path}")
    return scans
