"""
Heuristic Table Reader Module

This module handles reading 1D heuristic tables dumped as
``d_bin,v_bin,time,control_cost`` lines.
"""

import logging
from pathlib import Path
from typing import Dict, Tuple

import pandas as pd

from mav_nav.core.errors import ConfigError
from mav_nav.core.planning.heuristic import Heuristic1DTable, max_progress_speed
from mav_nav.io.schema import LatticeConfig

logger = logging.getLogger(__name__)

HEADER = ["d_bin", "v_bin", "time", "control_cost"]


def read_heuristic_rows(path: str) -> Dict[Tuple[int, int], Tuple[float, float]]:
    """
    Read table rows keyed by (distance bin, velocity bin).

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If the header or a row is malformed
    """
    table_path = Path(path)
    if not table_path.exists():
        raise FileNotFoundError(f"Heuristic table not found: {table_path}")
    try:
        frame = pd.read_csv(
            table_path,
            dtype={"d_bin": "int64", "v_bin": "int64"},
            float_precision="round_trip",
        )
    except (ValueError, pd.errors.ParserError) as e:
        raise ConfigError(f"Malformed heuristic table {table_path}: {e}") from e
    if list(frame.columns) != HEADER:
        raise ConfigError(f"Heuristic table {table_path} has header {list(frame.columns)}")

    entries = {}
    for d_bin, v_bin, time, control in frame.itertuples(index=False, name=None):
        entries[(int(d_bin), int(v_bin))] = (float(time), float(control))
    logger.info(f"Read {len(entries)} heuristic entries from {table_path}")
    return entries


def load_heuristic_table(path: str, config: LatticeConfig) -> Heuristic1DTable:
    """Rebuild a zero-offset table object from a dump, taking bin sizes from ``config``."""
    entries = read_heuristic_rows(path)
    if not entries:
        raise ConfigError(f"Heuristic table {path} is empty")
    return Heuristic1DTable(
        cell_size=config.base_resolution,
        velocity_bin=config.velocity_bin,
        max_distance_bin=max(abs(d) for d, _ in entries),
        max_velocity_bin=max(abs(k) for _, k in entries),
        rho=config.rho,
        v_max=max_progress_speed(config),
        entries=entries,
    )
