"""
Report Writer Module

This module handles rendering mission reports as readable ``key=value`` lines.
"""

import logging
import math
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Tuple

logger = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """Render one report value; floats get 6 decimals, sequences are comma-joined."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return f"{value:.6f}"
    if isinstance(value, (list, tuple)):
        return ",".join(format_value(v) for v in value)
    if value is None:
        return "none"
    return str(value)


def report_lines(items: Iterable[Tuple[str, Any]]) -> List[str]:
    return [f"{key}={format_value(value)}" for key, value in items]


def write_report(report: Mapping[str, Any], path: str) -> Path:
    """
    Write a report mapping as ``key=value`` lines in insertion order.

    Args:
        report: Ordered report items
        path: Output path

    Returns:
        Path: Written file
    """
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        for line in report_lines(report.items()):
            f.write(line + "\n")
    logger.info(f"Wrote mission report to {out}")
    return out
