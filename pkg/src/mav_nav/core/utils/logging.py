"""
Logging setup for the MAV navigation stack.
Provides colored console output, rotating log files and thread-safe mission metrics.
"""

import logging
import logging.handlers
import sys
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional

import colorlog

ROOT_LOGGER = "mav_nav"


class MissionMetrics:
    """Tracks mission counters and plan latencies"""

    COUNTERS = (
        "control_ticks",
        "scans",
        "waypoints",
        "plans",
        "replans",
        "plan_failures",
        "replan_failures",
        "aborts",
        "expansions",
        "goals_reached",
    )

    def __init__(self):
        self.counters: Dict[str, int] = {name: 0 for name in self.COUNTERS}
        self.plan_latencies: List[float] = []
        self.lock = threading.Lock()

    def increment(self, name: str, amount: int = 1):
        """Add ``amount`` to a counter"""
        with self.lock:
            self.counters[name] = self.counters.get(name, 0) + amount

    def log_plan(self, expanded: int, wall_time: float, replan: bool = False):
        """Log a finished plan or replan"""
        with self.lock:
            self.counters["replans" if replan else "plans"] += 1
            self.counters["expansions"] += expanded
            self.plan_latencies.append(wall_time)

    def log_plan_failure(self, expanded: int = 0):
        with self.lock:
            self.counters["plan_failures"] += 1
            self.counters["expansions"] += expanded

    def log_replan_failure(self, expanded: int = 0):
        with self.lock:
            self.counters["replan_failures"] += 1
            self.counters["expansions"] += expanded

    def get_current_metrics(self) -> Dict[str, Any]:
        """Snapshot of counters plus latency statistics (wall time, seconds)"""
        with self.lock:
            latencies = list(self.plan_latencies)
            return {
                **self.counters,
                "plan_latency_max": max(latencies) if latencies else 0.0,
                "plan_latency_mean": sum(latencies) / len(latencies) if latencies else 0.0,
            }


class NavLogger:
    """Console and rotating-file logging for one mission or CLI run"""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        self.config = dict(config or {})
        self.log_dir: Optional[Path] = None
        if self.config.get("log_dir"):
            self.log_dir = Path(self.config["log_dir"])
            self.log_dir.mkdir(parents=True, exist_ok=True)

        self.metrics = MissionMetrics()
        self._setup_loggers()

    def _setup_loggers(self):
        """Set up console and file handlers on the package logger"""
        self.logger = logging.getLogger(ROOT_LOGGER)
        self.logger.setLevel(getattr(logging, str(self.config.get("level", "INFO")).upper()))
        self.logger.propagate = False

        for handler in list(self.logger.handlers):
            handler.close()
        self.logger.handlers.clear()

        # Console handler with colors
        console_handler = logging.StreamHandler(sys.stderr)
        console_level = self.config.get("console_level", "INFO")
        console_handler.setLevel(getattr(logging, str(console_level).upper()))
        console_handler.setFormatter(
            colorlog.ColoredFormatter(
                "%(log_color)s%(asctime)s - %(name)s - %(levelname)s%(reset)s - %(message)s",
                datefmt="%H:%M:%S",
                log_colors={
                    "DEBUG": "cyan",
                    "INFO": "green",
                    "WARNING": "yellow",
                    "ERROR": "red",
                    "CRITICAL": "magenta",
                },
            )
        )
        self.logger.addHandler(console_handler)

        if self.log_dir is None:
            return

        max_bytes = int(self.config.get("max_bytes", 10 * 1024 * 1024))
        backups = int(self.config.get("backup_count", 3))
        file_formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s"
        )

        main_handler = logging.handlers.RotatingFileHandler(
            self.log_dir / "mav_nav.log", maxBytes=max_bytes, backupCount=backups
        )
        main_handler.setLevel(logging.DEBUG)
        main_handler.setFormatter(file_formatter)
        self.logger.addHandler(main_handler)

        error_handler = logging.handlers.RotatingFileHandler(
            self.log_dir / "errors.log", maxBytes=max_bytes, backupCount=backups
        )
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(file_formatter)
        self.logger.addHandler(error_handler)

        # Planner output only
        planning_handler = logging.handlers.RotatingFileHandler(
            self.log_dir / "planning.log", maxBytes=max_bytes, backupCount=backups
        )
        planning_handler.setLevel(logging.DEBUG)
        planning_handler.setFormatter(file_formatter)
        planning_handler.addFilter(logging.Filter(f"{ROOT_LOGGER}.core.planning"))
        self.logger.addHandler(planning_handler)

    def log_metrics_snapshot(self, clock: float):
        metrics = self.metrics.get_current_metrics()
        self.logger.info(
            f"t={clock:.2f}s: {metrics['scans']} scans, {metrics['plans']} plans, "
            f"{metrics['replans']} replans ({metrics['replan_failures']} failed), "
            f"{metrics['aborts']} aborts"
        )

    def close(self):
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)

    def log_files(self) -> Dict[str, str]:
        if self.log_dir is None:
            return {}
        return {
            "main_log": str(self.log_dir / "mav_nav.log"),
            "error_log": str(self.log_dir / "errors.log"),
            "planning_log": str(self.log_dir / "planning.log"),
        }


def create_nav_logger(config: Optional[Dict[str, Any]] = None) -> NavLogger:
    """Factory function to create the navigation logger"""
    return NavLogger(config)
