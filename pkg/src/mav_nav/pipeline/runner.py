"""
Command Line Runner

This module is the scenario-driven entry point (`mavnav`): run full
missions, compute one-shot plans, rebuild maps from recorded scans, build
and inspect 1D heuristic tables and validate scenario files.

Exit codes: 0 on success, 1 on input errors, 2 on mission failure or
when no path exists.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import yaml

from mav_nav.core.dynamics import State6
from mav_nav.core.errors import ConfigError, NoPathError, PlanInputError, ScenarioError
from mav_nav.core.planning.heuristic import build_heuristic_table
from mav_nav.core.planning.planner import PlanRequest, plan
from mav_nav.core.utils.logging import NavLogger, create_nav_logger
from mav_nav.io.readers.heuristic_table import read_heuristic_rows
from mav_nav.io.readers.scan_log import read_scan_log
from mav_nav.io.readers.scenario import cli_overrides, create_scenario_loader
from mav_nav.io.schema import LatticeConfig, Scenario
from mav_nav.io.writers.csv import write_heuristic_table, write_map_export, write_trajectory
from mav_nav.pipeline.simulator import (
    DEFAULT_OUTPUTS,
    initial_snapshot,
    map_from_scans,
    run_mission,
    trajectory_clearance,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_FAILURE = 2

DEFAULT_CONFIG = "config/config.yaml"


def load_project_config(config_path: str = DEFAULT_CONFIG) -> Dict[str, Any]:
    """Project defaults from ``config_path``; an absent file yields an empty mapping."""
    path = Path(config_path)
    if not path.exists():
        return {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"YAML parsing error in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Configuration {path} must be a mapping")
    return data


def logging_config(
    project: Dict[str, Any], scenario: Optional[Scenario], out_dir: Optional[str]
) -> Dict[str, Any]:
    """Merge project logging defaults with the scenario's ``logging`` block."""
    section = dict(project.get("logging") or {})
    config: Dict[str, Any] = {
        "level": section.get("level", "INFO"),
        "console_level": section.get("console_level", "INFO"),
        "max_bytes": int(float(section.get("max_log_size_mb", 10)) * 1024 * 1024),
        "backup_count": int(section.get("backup_count", 5)),
    }
    if scenario is not None:
        if scenario.logging.level:
            config["level"] = scenario.logging.level
        if scenario.logging.console_level:
            config["console_level"] = scenario.logging.console_level
    if out_dir:
        config["log_dir"] = str(Path(out_dir) / section.get("log_subdir", "logs"))
    return config


def _output_name(project: Dict[str, Any], key: str, default: str) -> str:
    return str((project.get("outputs") or {}).get(key, default))


def _print_issues(error: ScenarioError) -> None:
    print(f"Error: {error}", file=sys.stderr)
    for issue in error.issues:
        print(f"  - {issue}", file=sys.stderr)


def _load(args: argparse.Namespace) -> Scenario:
    overrides = cli_overrides(getattr(args, "seed", None), getattr(args, "mode", None))
    return create_scenario_loader(args.scenario, overrides).scenario


def _start_logging(
    args: argparse.Namespace, project: Dict[str, Any], scenario: Optional[Scenario]
) -> NavLogger:
    return create_nav_logger(logging_config(project, scenario, getattr(args, "out", None)))


def cmd_run(args: argparse.Namespace, project: Dict[str, Any]) -> int:
    """Run a full mission and write its outputs under ``--out``."""
    scenario = _load(args)
    nav_logger = _start_logging(args, project, scenario)
    try:
        features = project.get("features") or {}
        progress = args.progress or bool(features.get("enable_progress_bar"))
        record_scans = args.record_scans or bool(features.get("record_scans"))
        outputs = {
            key: _output_name(project, key, default) for key, default in DEFAULT_OUTPUTS.items()
        }
        report = run_mission(
            scenario,
            out_dir=args.out,
            metrics=nav_logger.metrics,
            progress=progress,
            outputs=outputs,
            record_scans=record_scans,
        )
        nav_logger.log_metrics_snapshot(report.duration)
    finally:
        nav_logger.close()

    print(f"Mission '{report.scenario}' (seed {report.seed}):")
    print(f"Success: {report.success}")
    if not report.success:
        print(f"Reason: {report.reason}")
    print(f"Goals reached: {report.goals_reached}/{report.goals_total}")
    print(f"Duration: {report.duration:.2f} s")
    print(f"Replans: {report.metrics['replans']} ({report.metrics['replan_failures']} failed)")
    print(f"Max tracking error: {report.max_tracking_error:.3f} m")
    print(f"Outputs: {args.out}")
    return EXIT_OK if report.success else EXIT_FAILURE


def cmd_plan(args: argparse.Namespace, project: Dict[str, Any]) -> int:
    """Plan once from the start to the first goal on the initial-scan map."""
    scenario = _load(args)
    nav_logger = _start_logging(args, project, scenario)
    try:
        _, snapshot = initial_snapshot(scenario)
        request = PlanRequest(
            start=State6(scenario.mav.start, (0.0, 0.0, 0.0)),
            goal=scenario.goals[0].position,
            snapshot=snapshot,
            config=scenario.planner,
        )
        try:
            result = plan(request)
        except NoPathError as e:
            logger.error(f"No path to goal 0: {e}")
            print(f"No path: {e} (expanded {e.expanded} nodes)", file=sys.stderr)
            return EXIT_FAILURE
        nav_logger.metrics.log_plan(result.expanded, result.wall_time)
    finally:
        nav_logger.close()

    out_path = Path(args.out) / _output_name(project, "trajectory", "trajectory.csv")
    write_trajectory(result.trajectory, str(out_path))
    print("Plan Result:")
    print(f"Segments: {len(result.trajectory)}")
    print(f"Duration: {result.trajectory.duration:.2f} s")
    print(f"Cost: {result.cost:.3f}")
    print(f"Expanded: {result.expanded}")
    print(f"Clearance: {trajectory_clearance(result.trajectory, snapshot):.3f} m")
    print(f"Trajectory: {out_path}")
    return EXIT_OK


def cmd_map(args: argparse.Namespace, project: Dict[str, Any]) -> int:
    """Replay a scan log into the scenario's voxel map and write the map export."""
    scenario = _load(args)
    nav_logger = _start_logging(args, project, scenario)
    try:
        scans = read_scan_log(args.scans)
        grid = map_from_scans(scenario, scans)
    finally:
        nav_logger.close()

    out_path = Path(args.out) / _output_name(project, "map_export", "map.csv")
    write_map_export(grid.export_lines(), str(out_path))
    print("Map Result:")
    print(f"Scans: {len(scans)}")
    print(f"Occupied voxels: {len(grid.occupied_centers())}")
    print(f"Map: {out_path}")
    return EXIT_OK


def _lattice_config(args: argparse.Namespace) -> LatticeConfig:
    if getattr(args, "scenario", None):
        return _load(args).planner
    return LatticeConfig()


def cmd_heuristic_build(args: argparse.Namespace, project: Dict[str, Any]) -> int:
    config = _lattice_config(args)
    table = build_heuristic_table(config)
    path = args.table or str(
        Path(args.out or ".") / _output_name(project, "heuristic_table", "heuristic_table.csv")
    )
    write_heuristic_table(table, path)
    print(f"Heuristic table: {len(table.entries)} entries written to {path}")
    return EXIT_OK


def parse_bin(text: str) -> Tuple[int, int]:
    """Parse ``D,K`` into integer (distance bin, velocity bin)."""
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"bin must look like D,K, got '{text}'")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"bin must be two integers, got '{text}'") from e


def cmd_heuristic_inspect(args: argparse.Namespace, project: Dict[str, Any]) -> int:
    """Print ``d,k,time,control`` for requested bins (every row when none are given)."""
    entries = read_heuristic_rows(args.table)
    max_d = max((abs(d) for d, _ in entries), default=0)
    max_k = max((abs(k) for _, k in entries), default=0)
    requested: List[Tuple[int, int]] = list(args.bins or [])
    if not requested:
        requested = sorted(entries)

    status = EXIT_OK
    for d_bin, v_bin in requested:
        if abs(d_bin) > max_d or abs(v_bin) > max_k:
            print(
                f"bin ({d_bin},{v_bin}) out of range: |d| <= {max_d}, |k| <= {max_k}",
                file=sys.stderr,
            )
            status = EXIT_INPUT_ERROR
            continue
        if (d_bin, v_bin) not in entries:
            print(f"bin ({d_bin},{v_bin}) has no entry (goal unreachable)", file=sys.stderr)
            status = EXIT_INPUT_ERROR
            continue
        time, control = entries[(d_bin, v_bin)]
        print(f"{d_bin},{v_bin},{time!r},{control!r}")
    return status


def cmd_validate(args: argparse.Namespace, project: Dict[str, Any]) -> int:
    overrides = cli_overrides(getattr(args, "seed", None), getattr(args, "mode", None))
    loader = create_scenario_loader(args.scenario, overrides)
    validation = loader.validate_configuration()
    print("Scenario Validation:")
    print(f"Valid: {validation['valid']}")
    if validation["issues"]:
        print("Issues:")
        for issue in validation["issues"]:
            print(f"  - {issue}")
    if validation["warnings"]:
        print("Warnings:")
        for warning in validation["warnings"]:
            print(f"  - {warning}")
    for key, value in validation["statistics"].items():
        print(f"{key}: {value}")
    if args.dump:
        print(loader.dump(), end="")
    return EXIT_OK if validation["valid"] else EXIT_INPUT_ERROR


def _add_scenario_flags(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--scenario", required=required, help="Scenario YAML file")
    parser.add_argument("--seed", type=int, help="Override the scenario seed")
    parser.add_argument(
        "--mode",
        choices=["uniform", "multires", "multiresolution"],
        help="Override the planner mode",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mavnav", description="MAV navigation stack simulator")
    parser.add_argument("--config", default=DEFAULT_CONFIG, help="Configuration file path")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run a full mission")
    _add_scenario_flags(run)
    run.add_argument("--out", required=True, help="Output directory")
    run.add_argument("--progress", action="store_true", help="Show a progress bar")
    run.add_argument(
        "--record-scans", action="store_true", help="Also write every scan to the scan log"
    )
    run.set_defaults(handler=cmd_run)

    plan_cmd = subparsers.add_parser("plan", help="Plan once to the first goal")
    _add_scenario_flags(plan_cmd)
    plan_cmd.add_argument("--out", required=True, help="Output directory")
    plan_cmd.set_defaults(handler=cmd_plan)

    map_cmd = subparsers.add_parser("map", help="Rebuild the map from a recorded scan log")
    _add_scenario_flags(map_cmd)
    map_cmd.add_argument("--scans", required=True, help="Scan log CSV from run --record-scans")
    map_cmd.add_argument("--out", required=True, help="Output directory")
    map_cmd.set_defaults(handler=cmd_map)

    heuristic = subparsers.add_parser("heuristic", help="1D heuristic table tools")
    actions = heuristic.add_subparsers(dest="action", required=True)
    build = actions.add_parser("build", help="Build and write a heuristic table")
    _add_scenario_flags(build, required=False)
    build.add_argument("--table", help="Output table path")
    build.add_argument("--out", help="Output directory when --table is omitted")
    build.set_defaults(handler=cmd_heuristic_build)
    inspect = actions.add_parser("inspect", help="Print heuristic table entries")
    inspect.add_argument("--table", required=True, help="Table CSV path")
    inspect.add_argument(
        "--bin", dest="bins", action="append", type=parse_bin, help="Bin D,K (repeatable)"
    )
    inspect.set_defaults(handler=cmd_heuristic_inspect)

    validate = subparsers.add_parser("validate", help="Validate a scenario file")
    _add_scenario_flags(validate)
    validate.add_argument("--dump", action="store_true", help="Print the defaulted scenario")
    validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the command line."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        project = load_project_config(args.config)
        return args.handler(args, project)
    except ScenarioError as e:
        _print_issues(e)
        return EXIT_INPUT_ERROR
    except (FileNotFoundError, ConfigError, PlanInputError) as e:
        logger.error(f"Input error: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except Exception as e:
        logger.error(f"Error in main: {str(e)}")
        print(f"Error: {str(e)}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
