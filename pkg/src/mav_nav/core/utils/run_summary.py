"""
Mission-level structured summary writer.

Writes machine-readable artifacts for each mission:
- {out_dir}/events.ndjson   (append-only mission events)
- {out_dir}/summary.json    (final roll-up)

Events carry the simulated clock instead of wall time, so two missions with
the same scenario and seed produce identical files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class RunSummaryWriter:
    """Utility to persist mission events and the final summary to disk."""

    def __init__(self, run_id: str, out_dir: Optional[str] = None) -> None:
        self.run_id = run_id
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.events: List[Dict[str, Any]] = []
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            self.ndjson_path = self.out_dir / "events.ndjson"
            self.summary_json_path = self.out_dir / "summary.json"
            # Start a fresh stream for every mission
            self.ndjson_path.write_text("", encoding="utf-8")

        self.append_event({"event": "mission_initialized"}, clock=0.0)

    def append_event(self, event: Dict[str, Any], clock: float) -> Dict[str, Any]:
        """Append an event stamped with the simulated clock and run_id."""
        safe_event = {"event": None, "clock": round(float(clock), 6), "run_id": self.run_id}
        safe_event.update(_plain(dict(event or {})))
        self.events.append(safe_event)
        if self.out_dir is not None:
            with self.ndjson_path.open("a", encoding="utf-8", newline="\n") as f:
                f.write(json.dumps(safe_event, ensure_ascii=False, sort_keys=True) + "\n")
        return safe_event

    def events_of(self, kind: str) -> List[Dict[str, Any]]:
        return [e for e in self.events if e.get("event") == kind]

    def write_final_summary(self, summary: Dict[str, Any], clock: float) -> Optional[Path]:
        """Write the final roll-up JSON and return the file path."""
        data = _plain(dict(summary or {}))
        data.setdefault("run_id", self.run_id)
        data.setdefault("clock", round(float(clock), 6))
        self.append_event(
            {
                "event": "final_summary_written",
                "totals": {
                    "success": data.get("success"),
                    "goals_reached": data.get("goals_reached"),
                    "replans": data.get("replans"),
                },
            },
            clock=clock,
        )
        if self.out_dir is None:
            return None
        with self.summary_json_path.open("w", encoding="utf-8", newline="\n") as f:
            json.dump(data, f, indent=2, ensure_ascii=False, sort_keys=True)
            f.write("\n")
        return self.summary_json_path

    def get_run_directory(self) -> Optional[Path]:
        return self.out_dir
