"""
sfc_provisioning/golden.py

Persistent store of oracle optima.

The store is a JSON document keyed by scenario hash, then by packet-size
grid. It is written after every new record so the committed file always
holds every optimum computed so far.

File format:
{
  "3cb8...": {
    "scenario": "paper",
    "optima": {
      "1000000": {"objective_ms": 559.375,
                  "placement": [{"chain": "SFC-1", "node": "MEC-2", "vnf": "VNF-1"}]}
    }
  }
}
"""

import json
import threading
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .scenario import Scenario, scenario_hash
from .topology import PlacementMatrix


def grid_key(packet_sizes: Sequence[float]) -> str:
    return ",".join(f"{beta:.17g}" for beta in packet_sizes)


class GoldenValueStore:
    """Thread-safe golden-value store backed by a JSON file."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._data = self._load()

    # ------------------------------------------------------------------
    # Internal helpers
    # ------------------------------------------------------------------

    def _load(self) -> dict:
        if self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                return json.load(f)
        return {}

    def _save_unlocked(self):
        """Write the store to disk.  Caller must hold self._lock."""
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8", newline="\n") as f:
            json.dump(self._data, f, indent=2, sort_keys=True)
            f.write("\n")
        tmp.replace(self.path)  # atomic rename

    # ------------------------------------------------------------------
    # Public API
    # ------------------------------------------------------------------

    def get(self, scenario: Scenario, packet_sizes: Sequence[float]) -> Optional[float]:
        """Stored optimum for the scenario and grid, or None."""
        with self._lock:
            entry = self._data.get(scenario_hash(scenario), {})
            record = entry.get("optima", {}).get(grid_key(packet_sizes))
            return None if record is None else float(record["objective_ms"])

    def placement_rows(
        self, scenario: Scenario, packet_sizes: Sequence[float]
    ) -> Optional[List[Dict[str, str]]]:
        with self._lock:
            entry = self._data.get(scenario_hash(scenario), {})
            record = entry.get("optima", {}).get(grid_key(packet_sizes))
            return None if record is None else list(record["placement"])

    def record(
        self,
        scenario: Scenario,
        packet_sizes: Sequence[float],
        objective_ms: float,
        placement: PlacementMatrix,
    ):
        with self._lock:
            entry = self._data.setdefault(
                scenario_hash(scenario), {"scenario": scenario.name, "optima": {}}
            )
            entry["optima"][grid_key(packet_sizes)] = {
                "objective_ms": objective_ms,
                "placement": placement.rows(),
            }
            self._save_unlocked()

    def summary(self) -> Dict[str, int]:
        with self._lock:
            return {
                "scenarios": len(self._data),
                "optima": sum(len(e.get("optima", {})) for e in self._data.values()),
            }
