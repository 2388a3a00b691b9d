"""
╔══════════════════════════════════════════════════════════════════╗
║  RESULTS LOGGER: Structured Output for Campaign Runs             ║
║  JSONL per drop and per event, CDF CSVs and summary.json         ║
╚══════════════════════════════════════════════════════════════════╝
"""

import csv
import json
import os
import time
from pathlib import Path

from config.settings import LoggingConfig
from core.performance import CdfSummary, write_cdf_csv


class ResultsLogger:
    """
    Writes everything a campaign leaves on disk.

    Separate streams:
      - drops.jsonl: per-drop, per-policy SE vectors (no wall-clock fields)
      - events.jsonl: campaign start/finish and failures, timestamped
      - cdf_<policy>.csv: sorted samples with cumulative probability
      - se.csv: one row per drop, UE and policy
      - summary.json: likely95 per policy, subset fractions, config echo
    """

    def __init__(self, config: LoggingConfig, out_dir: str = None):
        self.config = config
        self.out_dir = Path(out_dir or config.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str) -> Path:
        return self.out_dir / name

    def _write_jsonl(self, filepath: Path, data: dict, stamp: bool = True):
        """Append a JSON line to the specified file."""
        if stamp:
            data["_ts"] = time.time()
            data["_iso"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        with open(filepath, "a") as f:
            f.write(json.dumps(data, sort_keys=True, default=str) + "\n")

    def reset_drops(self):
        """Truncate drops.jsonl so a re-run never appends to an old campaign."""
        open(self._path(self.config.drops_log_file), "w").close()

    def log_drop(self, drop_data: dict):
        drop_data["_event"] = "drop"
        self._write_jsonl(self._path(self.config.drops_log_file), drop_data, stamp=False)

    def log_event(self, event_data: dict):
        self._write_jsonl(self._path(self.config.events_log_file), event_data)

    def write_cdf(self, policy: str, summary: CdfSummary) -> Path:
        path = self._path(f"cdf_{policy}.csv")
        write_cdf_csv(summary, str(path))
        return path

    def write_se_csv(self, rows: list[tuple]) -> Path:
        """Rows of (drop, ue_id, se_bits_per_hz, policy)."""
        path = self._path("se.csv")
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["drop", "ue_id", "se_bits_per_hz", "policy"])
            for drop, ue, se, policy in rows:
                writer.writerow([drop, ue, repr(float(se)), policy])
        return path

    def save_summary(self, summary: dict, filename: str = None) -> Path:
        path = self._path(filename or self.config.summary_file)
        with open(path, "w") as f:
            json.dump(summary, f, indent=2, sort_keys=True, default=str)
            f.write("\n")
        return path

    def get_drop_history(self) -> list[dict]:
        """Read all drop records back from JSONL."""
        records = []
        path = self._path(self.config.drops_log_file)
        if os.path.exists(path):
            with open(path) as f:
                for line in f:
                    if line.strip():
                        records.append(json.loads(line))
        return records
