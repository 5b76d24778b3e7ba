"""
tandemnet — Run Manifest
Records what a training run was started with and how it ended.

manifest.json is written once, before training, and never touched again;
completion status goes to a separate run_status.json.
"""

import datetime as dt
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from utils.logging_config import get_logger

log = get_logger("manifest")

MANIFEST_NAME = "manifest.json"
STATUS_NAME = "run_status.json"


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class RunManifest:
    config: dict
    seed: int
    config_hash: str
    started_at: str
    outputs: dict = field(default_factory=dict)


def record_start(out_dir, config: dict, seed: int, config_hash: str, outputs: dict) -> RunManifest:
    """Write manifest.json for a run that is about to start."""
    manifest = RunManifest(config=config, seed=seed, config_hash=config_hash, started_at=_now(),
                           outputs={k: str(v) for k, v in outputs.items()})
    path = Path(out_dir) / MANIFEST_NAME
    path.write_text(json.dumps(asdict(manifest), indent=2, sort_keys=True), encoding="utf-8")
    log.info("Run started (config %s), manifest %s", config_hash[:12], path)
    return manifest


def record_finish(out_dir, manifest: RunManifest, status: str = "success",
                  duration: float = 0.0, final_metrics: dict | None = None) -> dict:
    """Write run_status.json next to the manifest."""
    record = {"status": status, "started_at": manifest.started_at, "finished_at": _now(),
              "duration_sec": round(float(duration), 3), "final_metrics": final_metrics or {}}
    (Path(out_dir) / STATUS_NAME).write_text(json.dumps(record, indent=2, sort_keys=True), encoding="utf-8")
    log.info("Run finished (%s, %.1fs)", status, duration)
    return record
