"""
tandemnet — Export Utilities
CSV report output. Every report is a pandas DataFrame written without index.
"""

from pathlib import Path

import pandas as pd

from utils.logging_config import get_logger

log = get_logger("export")

METRIC_COLUMNS = ["epoch", "split", "metric", "value"]


def to_csv_bytes(df: pd.DataFrame) -> bytes:
    """Convert a single DataFrame to CSV bytes."""
    return df.to_csv(index=False).encode("utf-8")


def write_csv(df: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_csv_bytes(df))
    log.info("Wrote %s (%d rows)", path, len(df))
    return path


class MetricWriter:
    """
    Accumulates (epoch, split, metric, value) rows; flush() rewrites the whole
    CSV so a partially finished run still leaves a parseable file.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self.rows: list[dict] = []

    def add(self, epoch: int, split: str, metric: str, value: float) -> None:
        self.rows.append({"epoch": int(epoch), "split": split, "metric": metric, "value": float(value)})

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=METRIC_COLUMNS)

    def flush(self) -> None:
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_bytes(to_csv_bytes(self.frame()))
