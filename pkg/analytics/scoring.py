"""
tandemnet — Scoring
Accuracy, reconstruction MSE and the per-class accuracy breakdown.
"""

import numpy as np
import pandas as pd

from tandem.errors import ShapeError


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ShapeError(f"{preds.shape[0] if preds.ndim else 0} predictions for "
                         f"{labels.shape[0] if labels.ndim else 0} labels")
    if preds.size == 0:
        return 0.0
    return float(np.mean(preds == labels))


def mse(recon, target) -> float:
    """Mean over batch and elements."""
    recon = np.asarray(recon, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if recon.shape != target.shape:
        raise ShapeError(f"reconstruction {recon.shape} and target {target.shape} differ")
    return float(np.mean((recon - target) ** 2))


def per_class_accuracy(preds, labels) -> pd.DataFrame:
    """One row per class present in `labels`: class, n, correct, accuracy."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ShapeError(f"predictions {preds.shape} and labels {labels.shape} differ")
    df = pd.DataFrame({"class": labels, "correct": preds == labels})
    out = df.groupby("class")["correct"].agg(n="size", correct="sum").reset_index()
    out["correct"] = out["correct"].astype(int)
    out["accuracy"] = out["correct"] / out["n"]
    return out
