"""
tandemnet — Losses
Each loss returns (value, dE/doutput) for the decoded network output.
"""

import numpy as np

from tandem.errors import DataError, ShapeError
from tandem.tensor_core import as_tensor


def loss_mse(output, target) -> tuple[float, np.ndarray]:
    """Mean over batch and elements of (o − t)²; gradient 2(o − t)/size."""
    o = as_tensor(output)
    t = as_tensor(target)
    if o.shape != t.shape:
        raise ShapeError(f"output {o.shape} and target {t.shape} differ")
    diff = o - t
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def log_softmax(logits) -> np.ndarray:
    x = as_tensor(logits)
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_ce(output, labels) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy averaged over the batch."""
    o = as_tensor(output)
    if o.ndim != 2:
        raise ShapeError(f"cross-entropy expects (N, classes) scores, got {o.shape}")
    y = np.asarray(labels)
    if y.shape != (o.shape[0],):
        raise ShapeError(f"{y.shape[0] if y.ndim else 0} labels for {o.shape[0]} outputs")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise DataError("labels must be integers")
        y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= o.shape[1]):
        raise DataError(f"label out of range [0, {o.shape[1]})")

    logp = log_softmax(o)
    n = o.shape[0]
    value = float(-logp[np.arange(n), y].mean())
    grad = np.exp(logp)
    grad[np.arange(n), y] -= 1.0
    return value, grad / n
