"""
tandemnet — Datasets and Minibatching
Dataset container, mean/std normalization, seeded shuffling and per-batch
encoding for the network boundary.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

import config
from data_ingestion.event_stream import load_event_dataset
from data_ingestion.idx_loader import load_mnist_split
from tandem.codec import EncodedBatch, encode_constant_current, encode_event_frames
from tandem.errors import DataError, ParameterError
from utils.logging_config import get_logger

log = get_logger("batching")

TASKS = ("classify", "reconstruct")
DATASETS = ("mnist", "events")


@dataclass
class Dataset:
    """
    inputs:  (N, C, H, W) static samples, or (N, T, C, H, W) event frames
    labels:  (N,) class indices
    targets: (N, features) regression targets for reconstruction, else None
    """
    inputs: np.ndarray
    labels: np.ndarray
    targets: np.ndarray | None = None
    time_varying: bool = False
    name: str = ""

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def sample_shape(self) -> tuple:
        return tuple(self.inputs.shape[2:] if self.time_varying else self.inputs.shape[1:])

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def head(self, n: int | None) -> "Dataset":
        if n is None or n >= len(self):
            return self
        return self.take(np.arange(n))

    def take(self, idx) -> "Dataset":
        return Dataset(inputs=self.inputs[idx], labels=self.labels[idx],
                       targets=None if self.targets is None else self.targets[idx],
                       time_varying=self.time_varying, name=self.name)


def normalize(images, mean: float, std: float) -> np.ndarray:
    if std == 0:
        raise ParameterError("normalization std must be non-zero")
    return (np.asarray(images, dtype=np.float64) - mean) / std


def shuffle_batches(n: int, batch_size: int, seed: int) -> list[np.ndarray]:
    """Seeded permutation of range(n) cut into batches; the last partial batch is kept."""
    if batch_size < 1:
        raise ParameterError(f"batch size must be positive, got {batch_size}")
    order = np.random.default_rng(seed).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def sequential_batches(n: int, batch_size: int) -> list[np.ndarray]:
    if batch_size < 1:
        raise ParameterError(f"batch size must be positive, got {batch_size}")
    return [np.arange(i, min(i + batch_size, n)) for i in range(0, n, batch_size)]


def encode_batch(dataset: Dataset, idx, T: int) -> EncodedBatch:
    x = dataset.inputs[idx]
    if dataset.time_varying:
        return encode_event_frames(np.swapaxes(x, 0, 1))
    return encode_constant_current(x, T)


def batch_targets(dataset: Dataset, idx) -> np.ndarray:
    return dataset.labels[idx] if dataset.targets is None else dataset.targets[idx]


def load_dataset(kind: str, directory, split: str, T: int, task: str = "classify",
                 limit: int | None = None) -> Dataset:
    """
    mnist:  IDX files in `directory`; classify → (x − 0.1307)/0.3081,
            reconstruct → raw [0, 1] pixels with targets equal to the flattened input.
    events: `directory/<split>/<label>/*.evs` binned into T frames.
    """
    if task not in TASKS:
        raise ParameterError(f"unknown task {task!r} (expected one of {TASKS})")
    if kind == "mnist":
        images, labels = load_mnist_split(directory, split)
        if limit is not None:
            images, labels = images[:limit], labels[:limit]
        raw = images[:, None, :, :]
        if task == "reconstruct":
            return Dataset(inputs=raw, labels=labels, targets=raw.reshape(len(raw), -1).copy(),
                           name=f"mnist-{split}")
        return Dataset(inputs=normalize(raw, config.MNIST_MEAN, config.MNIST_STD), labels=labels,
                       name=f"mnist-{split}")
    if kind == "events":
        if task == "reconstruct":
            raise ParameterError("reconstruction is only defined for static image datasets")
        frames, labels = load_event_dataset(Path(directory) / split, T)
        ds = Dataset(inputs=frames, labels=labels, time_varying=True, name=f"events-{split}")
        return ds.head(limit)
    raise DataError(f"unknown dataset kind {kind!r} (expected one of {DATASETS})")
