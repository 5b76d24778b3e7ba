"""
tandemnet — Synthetic Seed Data
Writes small, seeded datasets in the on-disk formats the loaders read, for
smoke runs and tests:

  • MNIST-layout IDX files: each class lights a distinct block of the image,
    with pixel noise
  • EVST event streams under <dir>/<split>/<label>/*.evs: each class fires
    from its own region, polarity alternating with position

Usage:
    python -m data_ingestion.generate_seed_data mnist  OUT_DIR [--train 600] [--test 100]
    python -m data_ingestion.generate_seed_data events OUT_DIR [--per-class 20]
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import config
from data_ingestion.event_stream import EventStream, write_events
from data_ingestion.idx_loader import write_idx
from utils.logging_config import get_logger

log = get_logger("seed_data")


# ═════════════════════════════════════════════════════════════════════
#  1. Static images
# ═════════════════════════════════════════════════════════════════════
def _block(label: int, size: int, n_classes: int) -> tuple[slice, slice]:
    grid = int(np.ceil(np.sqrt(n_classes)))
    cell = size // grid
    r, c = divmod(label, grid)
    return slice(r * cell, (r + 1) * cell), slice(c * cell, (c + 1) * cell)


def make_images(n: int, n_classes: int = 10, size: int = 28, seed: int = config.RANDOM_SEED,
                noise: int = 40) -> tuple[np.ndarray, np.ndarray]:
    """uint8 images (n, size, size) and labels cycling through the classes."""
    rng = np.random.default_rng(seed)
    labels = (np.arange(n) % n_classes).astype(np.uint8)
    rng.shuffle(labels)
    images = rng.integers(0, noise + 1, size=(n, size, size))
    for i, label in enumerate(labels):
        rows, cols = _block(int(label), size, n_classes)
        images[i, rows, cols] = rng.integers(180, 256, size=images[i, rows, cols].shape)
    return images.astype(np.uint8), labels


def write_mnist_fixture(directory, n_train: int = 600, n_test: int = 100, n_classes: int = 10,
                        size: int = 28, seed: int = config.RANDOM_SEED, gzip: bool = False) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    suffix = ".gz" if gzip else ""
    for split, n, split_seed in (("train", n_train, seed), ("test", n_test, seed + 1)):
        images, labels = make_images(n, n_classes, size, split_seed)
        image_name, label_name = config.MNIST_FILES[split]
        write_idx(directory / f"{image_name}{suffix}", images)
        write_idx(directory / f"{label_name}{suffix}", labels)
    log.info("Synthetic MNIST fixture: %d train / %d test images in %s", n_train, n_test, directory)
    return directory


# ═════════════════════════════════════════════════════════════════════
#  2. Event streams
# ═════════════════════════════════════════════════════════════════════
def make_stream(label: int, width: int, height: int, T: int, rng: np.random.Generator,
                bin_ms: float = config.EVENT_BIN_MS, rate: int = 30, n_classes: int = 4) -> EventStream:
    """Roughly `rate` events per bin from the class region, sorted by time."""
    band = max(1, width // n_classes)
    duration_us = int(T * bin_ms * 1000)
    n = int(rng.poisson(rate * T))
    t = np.sort(rng.integers(0, duration_us, size=n))
    x = rng.integers(label * band % width, min(width, label * band % width + band), size=n)
    y = rng.integers(0, height, size=n)
    p = (x + y) % 2
    return EventStream.from_records(np.stack([t, x, y, p], axis=1), width, height)


def write_event_fixture(directory, per_class: int = 20, n_classes: int = 4, width: int = 16, height: int = 16,
                        T: int = 8, seed: int = config.RANDOM_SEED) -> Path:
    directory = Path(directory)
    rng = np.random.default_rng(seed)
    for split, count in (("train", per_class), ("test", max(1, per_class // 4))):
        for label in range(n_classes):
            label_dir = directory / split / str(label)
            label_dir.mkdir(parents=True, exist_ok=True)
            for k in range(count):
                write_events(label_dir / f"{k:04d}.evs", make_stream(label, width, height, T, rng,
                                                                      n_classes=n_classes))
    log.info("Synthetic event fixture: %d classes, %d per class in %s", n_classes, per_class, directory)
    return directory


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Write synthetic tandemnet datasets")
    sub = parser.add_subparsers(dest="kind", required=True)
    p = sub.add_parser("mnist")
    p.add_argument("out")
    p.add_argument("--train", type=int, default=600)
    p.add_argument("--test", type=int, default=100)
    p.add_argument("--gzip", action="store_true")
    p = sub.add_parser("events")
    p.add_argument("out")
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--T", type=int, default=8)
    parser.add_argument("--seed", type=int, default=config.RANDOM_SEED)
    args = parser.parse_args(argv)

    if args.kind == "mnist":
        write_mnist_fixture(args.out, args.train, args.test, seed=args.seed, gzip=args.gzip)
    else:
        write_event_fixture(args.out, args.per_class, T=args.T, seed=args.seed)
    return 0


if __name__ == "__main__":
    sys.exit(main())
