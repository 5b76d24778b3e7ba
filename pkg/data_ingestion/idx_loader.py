"""
tandemnet — IDX Loader
Bit-exact reader/writer for IDX image and label files (MNIST layout).

Header (big-endian): u32 magic 0x00000803 (images, rank 3) or 0x00000801
(labels, rank 1), then one u32 per dimension, then the unsigned-byte payload.
Files ending in .gz are decompressed transparently.
"""

import gzip
import math
import struct
from pathlib import Path

import numpy as np

import config
from tandem.errors import DataError
from utils.logging_config import get_logger

log = get_logger("idx")

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
_RANK = {IMAGE_MAGIC: 3, LABEL_MAGIC: 1}


def _read_bytes(path: Path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"IDX file not found: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    try:
        with opener(path, "rb") as f:
            return f.read()
    except (OSError, EOFError) as exc:
        raise DataError(f"{path}: cannot read ({exc})") from None


def parse_idx(raw: bytes, expected_magic: int, name: str = "<bytes>") -> np.ndarray:
    if len(raw) < 4:
        raise DataError(f"{name}: truncated header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise DataError(f"{name}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    rank = _RANK[magic]
    header_len = 4 + 4 * rank
    if len(raw) < header_len:
        raise DataError(f"{name}: truncated header")
    dims = struct.unpack(f">{rank}I", raw[4:header_len])
    expected = math.prod(dims)
    payload = len(raw) - header_len
    if payload != expected:
        raise DataError(f"{name}: payload is {payload} bytes, header dims {dims} require {expected}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header_len).reshape(dims)


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Raw uint8 array from an IDX file."""
    return parse_idx(_read_bytes(path), expected_magic, str(path))


def write_idx(path, array) -> None:
    """Write a rank-3 (images) or rank-1 (labels) uint8 array as IDX."""
    arr = np.asarray(array)
    if arr.ndim not in (1, 3):
        raise DataError(f"IDX writer supports rank 1 or 3, got {arr.ndim}")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise DataError("IDX payload values must fit in an unsigned byte")
    magic = IMAGE_MAGIC if arr.ndim == 3 else LABEL_MAGIC
    blob = struct.pack(f">I{arr.ndim}I", magic, *arr.shape) + arr.astype(np.uint8).tobytes()
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wb") as f:
        f.write(blob)


def load_idx(path_images, path_labels) -> tuple[np.ndarray, np.ndarray]:
    """Images scaled to [0, 1] as float64 (N, H, W) and int64 labels (N,)."""
    images = read_idx(path_images, IMAGE_MAGIC)
    labels = read_idx(path_labels, LABEL_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise DataError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    log.info("Loaded %d images %dx%d from %s", images.shape[0], images.shape[1], images.shape[2],
             Path(path_images).name)
    return images.astype(np.float64) / 255.0, labels.astype(np.int64)


def _resolve(directory: Path, name: str) -> Path:
    for candidate in (directory / name, directory / f"{name}.gz"):
        if candidate.is_file():
            return candidate
    raise FileNotFoundError(f"{name}[.gz] not found in {directory}")


def load_mnist_split(directory, split: str) -> tuple[np.ndarray, np.ndarray]:
    """split is 'train' or 'test' (t10k files); standard MNIST names, optionally gzipped."""
    if split not in config.MNIST_FILES:
        raise DataError(f"unknown split {split!r} (expected one of {sorted(config.MNIST_FILES)})")
    directory = Path(directory)
    image_name, label_name = config.MNIST_FILES[split]
    return load_idx(_resolve(directory, image_name), _resolve(directory, label_name))
