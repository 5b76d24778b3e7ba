"""
tandemnet — Event Streams
EVST event files and fixed-width time binning into frames.

File layout (little-endian):
    header  b"EVST", u16 width, u16 height
    records 12 bytes each: u32 t (µs), u16 x, u16 y, u16 polarity, u16 pad

Frames are (T, 2, H, W): frame[t, p, y, x] counts events of polarity p with
timestamp in [t·bin, (t+1)·bin). Events past the window are dropped.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

import config
from tandem.errors import DataError
from utils.logging_config import get_logger

log = get_logger("events")

MAGIC = b"EVST"
HEADER_DTYPE = np.dtype([("magic", "S4"), ("width", "<u2"), ("height", "<u2")])
RECORD_DTYPE = np.dtype([("t", "<u4"), ("x", "<u2"), ("y", "<u2"), ("p", "<u2"), ("pad", "<u2")])


@dataclass(frozen=True)
class EventStream:
    t: np.ndarray         # µs, non-decreasing
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray         # 0 or 1
    width: int
    height: int

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise DataError("event field arrays differ in length")
        if self.width < 1 or self.height < 1:
            raise DataError(f"sensor size {self.width}x{self.height} is empty")
        if n == 0:
            return
        if np.any(np.diff(self.t.astype(np.int64)) < 0):
            raise DataError("event timestamps are not sorted")
        if np.any(self.x >= self.width) or np.any(self.y >= self.height):
            raise DataError(f"event coordinates outside the {self.width}x{self.height} sensor")
        if np.any(self.p > 1):
            raise DataError("event polarity must be 0 or 1")

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_records(cls, records, width: int, height: int) -> "EventStream":
        """records: iterable of (t_us, x, y, p)."""
        arr = np.asarray(list(records), dtype=np.int64).reshape(-1, 4)
        if arr.size and (arr.min() < 0 or arr[:, 0].max() > np.iinfo(np.uint32).max
                         or arr[:, 1:].max() > np.iinfo(np.uint16).max):
            raise DataError("event field out of range for the EVST record layout")
        return cls(t=arr[:, 0].astype(np.uint32), x=arr[:, 1].astype(np.uint16), y=arr[:, 2].astype(np.uint16),
                   p=arr[:, 3].astype(np.uint16), width=int(width), height=int(height))


def read_events(path) -> EventStream:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"event file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise DataError(f"{path}: truncated header")
    header = np.frombuffer(raw, dtype=HEADER_DTYPE, count=1)[0]
    if header["magic"] != MAGIC:
        raise DataError(f"{path}: bad magic {bytes(header['magic'])!r}")
    body = len(raw) - HEADER_DTYPE.itemsize
    if body % RECORD_DTYPE.itemsize:
        raise DataError(f"{path}: {body} record bytes is not a multiple of {RECORD_DTYPE.itemsize}")
    rec = np.frombuffer(raw, dtype=RECORD_DTYPE, offset=HEADER_DTYPE.itemsize)
    return EventStream(t=rec["t"].copy(), x=rec["x"].copy(), y=rec["y"].copy(), p=rec["p"].copy(),
                       width=int(header["width"]), height=int(header["height"]))


def write_events(path, stream: EventStream) -> None:
    header = np.array([(MAGIC, stream.width, stream.height)], dtype=HEADER_DTYPE)
    rec = np.zeros(len(stream), dtype=RECORD_DTYPE)
    rec["t"], rec["x"], rec["y"], rec["p"] = stream.t, stream.x, stream.y, stream.p
    Path(path).write_bytes(header.tobytes() + rec.tobytes())


def bin_events(stream: EventStream, T: int, bin_ms: float = config.EVENT_BIN_MS,
               width: int | None = None, height: int | None = None) -> np.ndarray:
    """Accumulate events into (T, 2, H, W) frames of bin_ms milliseconds."""
    width = stream.width if width is None else int(width)
    height = stream.height if height is None else int(height)
    if T < 1 or bin_ms <= 0:
        raise DataError(f"invalid binning T={T}, bin_ms={bin_ms}")
    if len(stream) and (stream.x.max() >= width or stream.y.max() >= height):
        raise DataError(f"event coordinates outside the {width}x{height} frame")

    frames = np.zeros((T, 2, height, width))
    if len(stream) == 0:
        return frames
    bins = (stream.t.astype(np.int64) * 1000) // int(round(bin_ms * 1_000_000))
    keep = bins < T
    np.add.at(frames, (bins[keep], stream.p[keep].astype(np.int64), stream.y[keep].astype(np.int64),
                       stream.x[keep].astype(np.int64)), 1.0)
    return frames


def load_event_dataset(directory, T: int, bin_ms: float = config.EVENT_BIN_MS) -> tuple[np.ndarray, np.ndarray]:
    """
    Read <directory>/<label>/*.evs into frames (N, T, 2, H, W) and int labels.
    All streams must share one sensor size. Files are read in sorted order.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"event dataset directory not found: {directory}")
    frames, labels, size = [], [], None
    for label_dir in sorted((d for d in directory.iterdir() if d.is_dir()), key=lambda d: d.name):
        if not label_dir.name.isdigit():
            raise DataError(f"event class directory {label_dir.name!r} is not an integer label")
        for path in sorted(label_dir.glob("*.evs")):
            stream = read_events(path)
            if size is None:
                size = (stream.width, stream.height)
            elif size != (stream.width, stream.height):
                raise DataError(f"{path}: sensor {stream.width}x{stream.height} differs from {size[0]}x{size[1]}")
            frames.append(bin_events(stream, T, bin_ms))
            labels.append(int(label_dir.name))
    if not frames:
        raise DataError(f"no .evs files under {directory}")
    log.info("Loaded %d event streams (%dx%d, T=%d) from %s", len(frames), size[0], size[1], T, directory)
    return np.stack(frames), np.asarray(labels, dtype=np.int64)
