"""
tandemnet — Codec
Boundary between data and the network.

Encoding: real-valued inputs enter the SNN as a constant current injected at
every step; the ANN path receives x⁰ = raw·T so that layer 1's aggregate drive
W·x⁰ + b·T equals T times the per-step SNN drive. Event frames enter the SNN
frame by frame and the ANN as their time sum (the input spike counts).

Decoding: the output layer's free aggregate membrane potential (default) or its
spike counts; class prediction is argmax with the lowest index winning ties.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from tandem.errors import DataError, ParameterError
from tandem.tensor_core import as_tensor


class DecodeMode(str, Enum):
    MEMBRANE = "membrane"
    SPIKE_COUNT = "spike_count"

    @classmethod
    def parse(cls, value) -> "DecodeMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        if key == "count":
            key = "spike_count"
        try:
            return cls(key)
        except ValueError:
            raise ParameterError(f"unknown decode mode {value!r} (expected membrane or spike_count)") from None


@dataclass(frozen=True)
class EncodedBatch:
    """
    currents:  SNN layer-1 input; (N, ...) injected every step, or (T, N, ...)
               frames when time_varying.
    ann_input: x⁰ consumed by ANN layer 1, shaped (N, ...).
    """
    currents: np.ndarray
    ann_input: np.ndarray
    T: int
    time_varying: bool = False

    @property
    def n_samples(self) -> int:
        return self.ann_input.shape[0]

    def subset(self, lo: int, hi: int) -> "EncodedBatch":
        currents = self.currents[:, lo:hi] if self.time_varying else self.currents[lo:hi]
        return EncodedBatch(currents, self.ann_input[lo:hi], self.T, self.time_varying)


def _check_T(T) -> int:
    if int(T) != T or T < 1:
        raise ParameterError(f"encoding window T must be a positive integer, got {T}")
    return int(T)


def encode_constant_current(raw, T: int) -> EncodedBatch:
    """Encode a normalized batch (N, ...) as constant currents. Idempotent."""
    T = _check_T(T)
    if isinstance(raw, EncodedBatch):
        if raw.T == T or raw.time_varying:
            return raw
        raw = raw.currents
    x = as_tensor(raw)
    if not np.all(np.isfinite(x)):
        raise DataError("input batch contains non-finite values")
    return EncodedBatch(currents=x, ann_input=x * T, T=T, time_varying=False)


def encode_event_frames(frames) -> EncodedBatch:
    """Encode time-major event frames (T, N, ...) ; T is the frame count."""
    if isinstance(frames, EncodedBatch):
        return frames
    f = as_tensor(frames)
    if f.ndim < 3:
        raise DataError(f"event frames must be shaped (T, N, ...), got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise DataError("event frames contain non-finite values")
    return EncodedBatch(currents=f, ann_input=f.sum(axis=0), T=_check_T(f.shape[0]), time_varying=True)


def decode(outputs, mode) -> np.ndarray:
    """Scores from the output layer; returns a copy so the trace stays untouched."""
    DecodeMode.parse(mode)
    return np.array(outputs, dtype=np.float64, copy=True)


def predict(scores) -> np.ndarray:
    """Argmax over classes; ties resolve to the lowest class index."""
    s = as_tensor(scores)
    if s.ndim != 2:
        raise DataError(f"scores must be (N, classes), got {s.shape}")
    return np.argmax(s, axis=1)
