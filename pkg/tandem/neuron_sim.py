"""
tandemnet — Neuron Simulation
Exact discrete-time IF / LIF layer dynamics.

Per step, in this order:  U ← α·U + I − θ·s[t−1]  then  s[t] = 1 where U ≥ θ.
The threshold subtraction of a spike lands on the following step (subtractive
reset), U_rest = 0 and R = 1. Layers propagate within the same step unless
the one-step synaptic delay is switched on.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

import config
from tandem.errors import ParameterError, ShapeError
from tandem.tensor_core import as_tensor, conv2d, ensure_finite, map_samples, matmul, reduce_sum


class NeuronKind(str, Enum):
    IF = "IF"
    LIF = "LIF"

    @classmethod
    def parse(cls, value) -> "NeuronKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ParameterError(f"unknown neuron kind {value!r} (expected IF or LIF)") from None


@dataclass(frozen=True)
class NeuronParams:
    kind: NeuronKind
    theta: float
    tau_m: float = config.LIF_TAU_M
    dt: float = config.SIM_DT

    def __post_init__(self):
        object.__setattr__(self, "kind", NeuronKind.parse(self.kind))
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise ParameterError(f"theta must be a positive finite number, got {self.theta}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ParameterError(f"dt must be positive, got {self.dt}")
        if self.kind is NeuronKind.LIF and not (self.tau_m > 0 and math.isfinite(self.tau_m)):
            raise ParameterError(f"LIF tau_m must be positive, got {self.tau_m}")

    @property
    def alpha(self) -> float:
        if self.kind is NeuronKind.IF:
            return 1.0
        return math.exp(-self.dt / self.tau_m)

    @classmethod
    def from_kind(cls, kind, theta: float | None = None, tau_m: float | None = None) -> "NeuronParams":
        """Build params with the standard defaults: IF θ=1; LIF θ=0.1, τ_m=20 steps."""
        kind = NeuronKind.parse(kind)
        if theta is None:
            theta = config.IF_THRESHOLD if kind is NeuronKind.IF else config.LIF_THRESHOLD
        return cls(kind=kind, theta=float(theta), tau_m=float(config.LIF_TAU_M if tau_m is None else tau_m))


@dataclass
class LayerState:
    membrane: np.ndarray
    last_spikes: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "LayerState":
        return cls(membrane=np.zeros(shape), last_spikes=np.zeros(shape))

    def reset(self) -> None:
        self.membrane.fill(0.0)
        self.last_spikes.fill(0.0)


# ─── Synaptic input ──────────────────────────────────────────────────

def synaptic_current(weights, bias, presyn, stride: int = 1, padding: int = 0) -> np.ndarray:
    """
    I = W·s + b per sample. Dense weights are (n_out, n_in) and any trailing
    presynaptic dims are flattened; conv weights are (F, C, kh, kw).
    """
    w = as_tensor(weights)
    b = as_tensor(bias)
    x = as_tensor(presyn)
    if w.ndim == 2:
        x = x.reshape(x.shape[0], -1)
        if x.shape[1] != w.shape[1]:
            raise ShapeError(f"dense layer expects {w.shape[1]} inputs, got {x.shape[1]}")
        if b.shape != (w.shape[0],):
            raise ShapeError(f"bias shape {b.shape} does not match {w.shape[0]} outputs")
        return matmul(x, w.T) + b
    if w.ndim == 4:
        if x.ndim != 4:
            raise ShapeError(f"conv layer expects N×C×H×W input, got {x.shape}")
        if b.shape != (w.shape[0],):
            raise ShapeError(f"bias shape {b.shape} does not match {w.shape[0]} filters")
        return conv2d(x, w, stride, padding) + b[None, :, None, None]
    raise ShapeError(f"unsupported weight rank {w.ndim}")


def free_membrane_potential(weights, bias, input_counts, T: int,
                            stride: int = 1, padding: int = 0) -> np.ndarray:
    """Threshold-free aggregate potential U^f = W·c + b·T."""
    _check_window(T)
    return synaptic_current(weights, as_tensor(bias) * T, input_counts, stride, padding)


# ─── Dynamics ────────────────────────────────────────────────────────

def _advance(params: NeuronParams, state: LayerState, current: np.ndarray) -> np.ndarray:
    membrane = state.membrane
    if params.kind is NeuronKind.LIF:
        membrane *= params.alpha
    membrane += current
    membrane -= params.theta * state.last_spikes
    spikes = (membrane >= params.theta).astype(np.float64)
    state.last_spikes = spikes
    return spikes


def step(params: NeuronParams, state: LayerState, current) -> np.ndarray:
    """Advance one step in place and return the binary spikes it emitted."""
    current = ensure_finite(as_tensor(current), "synaptic current")
    if current.shape != state.membrane.shape:
        raise ShapeError(f"current shape {current.shape} does not match state {state.membrane.shape}")
    return _advance(params, state, current)


def _check_window(T) -> None:
    if int(T) != T or T < 1:
        raise ParameterError(f"encoding window T must be a positive integer, got {T}")
    if T > config.MAX_T:
        raise ParameterError(f"encoding window T={T} exceeds the supported maximum {config.MAX_T}")


def run_layer(params: NeuronParams, weights, bias, inputs, T: int, *,
              constant: bool = False, delay: bool = False, threads: int = 1,
              stride: int = 1, padding: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """
    Simulate one layer from reset for T steps.

    `inputs` is a presynaptic train shaped (T, N, ...) or, with constant=True,
    a single (N, ...) frame injected at every step. With delay=True step t
    consumes input t−1 (nothing at t=1, the bias alone).

    Returns the output train (T, N, ...) as uint8 and the per-neuron count
    (N, ...) as float64 holding exact integers.
    """
    _check_window(T)
    T = int(T)
    x = as_tensor(inputs)

    if constant:
        drive = ensure_finite(synaptic_current(weights, bias, x, stride, padding), "synaptic current")
        n = drive.shape[0]
        frame_shape = drive.shape[1:]

        def current_at(t, lo, hi):
            if delay and t == 0:
                return np.broadcast_to(as_tensor(bias).reshape((-1,) + (1,) * (len(frame_shape) - 1)),
                                       (hi - lo,) + frame_shape)
            return drive[lo:hi]
    else:
        if x.shape[0] != T:
            raise ShapeError(f"input train spans {x.shape[0]} steps, expected T={T}")
        n = x.shape[1]
        flat = x.reshape((T * n,) + x.shape[2:])
        drive = synaptic_current(weights, bias, flat, stride, padding)
        drive = ensure_finite(drive.reshape((T, n) + drive.shape[1:]), "synaptic current")
        frame_shape = drive.shape[2:]
        if delay:
            idle = synaptic_current(weights, bias, np.zeros((1,) + x.shape[2:]), stride, padding)[0]
            drive = np.concatenate([np.broadcast_to(idle, (1, n) + frame_shape), drive[:-1]], axis=0)

        def current_at(t, lo, hi):
            return drive[t, lo:hi]

    def integrate(lo: int, hi: int) -> np.ndarray:
        state = LayerState.zeros((hi - lo,) + frame_shape)
        train = np.zeros((T, hi - lo) + frame_shape, dtype=np.uint8)
        for t in range(T):
            train[t] = _advance(params, state, current_at(t, lo, hi))
        return train

    parts = map_samples(integrate, n, threads)
    train = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)
    counts = reduce_sum(train, 0)
    return train, counts
