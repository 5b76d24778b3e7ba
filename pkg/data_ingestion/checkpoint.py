"""
tandemnet — Checkpoints
Portable inference checkpoints (TDNN format, little-endian):

    b"TDNN"  u32 version  u32 T  u32 decode  u32 n_layers
        decode: low 16 bits 0 membrane, 1 spike_count; bit 16 set for a one-step synaptic delay
    per layer:
        u32 kind (0 dense, 1 conv)  u32 is_output
        dense: u32 n_in  u32 n_out
        conv:  u32 C  u32 H  u32 W  u32 filters  u32 kh  u32 kw  u32 stride  u32 padding
        u32 neuron kind (0 IF, 1 LIF)  f64 θ  f64 τ_m  f64 dt
        f32 weights (row-major)  f32 bias
    u32 CRC32 of every preceding byte

Only folded networks are saved; optimizer state is not persisted.
"""

import math
import struct
import zlib
from pathlib import Path

import numpy as np

from tandem.codec import DecodeMode
from tandem.errors import ChecksumError, DataError, ShapeError, StateError, VersionError
from tandem.network import ConvGeometry, LayerKind, TandemLayer, TandemNetwork
from tandem.neuron_sim import NeuronKind, NeuronParams
from utils.logging_config import get_logger

log = get_logger("checkpoint")

MAGIC = b"TDNN"
VERSION = 1

_DECODE_CODES = {DecodeMode.MEMBRANE: 0, DecodeMode.SPIKE_COUNT: 1}
_KIND_CODES = {LayerKind.DENSE: 0, LayerKind.CONV: 1}
_NEURON_CODES = {NeuronKind.IF: 0, NeuronKind.LIF: 1}
DELAY_FLAG = 1 << 16


def _invert(codes: dict) -> dict:
    return {v: k for k, v in codes.items()}


def serialize_network(network: TandemNetwork) -> bytes:
    if network.has_bn:
        raise StateError("fold batch norm before saving a checkpoint")
    decode_word = _DECODE_CODES[network.decode_mode] | (DELAY_FLAG if network.synaptic_delay else 0)
    parts = [MAGIC, struct.pack("<4I", VERSION, network.T, decode_word, len(network.layers))]
    for layer in network.layers:
        parts.append(struct.pack("<2I", _KIND_CODES[layer.kind], int(layer.is_output)))
        if layer.kind is LayerKind.DENSE:
            n_out, n_in = layer.weights.shape
            parts.append(struct.pack("<2I", n_in, n_out))
        else:
            g = layer.geometry
            parts.append(struct.pack("<8I", g.in_channels, g.height, g.width, g.filters,
                                     g.kh, g.kw, g.stride, g.padding))
        n = layer.neuron
        parts.append(struct.pack("<I3d", _NEURON_CODES[n.kind], n.theta, n.tau_m, n.dt))
        parts.append(np.ascontiguousarray(layer.weights, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, raw: bytes, end: int):
        self.raw = raw
        self.pos = 0
        self.end = end

    def unpack(self, fmt: str) -> tuple:
        size = struct.calcsize(fmt)
        if self.pos + size > self.end:
            raise DataError("checkpoint payload truncated")
        values = struct.unpack_from(fmt, self.raw, self.pos)
        self.pos += size
        return values

    def floats(self, shape: tuple) -> np.ndarray:
        count = math.prod(int(d) for d in shape)
        if 4 * count > self.end - self.pos:
            raise DataError("checkpoint payload truncated")
        arr = np.frombuffer(self.raw, dtype="<f4", count=count, offset=self.pos)
        self.pos += 4 * count
        return arr.astype(np.float64).reshape(shape)


def deserialize_network(raw: bytes) -> TandemNetwork:
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise VersionError("not a TDNN checkpoint (bad magic)")
    (stored_crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(raw[:-4]) != stored_crc:
        raise ChecksumError("checkpoint CRC32 mismatch")

    rd = _Reader(raw, len(raw) - 4)
    rd.pos = 4
    version, T, decode_word, n_layers = rd.unpack("<4I")
    if version != VERSION:
        raise VersionError(f"checkpoint version {version} is not supported (expected {VERSION})")
    if decode_word & ~(DELAY_FLAG | 0xFFFF):
        raise DataError(f"unknown flags in decode word {decode_word:#x}")
    decode_code, delay = decode_word & 0xFFFF, bool(decode_word & DELAY_FLAG)
    decode_modes, kinds, neurons = _invert(_DECODE_CODES), _invert(_KIND_CODES), _invert(_NEURON_CODES)
    if decode_code not in decode_modes:
        raise DataError(f"unknown decode code {decode_code}")

    layers = []
    for i in range(n_layers):
        kind_code, is_output = rd.unpack("<2I")
        if kind_code not in kinds:
            raise DataError(f"layer {i}: unknown kind code {kind_code}")
        if kinds[kind_code] is LayerKind.DENSE:
            n_in, n_out = rd.unpack("<2I")
            geometry, w_shape, b_len = None, (n_out, n_in), n_out
        else:
            try:
                geometry = ConvGeometry(*rd.unpack("<8I"))
                geometry.output_shape
            except ShapeError as exc:
                raise DataError(f"layer {i}: {exc}") from None
            w_shape, b_len = geometry.kernel_shape, geometry.filters
        neuron_code, theta, tau_m, dt = rd.unpack("<I3d")
        if neuron_code not in neurons:
            raise DataError(f"layer {i}: unknown neuron code {neuron_code}")
        try:
            neuron = NeuronParams(neurons[neuron_code], theta, tau_m, dt)
        except ValueError as exc:
            raise DataError(f"layer {i}: {exc}") from None
        layers.append(TandemLayer(kind=kinds[kind_code], weights=rd.floats(w_shape), bias=rd.floats((b_len,)),
                                  neuron=neuron, geometry=geometry, is_output=bool(is_output)))
    if rd.pos != rd.end:
        raise DataError(f"{rd.end - rd.pos} trailing bytes after the last layer")

    try:
        return TandemNetwork(layers=layers, T=T, decode_mode=decode_modes[decode_code], synaptic_delay=delay)
    except ValueError as exc:
        raise DataError(f"inconsistent checkpoint: {exc}") from None


def save_checkpoint(network: TandemNetwork, path) -> Path:
    path = Path(path)
    blob = serialize_network(network)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    tmp.replace(path)
    log.info("Checkpoint written: %s (%d layers, %d bytes)", path, len(network.layers), len(blob))
    return path


def load_checkpoint(path) -> TandemNetwork:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    network = deserialize_network(path.read_bytes())
    log.info("Checkpoint loaded: %s (T=%d, decode=%s, delay=%s)", path, network.T, network.decode_mode.value,
             network.synaptic_delay)
    return network
