"""
tandemnet — Tandem Network
Weight-shared coupled layers. The SNN path computes exact spike trains and
counts; the ANN path re-evaluates each layer on the SNN counts of the layer
below and carries the backward pass.

Forward (per hidden layer l, aggregate over the window T):
    z^l = W^l · c^{l−1} + b^l · T        (c⁰ = x⁰ from the codec)
    a^l = activation(z^l)                 (ANN prediction of the count)
    s^l, c^l = run_layer(s^{l−1})         (SNN, same weights)
Output layer, membrane decode:  U^f = W^L · c^{L−1} + b^L · T.

Weight layout: dense (n_out, n_in); conv (filters, C, kh, kw).
"""

import copy
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator

import numpy as np

import config
from tandem import surrogate
from tandem.batchnorm import BatchNormState, BNCache, batchnorm_backward, batchnorm_fold, \
    batchnorm_forward_cached, folded_params
from tandem.codec import DecodeMode, EncodedBatch, encode_constant_current
from tandem.errors import ConfigError, ParameterError, ShapeError, StateError
from tandem.neuron_sim import NeuronParams, free_membrane_potential, run_layer
from tandem.tensor_core import as_tensor, conv2d_grad_input, conv2d_grad_kernel, conv_output_size, matmul, reduce_sum
from utils.logging_config import get_logger

log = get_logger("network")


class LayerKind(str, Enum):
    DENSE = "dense"
    CONV = "conv"


class ForwardMode(str, Enum):
    TANDEM = "tandem"   # ANN layers consume SNN counts
    ANN = "ann"         # pure-ANN chaining, c^l := a^l

    @classmethod
    def parse(cls, value) -> "ForwardMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ParameterError(f"unknown forward mode {value!r} (expected tandem or ann)") from None


# ═════════════════════════════════════════════════════════════════════
#  1. Layers and network
# ═════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class ConvGeometry:
    in_channels: int
    height: int
    width: int
    filters: int
    kh: int
    kw: int
    stride: int = 1
    padding: int = 0

    @property
    def out_h(self) -> int:
        return conv_output_size(self.height, self.kh, self.stride, self.padding)

    @property
    def out_w(self) -> int:
        return conv_output_size(self.width, self.kw, self.stride, self.padding)

    @property
    def input_shape(self) -> tuple:
        return (self.in_channels, self.height, self.width)

    @property
    def output_shape(self) -> tuple:
        return (self.filters, self.out_h, self.out_w)

    @property
    def kernel_shape(self) -> tuple:
        return (self.filters, self.in_channels, self.kh, self.kw)


@dataclass
class TandemLayer:
    """One set of weights serving both the SNN layer and its ANN twin."""
    kind: LayerKind
    weights: np.ndarray
    bias: np.ndarray
    neuron: NeuronParams
    geometry: ConvGeometry | None = None
    bn: BatchNormState | None = None
    is_output: bool = False

    @classmethod
    def dense(cls, n_in: int, n_out: int, neuron: NeuronParams,
              bn: bool = False, is_output: bool = False) -> "TandemLayer":
        return cls(kind=LayerKind.DENSE, weights=np.zeros((n_out, n_in)), bias=np.zeros(n_out),
                   neuron=neuron, bn=BatchNormState.identity(n_out) if bn else None, is_output=is_output)

    @classmethod
    def conv(cls, geometry: ConvGeometry, neuron: NeuronParams,
             bn: bool = False, is_output: bool = False) -> "TandemLayer":
        return cls(kind=LayerKind.CONV, weights=np.zeros(geometry.kernel_shape), bias=np.zeros(geometry.filters),
                   neuron=neuron, geometry=geometry,
                   bn=BatchNormState.identity(geometry.filters) if bn else None, is_output=is_output)

    @property
    def stride(self) -> int:
        return self.geometry.stride if self.geometry else 1

    @property
    def padding(self) -> int:
        return self.geometry.padding if self.geometry else 0

    @property
    def input_shape(self) -> tuple:
        if self.kind is LayerKind.CONV:
            return self.geometry.input_shape
        return (self.weights.shape[1],)

    @property
    def output_shape(self) -> tuple:
        if self.kind is LayerKind.CONV:
            return self.geometry.output_shape
        return (self.weights.shape[0],)

    @property
    def fan_in(self) -> int:
        return int(np.prod(self.weights.shape[1:]))

    @property
    def n_neurons(self) -> int:
        return int(np.prod(self.output_shape))

    def drive(self, x, T: int, weights=None, bias=None) -> np.ndarray:
        """Aggregate drive W·x + b·T on a count-like input."""
        w = self.weights if weights is None else weights
        b = self.bias if bias is None else bias
        return free_membrane_potential(w, b, x, T, self.stride, self.padding)

    def snn_params(self) -> tuple[np.ndarray, np.ndarray]:
        """Weights the SNN path runs with: BN folded on the fly from running statistics."""
        if self.bn is None:
            return self.weights, self.bias
        return folded_params(self.weights, self.bias, self.bn)


@dataclass
class TandemNetwork:
    layers: list[TandemLayer]
    T: int
    decode_mode: DecodeMode = DecodeMode.MEMBRANE
    input_shape: tuple = ()
    snn_stub: bool = False
    synaptic_delay: bool = False
    threads: int = 1
    arch: str = ""

    def __post_init__(self):
        self.decode_mode = DecodeMode.parse(self.decode_mode)
        if int(self.T) != self.T or self.T < 1:
            raise ParameterError(f"encoding window T must be a positive integer, got {self.T}")
        self.T = int(self.T)
        if not self.input_shape and self.layers:
            self.input_shape = self.layers[0].input_shape
        self.input_shape = tuple(int(d) for d in self.input_shape)
        self.validate()

    def validate(self) -> None:
        if not self.layers:
            raise ShapeError("network has no layers")
        outputs = [i for i, layer in enumerate(self.layers) if layer.is_output]
        if outputs != [len(self.layers) - 1]:
            raise ShapeError(f"exactly one output layer, the last, is required (got {outputs})")
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            if layer.kind is LayerKind.DENSE:
                ok = int(np.prod(shape)) == layer.weights.shape[1]
            else:
                ok = tuple(shape) == layer.geometry.input_shape
            if not ok:
                raise ShapeError(f"layer {i} expects input {layer.input_shape}, previous stage gives {tuple(shape)}")
            if layer.bias.shape != (layer.weights.shape[0],):
                raise ShapeError(f"layer {i} bias shape {layer.bias.shape} does not match weights {layer.weights.shape}")
            shape = layer.output_shape

    @property
    def has_bn(self) -> bool:
        return any(layer.bn is not None for layer in self.layers)

    @property
    def output_size(self) -> int:
        return self.layers[-1].n_neurons

    def with_window(self, T: int) -> "TandemNetwork":
        """Same layers (shared storage) simulated over a different window."""
        return replace(self, T=T)

    def param_items(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            yield f"{i}.weights", layer.weights
            yield f"{i}.bias", layer.bias
            if layer.bn is not None:
                yield f"{i}.gamma", layer.bn.gamma
                yield f"{i}.beta", layer.bn.beta


# ═════════════════════════════════════════════════════════════════════
#  2. Traces and gradients
# ═════════════════════════════════════════════════════════════════════

@dataclass
class LayerTrace:
    inputs: np.ndarray                  # c^{l−1}, or x⁰ for the first layer
    z: np.ndarray                       # aggregate pre-activation (after BN when present)
    a: np.ndarray                       # ANN output
    counts: np.ndarray | None           # SNN counts c^l (None for a membrane-decoded output)
    spikes: np.ndarray | None = None    # SNN train s^l, (T, N, ...) uint8
    bn_cache: BNCache | None = None


@dataclass
class ForwardTrace:
    layers: list[LayerTrace]
    output: np.ndarray
    mode: ForwardMode
    T: int

    @property
    def n_samples(self) -> int:
        return self.output.shape[0]


@dataclass
class LayerGrads:
    dW: np.ndarray
    db: np.ndarray
    dgamma: np.ndarray | None = None
    dbeta: np.ndarray | None = None


@dataclass
class GradientSet:
    layers: list[LayerGrads] = field(default_factory=list)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for i, g in enumerate(self.layers):
            yield f"{i}.weights", g.dW
            yield f"{i}.bias", g.db
            if g.dgamma is not None:
                yield f"{i}.gamma", g.dgamma
                yield f"{i}.beta", g.dbeta

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for _, g in self.items())


# ═════════════════════════════════════════════════════════════════════
#  3. Forward / backward
# ═════════════════════════════════════════════════════════════════════

def _as_batch(network: TandemNetwork, batch) -> EncodedBatch:
    if not isinstance(batch, EncodedBatch):
        batch = encode_constant_current(batch, network.T)
    if batch.T != network.T:
        raise ParameterError(f"batch encoded for T={batch.T}, network runs T={network.T}")
    return batch


def forward_tandem(network: TandemNetwork, batch, mode="tandem", training: bool = False,
                   keep_spikes: bool = True) -> ForwardTrace:
    """
    Run every layer on both paths. In tandem mode layer l's drive always comes
    from the SNN counts of layer l−1; in ann mode (or on an exact-ANN stub
    network) the counts are replaced by the ANN outputs.
    """
    mode = ForwardMode.parse(mode)
    batch = _as_batch(network, batch)
    T = network.T
    simulate = mode is ForwardMode.TANDEM and not network.snn_stub

    c_prev, s_prev, constant = batch.ann_input, batch.currents, not batch.time_varying
    traces: list[LayerTrace] = []
    for layer in network.layers:
        z = layer.drive(c_prev, T)
        cache = None
        if layer.bn is not None:
            u, cache = batchnorm_forward_cached(z / T, layer.bn, training)
            z = u * T

        spikes = None
        if layer.is_output and network.decode_mode is DecodeMode.MEMBRANE:
            a, counts = z, None
        else:
            a = surrogate.activate(z, layer.neuron, T)
            if simulate:
                w, b = layer.snn_params()
                spikes, counts = run_layer(layer.neuron, w, b, s_prev, T, constant=constant,
                                           delay=network.synaptic_delay, threads=network.threads,
                                           stride=layer.stride, padding=layer.padding)
            else:
                counts = a
        traces.append(LayerTrace(inputs=c_prev, z=z, a=a, counts=counts,
                                 spikes=spikes if keep_spikes else None, bn_cache=cache))
        c_prev, s_prev, constant = counts, spikes, False

    last = traces[-1]
    output = last.z if last.counts is None else last.counts
    return ForwardTrace(layers=traces, output=output, mode=mode, T=T)


def backward_tandem(network: TandemNetwork, trace: ForwardTrace, dE_doutput) -> GradientSet:
    """Backprop through the ANN path only, with layer inputs taken from the trace."""
    if len(trace.layers) != len(network.layers) or trace.T != network.T:
        raise StateError("trace does not belong to this network")
    g = as_tensor(dE_doutput)
    if g.shape != trace.output.shape:
        raise ShapeError(f"output gradient shape {g.shape} does not match output {trace.output.shape}")
    T = network.T

    grads: list[LayerGrads] = [None] * len(network.layers)
    for idx in range(len(network.layers) - 1, -1, -1):
        layer, lt = network.layers[idx], trace.layers[idx]
        if lt.z.shape[1:] != layer.output_shape:
            raise StateError(f"trace layer {idx} shape {lt.z.shape[1:]} does not match {layer.output_shape}")

        if layer.is_output and network.decode_mode is DecodeMode.MEMBRANE:
            dz = g
        else:
            dz = g * surrogate.activate_grad(lt.z, layer.neuron, T)

        dgamma = dbeta = None
        if layer.bn is not None:
            if lt.bn_cache is None:
                raise StateError(f"trace layer {idx} carries no batch-norm cache")
            du, dgamma, dbeta = batchnorm_backward(dz * T, layer.bn, lt.bn_cache)
            dz = du / T

        x = lt.inputs
        if layer.kind is LayerKind.DENSE:
            x2 = x.reshape(x.shape[0], -1)
            dW = matmul(dz.T, x2)
            db = reduce_sum(dz, 0) * T
            if idx:
                g = matmul(dz, layer.weights).reshape(x.shape)
        else:
            dW = conv2d_grad_kernel(x, dz, layer.weights.shape, layer.stride, layer.padding)
            db = dz.sum(axis=(0, 2, 3)) * T
            if idx:
                g = conv2d_grad_input(dz, layer.weights, x.shape, layer.stride, layer.padding)
        grads[idx] = LayerGrads(dW=dW, db=db, dgamma=dgamma, dbeta=dbeta)
    return GradientSet(layers=grads)


def inference_snn(network: TandemNetwork, batch) -> np.ndarray:
    """Pure SNN execution for T steps; the output layer is decoded per decode_mode."""
    if network.has_bn:
        raise StateError("batch norm must be folded before SNN inference")
    batch = _as_batch(network, batch)
    T = network.T

    c_prev, s_prev, constant = batch.ann_input, batch.currents, not batch.time_varying
    for layer in network.layers:
        if layer.is_output and network.decode_mode is DecodeMode.MEMBRANE:
            return layer.drive(c_prev, T)
        if network.snn_stub:
            s_prev, c_prev = None, surrogate.activate(layer.drive(c_prev, T), layer.neuron, T)
        else:
            s_prev, c_prev = run_layer(layer.neuron, layer.weights, layer.bias, s_prev, T, constant=constant,
                                       delay=network.synaptic_delay, threads=network.threads,
                                       stride=layer.stride, padding=layer.padding)
        constant = False
    return c_prev


# ═════════════════════════════════════════════════════════════════════
#  4. Construction
# ═════════════════════════════════════════════════════════════════════

_CONV_TOKEN = re.compile(r"^C(\d+)x(\d+)s(\d+)x(\d+)(?:p(\d+))?$")
_FC_TOKEN = re.compile(r"^fc-(\d+)$")


@dataclass(frozen=True)
class LayerSpec:
    kind: LayerKind
    units: int
    kh: int = 0
    kw: int = 0
    stride: int = 1
    padding: int = 0


@dataclass(frozen=True)
class ArchSpec:
    family: str
    layers: tuple
    input_features: int | None = None


def parse_arch(arch: str) -> ArchSpec:
    """
    "fc:784-300-10"                          first number is the input width
    "conv:C3x3s1x32,C3x3s2x64,fc-256,fc-10"  C<kh>x<kw>s<stride>x<filters>[p<pad>]
    """
    text = (arch or "").strip()
    family, sep, body = text.partition(":")
    if not sep or not body:
        raise ConfigError(f"malformed arch string {arch!r}")

    if family == "fc":
        try:
            sizes = [int(tok) for tok in body.split("-")]
        except ValueError:
            raise ConfigError(f"malformed fc arch {arch!r}") from None
        if len(sizes) < 2 or min(sizes) < 1:
            raise ConfigError(f"fc arch needs an input width and at least one layer: {arch!r}")
        return ArchSpec("fc", tuple(LayerSpec(LayerKind.DENSE, n) for n in sizes[1:]), sizes[0])

    if family == "conv":
        specs, seen_fc = [], False
        for tok in (t.strip() for t in body.split(",")):
            conv = _CONV_TOKEN.match(tok)
            fc = _FC_TOKEN.match(tok)
            if conv and not seen_fc:
                kh, kw, stride, filters = (int(v) for v in conv.groups()[:4])
                pad = int(conv.group(5)) if conv.group(5) is not None else kh // 2
                if min(kh, kw, stride, filters) < 1:
                    raise ConfigError(f"conv token {tok!r} has a zero dimension")
                specs.append(LayerSpec(LayerKind.CONV, filters, kh, kw, stride, pad))
            elif fc and int(fc.group(1)) >= 1:
                seen_fc = True
                specs.append(LayerSpec(LayerKind.DENSE, int(fc.group(1))))
            else:
                raise ConfigError(f"bad token {tok!r} in arch {arch!r}")
        if not seen_fc:
            raise ConfigError(f"conv arch must end in an fc output layer: {arch!r}")
        return ArchSpec("conv", tuple(specs))

    raise ConfigError(f"unknown arch family {family!r} (expected fc or conv)")


def build_network(arch: str, input_shape=None, neuron: NeuronParams | None = None, T: int = config.DEFAULT_T,
                  decode="membrane", bn: bool = False, snn_stub: bool = False, synaptic_delay: bool = False,
                  threads: int = 1, seed: int | None = None) -> TandemNetwork:
    spec = parse_arch(arch)
    neuron = neuron or NeuronParams.from_kind("IF")

    if spec.family == "fc":
        if input_shape is not None and int(np.prod(input_shape)) != spec.input_features:
            raise ConfigError(f"arch {arch!r} expects {spec.input_features} input features, "
                              f"data provides {int(np.prod(input_shape))}")
        input_shape = tuple(input_shape) if input_shape is not None else (spec.input_features,)
    elif input_shape is None or len(input_shape) != 3:
        raise ConfigError(f"conv arch {arch!r} needs a C×H×W input shape, got {input_shape}")

    layers, shape = [], tuple(input_shape)
    last = len(spec.layers) - 1
    for i, ls in enumerate(spec.layers):
        hidden_bn = bn and i != last
        if ls.kind is LayerKind.CONV:
            geom = ConvGeometry(shape[0], shape[1], shape[2], ls.units, ls.kh, ls.kw, ls.stride, ls.padding)
            try:
                geom.output_shape
            except ShapeError as exc:
                raise ConfigError(f"arch {arch!r} layer {i}: {exc}") from None
            layer = TandemLayer.conv(geom, neuron, bn=hidden_bn, is_output=i == last)
        else:
            layer = TandemLayer.dense(int(np.prod(shape)), ls.units, neuron, bn=hidden_bn, is_output=i == last)
        layers.append(layer)
        shape = layer.output_shape

    network = TandemNetwork(layers=layers, T=T, decode_mode=decode, input_shape=input_shape, snn_stub=snn_stub,
                            synaptic_delay=synaptic_delay, threads=threads, arch=arch)
    if seed is not None:
        init_weights(network, seed)
    log.debug("Built %s: %d layers, input %s, T=%d", arch, len(layers), input_shape, T)
    return network


def init_weights(network: TandemNetwork, seed: int) -> None:
    """He-normal weights (std √(2/fan_in)), zero biases, identity BN; fully seeded."""
    rng = np.random.default_rng(seed)
    for layer in network.layers:
        layer.weights[...] = rng.normal(0.0, np.sqrt(2.0 / layer.fan_in), size=layer.weights.shape)
        layer.bias[...] = 0.0
        if layer.bn is not None:
            layer.bn = BatchNormState.identity(layer.bn.channels, layer.bn.epsilon)


def fold_network(network: TandemNetwork) -> None:
    for layer in network.layers:
        if layer.bn is not None:
            batchnorm_fold(layer)


def export_inference(network: TandemNetwork) -> TandemNetwork:
    """
    Independent copy with BN folded and parameters narrowed to f32, i.e. the
    network a checkpoint round trip yields.
    """
    exported = copy.deepcopy(network)
    fold_network(exported)
    for layer in exported.layers:
        layer.weights = layer.weights.astype(np.float32).astype(np.float64)
        layer.bias = layer.bias.astype(np.float32).astype(np.float64)
    return exported
