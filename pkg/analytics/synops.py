"""
tandemnet — Synaptic Operations
Event-driven cost of the SNN against the dense cost of the same ANN.

  SNN SynOps = Σ_t Σ_{hidden l} Σ_j f_out(j, l) · s_j^l[t]
             = Σ_{hidden l} Σ_j f_out(j, l) · c_j^l
  ANN SynOps = Σ_l f_in^l · N^l

Dense fan-out is the next layer's width. Conv fan-out is the exact number of
next-layer receptive fields covering a position (boundaries included), times
the filter count. Input injection and the output layer are not counted.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from tandem.errors import UndefinedMetricError
from tandem.network import ForwardTrace, LayerKind, TandemNetwork
from tandem.tensor_core import conv2d_grad_input
from utils.logging_config import get_logger

log = get_logger("synops")


@dataclass
class SynOpsReport:
    snn_total: float                  # per sample
    ann_total: int                    # per sample
    ratio: float
    per_layer_rate: list[float] = field(default_factory=list)
    per_layer_synops: list[float] = field(default_factory=list)
    T: int = 0
    n_samples: int = 0

    def to_frame(self) -> pd.DataFrame:
        rows = [{"T": self.T, "layer": "all", "metric": "snn_synops", "value": self.snn_total},
                {"T": self.T, "layer": "all", "metric": "ann_synops", "value": float(self.ann_total)},
                {"T": self.T, "layer": "all", "metric": "synops_ratio", "value": self.ratio}]
        for i, (rate, ops) in enumerate(zip(self.per_layer_rate, self.per_layer_synops), start=1):
            rows.append({"T": self.T, "layer": str(i), "metric": "spike_rate", "value": rate})
            rows.append({"T": self.T, "layer": str(i), "metric": "snn_synops", "value": ops})
        return pd.DataFrame(rows, columns=["T", "layer", "metric", "value"])


def fan_out_map(network: TandemNetwork, index: int) -> np.ndarray:
    """Outgoing connections of every neuron of layer `index`, shaped like its output."""
    layer = network.layers[index]
    nxt = network.layers[index + 1]
    if nxt.kind is LayerKind.DENSE:
        return np.full(layer.output_shape, float(nxt.weights.shape[0]))
    g = nxt.geometry
    ones_out = np.ones((1,) + g.output_shape)
    ones_kernel = np.ones(g.kernel_shape)
    return conv2d_grad_input(ones_out, ones_kernel, (1,) + g.input_shape, g.stride, g.padding)[0]


def _hidden_counts(trace: ForwardTrace) -> list[np.ndarray]:
    return [lt.counts for lt in trace.layers[:-1]]


def synops_per_layer(trace: ForwardTrace, network: TandemNetwork) -> list[float]:
    """Total SNN SynOps of each hidden layer over the whole batch."""
    totals = []
    for idx, counts in enumerate(_hidden_counts(trace)):
        fan_out = fan_out_map(network, idx)
        totals.append(float(np.sum(counts.reshape((counts.shape[0],) + fan_out.shape) * fan_out)))
    return totals


def synops_snn(trace: ForwardTrace, network: TandemNetwork) -> float:
    """Total SNN SynOps over the batch."""
    return float(sum(synops_per_layer(trace, network)))


def synops_ann(network: TandemNetwork) -> int:
    """Per-sample ANN SynOps from geometry alone."""
    return int(sum(layer.fan_in * layer.n_neurons for layer in network.layers))


def spike_rates(trace: ForwardTrace, network: TandemNetwork) -> list[float]:
    """Average spikes per neuron per step for each hidden layer."""
    return [float(c.sum()) / (trace.T * c.shape[0] * network.layers[i].n_neurons)
            for i, c in enumerate(_hidden_counts(trace))]


def synops_report(trace: ForwardTrace, network: TandemNetwork) -> SynOpsReport:
    n = trace.n_samples
    per_layer = [ops / n for ops in synops_per_layer(trace, network)]
    snn = float(sum(per_layer))
    ann = synops_ann(network)
    report = SynOpsReport(snn_total=snn, ann_total=ann, ratio=snn / ann if ann else 0.0,
                          per_layer_rate=spike_rates(trace, network), per_layer_synops=per_layer,
                          T=trace.T, n_samples=n)
    log.info("SynOps T=%d: snn=%.1f ann=%d ratio=%.4f", report.T, report.snn_total, report.ann_total, report.ratio)
    return report


def linear_fit_r2(xs, ys) -> float:
    """R² of a least-squares line through (xs, ys)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.size < 2:
        raise UndefinedMetricError("linear fit needs at least two paired points")
    slope, intercept = np.polyfit(xs, ys, 1)
    ss_res = float(np.sum((ys - (slope * xs + intercept)) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot
