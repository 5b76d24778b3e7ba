"""
tandemnet — Representation Fidelity
How closely the ANN twin tracks the SNN it shares weights with.

  • cosine angle between SNN counts c^l and ANN outputs a^l (per sample)
  • Pearson correlation between W^{l+1}·c^l and W^{l+1}·a^l (per sample)
  • layer mismatch: mean |c_snn − a_ann| with the ANN run as a pure cascade
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

import config
from tandem.errors import UndefinedMetricError
from tandem.network import TandemNetwork, forward_tandem
from tandem.neuron_sim import synaptic_current
from utils.logging_config import get_logger

log = get_logger("fidelity")


def cosine_angle(c, a) -> float:
    """
    Angle in degrees between two non-zero vectors, as 2·atan2(|ĉ − â|, |ĉ + â|)
    which stays accurate near 0° and 180°.
    """
    c = np.asarray(c, dtype=np.float64).ravel()
    a = np.asarray(a, dtype=np.float64).ravel()
    nc, na = np.linalg.norm(c), np.linalg.norm(a)
    if nc == 0.0 or na == 0.0:
        raise UndefinedMetricError("angle undefined for a zero vector")
    uc, ua = c / nc, a / na
    return float(np.degrees(2.0 * np.arctan2(np.linalg.norm(uc - ua), np.linalg.norm(uc + ua))))


def pearson_dot(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(np.dot(dx, dx)), np.sqrt(np.dot(dy, dy))
    if sx == 0.0 or sy == 0.0:
        raise UndefinedMetricError("correlation undefined for a constant vector")
    return float(np.clip(np.dot(dx, dy) / (sx * sy), -1.0, 1.0))


@dataclass
class FidelityResult:
    frame: pd.DataFrame          # sample, layer, angle, pcc (NaN where undefined)
    skipped_angle: int
    skipped_pcc: int

    def summary(self) -> pd.DataFrame:
        grouped = self.frame.groupby("layer")
        out = pd.DataFrame({"mean_angle": grouped["angle"].mean(), "median_pcc": grouped["pcc"].median()})
        return out.reset_index()


def fidelity_analysis(network: TandemNetwork, batch) -> FidelityResult:
    """Angles and correlations for every hidden layer that feeds another layer."""
    trace = forward_tandem(network, batch, mode="tandem", keep_spikes=False)
    rows, skipped_angle, skipped_pcc = [], 0, 0
    for idx in range(len(network.layers) - 1):
        lt, nxt = trace.layers[idx], network.layers[idx + 1]
        w, _ = nxt.snn_params()
        zero_bias = np.zeros(w.shape[0])
        wc = synaptic_current(w, zero_bias, lt.counts, nxt.stride, nxt.padding)
        wa = synaptic_current(w, zero_bias, lt.a, nxt.stride, nxt.padding)
        for s in range(trace.n_samples):
            try:
                angle = cosine_angle(lt.counts[s], lt.a[s])
            except UndefinedMetricError:
                angle, skipped_angle = np.nan, skipped_angle + 1
            try:
                pcc = pearson_dot(wc[s], wa[s])
            except UndefinedMetricError:
                pcc, skipped_pcc = np.nan, skipped_pcc + 1
            rows.append({"sample": s, "layer": idx + 1, "angle": angle, "pcc": pcc})
    if skipped_angle or skipped_pcc:
        log.info("Fidelity: skipped %d zero-vector angles and %d constant-vector correlations",
                 skipped_angle, skipped_pcc)
    frame = pd.DataFrame(rows, columns=["sample", "layer", "angle", "pcc"])
    return FidelityResult(frame=frame, skipped_angle=skipped_angle, skipped_pcc=skipped_pcc)


def histogram_frame(frame: pd.DataFrame, column: str, bins: int, lo: float, hi: float) -> pd.DataFrame:
    """Per-layer histogram of one metric column: layer, bin_lo, bin_hi, count."""
    edges = np.linspace(lo, hi, bins + 1)
    rows = []
    for layer, group in frame.groupby("layer"):
        counts, _ = np.histogram(group[column].dropna().to_numpy(), bins=edges)
        rows.extend({"layer": layer, "bin_lo": edges[i], "bin_hi": edges[i + 1], "count": int(counts[i])}
                    for i in range(bins))
    return pd.DataFrame(rows, columns=["layer", "bin_lo", "bin_hi", "count"])


def angle_histogram(frame: pd.DataFrame, bins: int = config.ANGLE_BINS) -> pd.DataFrame:
    return histogram_frame(frame, "angle", bins, 0.0, 180.0)


def pcc_histogram(frame: pd.DataFrame, bins: int = config.PCC_BINS) -> pd.DataFrame:
    return histogram_frame(frame, "pcc", bins, -1.0, 1.0)


# ─── Layer mismatch ──────────────────────────────────────────────────

def layer_mismatch_per_sample(network: TandemNetwork, batch) -> np.ndarray:
    """(N, hidden layers) mean |c_snn − a_ann| with the ANN chained on its own outputs."""
    snn = forward_tandem(network, batch, mode="tandem", keep_spikes=False)
    ann = forward_tandem(network, batch, mode="ann", keep_spikes=False)
    cols = []
    for lt_snn, lt_ann in zip(snn.layers[:-1], ann.layers[:-1]):
        diff = np.abs(lt_snn.counts - lt_ann.a)
        cols.append(diff.reshape(diff.shape[0], -1).mean(axis=1))
    n = snn.n_samples
    return np.stack(cols, axis=1) if cols else np.zeros((n, 0))


def layer_mismatch(network: TandemNetwork, batch) -> np.ndarray:
    """Per hidden layer, mean over samples and neurons of |c_snn − a_ann|."""
    per_sample = layer_mismatch_per_sample(network, batch)
    return per_sample.mean(axis=0)


def mismatch_growth_fraction(per_sample) -> float:
    """Share of samples whose mismatch never decreases from one layer to the next."""
    m = np.asarray(per_sample, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise UndefinedMetricError("mismatch growth needs a non-empty (samples, layers) array")
    return float(np.mean(np.all(np.diff(m, axis=1) >= 0.0, axis=1)))
