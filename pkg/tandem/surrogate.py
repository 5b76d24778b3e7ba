"""
tandemnet — Surrogate Activations
Analog functions that approximate the spike count of an IF / LIF neuron driven
by a constant current over a window of T steps, and their exact derivatives.

  IF :  a = ReLU(z) / θ
  LIF:  a = (T/τ_m) / ln(1 + θ / ρ_s(i − θ)),   i = z / T,  ρ_s = softplus

Activations are not clamped at T; the SNN path enforces the physical bound.
"""

import numpy as np

from tandem.errors import ParameterError
from tandem.neuron_sim import NeuronKind, NeuronParams
from tandem.tensor_core import as_tensor

_LOG_FLOOR = -700.0  # below this softplus(x) == exp(x) to double precision


def softplus(x) -> np.ndarray:
    """ρ_s(x) = ln(1 + eˣ), overflow-free."""
    return np.logaddexp(0.0, as_tensor(x))


def sigmoid(x) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * as_tensor(x)))


def _log_softplus(x: np.ndarray) -> np.ndarray:
    """ln ρ_s(x), exact in the far negative tail where ρ_s underflows."""
    clipped = np.maximum(x, _LOG_FLOOR)
    return np.where(x < _LOG_FLOOR, x, np.log(softplus(clipped)))


def constant_current(z, T) -> np.ndarray:
    """Per-step current equivalent to an aggregate drive z over T steps."""
    if T <= 0:
        raise ParameterError(f"encoding window T must be positive, got {T}")
    return as_tensor(z) / T


# ─── IF ──────────────────────────────────────────────────────────────

def if_activation(z, theta: float) -> np.ndarray:
    return np.maximum(as_tensor(z), 0.0) / theta


def if_activation_grad(z, theta: float) -> np.ndarray:
    """1/θ on the positive side, 0 elsewhere (including the kink)."""
    return np.where(as_tensor(z) > 0.0, 1.0 / theta, 0.0)


# ─── LIF ─────────────────────────────────────────────────────────────

def _lif_terms(i_c, theta):
    x = as_tensor(i_c) - theta
    log_g = _log_softplus(x)
    log_ratio = np.log(theta) - log_g
    L = np.logaddexp(0.0, log_ratio)          # ln(1 + θ/g)
    return x, log_g, L


def lif_activation(i_c, theta: float, tau_m: float, T) -> np.ndarray:
    _, _, L = _lif_terms(i_c, theta)
    return (T / tau_m) / L


def lif_activation_grad(i_c, theta: float, tau_m: float, T) -> np.ndarray:
    """
    da/di = (T/τ_m) · θ·σ(x) / (L² · (g² + θ·g)),  x = i − θ, g = ρ_s(x).
    σ/g is formed in log space so the tail x → −∞ stays finite (σ/g → 1).
    """
    x, log_g, L = _lif_terms(i_c, theta)
    g = np.exp(log_g)
    sig_over_g = np.exp(-softplus(-x) - log_g)
    return (T / tau_m) * theta * sig_over_g / (L * L * (g + theta))


# ─── Dispatch on neuron kind ─────────────────────────────────────────

def activate(z, neuron: NeuronParams, T) -> np.ndarray:
    """Predicted spike count for aggregate drive z."""
    if neuron.kind is NeuronKind.IF:
        return if_activation(z, neuron.theta)
    return lif_activation(constant_current(z, T), neuron.theta, neuron.tau_m, T)


def activate_grad(z, neuron: NeuronParams, T) -> np.ndarray:
    """d activate / d z."""
    if neuron.kind is NeuronKind.IF:
        return if_activation_grad(z, neuron.theta)
    return lif_activation_grad(constant_current(z, T), neuron.theta, neuron.tau_m, T) / T
