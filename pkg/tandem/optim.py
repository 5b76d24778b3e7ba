"""
tandemnet — Optimizers
SGD with classical momentum (default), Adam, and cosine learning-rate decay.

Updates are applied in place on the layer arrays, so the SNN and ANN paths
both see them on the next forward pass. Weight decay applies to weights only.
A gradient set with any non-finite entry is refused before anything changes.
"""

import math

import numpy as np

import config
from tandem.errors import NumericError, ParameterError
from tandem.network import GradientSet, TandemNetwork
from utils.logging_config import get_logger

log = get_logger("optim")


def _paired(network: TandemNetwork, grads: GradientSet) -> list[tuple[str, np.ndarray, np.ndarray]]:
    params = dict(network.param_items())
    pairs = []
    for key, g in grads.items():
        if key not in params or params[key].shape != g.shape:
            raise ParameterError(f"gradient {key} does not match the network parameters")
        pairs.append((key, params[key], g))
    return pairs


def _check_finite(grads: GradientSet) -> None:
    if not grads.is_finite():
        log.warning("Optimizer step refused: non-finite gradient")
        raise NumericError("non-finite gradient; optimizer step refused")


def sgd_step(network: TandemNetwork, grads: GradientSet, lr: float, momentum: float = 0.0,
             weight_decay: float = 0.0, velocity: dict | None = None) -> None:
    """
    v ← μ·v + g (+ λ·w for weights);  w ← w − lr·v.
    `velocity` holds the momentum buffers between calls and is required when
    momentum is non-zero.
    """
    if momentum and velocity is None:
        raise ParameterError("momentum needs a velocity dict to carry its buffers between steps")
    _check_finite(grads)
    for key, param, g in _paired(network, grads):
        step = g + weight_decay * param if key.endswith(".weights") and weight_decay else g
        if momentum:
            buf = velocity.get(key)
            buf = step.copy() if buf is None else momentum * buf + step
            velocity[key] = buf
            step = buf
        param -= lr * step


class SGD:
    def __init__(self, network: TandemNetwork, lr: float = config.DEFAULT_LR,
                 momentum: float = config.DEFAULT_MOMENTUM, weight_decay: float = config.DEFAULT_WEIGHT_DECAY):
        if lr < 0 or not 0 <= momentum < 1 or weight_decay < 0:
            raise ParameterError(f"invalid SGD hyperparameters lr={lr} momentum={momentum} wd={weight_decay}")
        self.network = network
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, grads: GradientSet) -> None:
        sgd_step(self.network, grads, self.lr, self.momentum, self.weight_decay, self.velocity)


class Adam:
    def __init__(self, network: TandemNetwork, lr: float = 1e-3, betas: tuple = config.ADAM_BETAS,
                 eps: float = config.ADAM_EPS, weight_decay: float = 0.0):
        if lr < 0 or not all(0 <= b < 1 for b in betas) or eps <= 0 or weight_decay < 0:
            raise ParameterError(f"invalid Adam hyperparameters lr={lr} betas={betas} eps={eps}")
        self.network = network
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, grads: GradientSet) -> None:
        _check_finite(grads)
        b1, b2 = self.betas
        self.t += 1
        for key, param, g in _paired(self.network, grads):
            if key.endswith(".weights") and self.weight_decay:
                g = g + self.weight_decay * param
            m = self.m.get(key, np.zeros_like(g))
            v = self.v.get(key, np.zeros_like(g))
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            self.m[key], self.v[key] = m, v
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def cosine_lr(base_lr: float, epoch: int, epochs: int) -> float:
    """Learning rate for a 0-based epoch under half-cosine decay to zero."""
    if epochs < 1:
        raise ParameterError(f"epochs must be positive, got {epochs}")
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * epoch / epochs))


def make_optimizer(name: str, network: TandemNetwork, lr: float, momentum: float, weight_decay: float):
    name = name.lower()
    if name == "sgd":
        return SGD(network, lr=lr, momentum=momentum, weight_decay=weight_decay)
    if name == "adam":
        return Adam(network, lr=lr, weight_decay=weight_decay)
    raise ParameterError(f"unknown optimizer {name!r} (expected sgd or adam)")
