"""
tandemnet — Batch Normalization
Per-channel BN on the per-step drive u = z/T of a hidden layer, with running
statistics, the exact backward pass and folding into the preceding weights.

Channel axis is 1 for both dense (N, F) and conv (N, F, H, W) drives.
"""

from dataclasses import dataclass

import numpy as np

import config
from tandem.errors import ShapeError, StateError


@dataclass
class BatchNormState:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = config.BN_EPSILON
    momentum: float = config.BN_MOMENTUM

    @classmethod
    def identity(cls, channels: int, epsilon: float = config.BN_EPSILON) -> "BatchNormState":
        return cls(gamma=np.ones(channels), beta=np.zeros(channels),
                   running_mean=np.zeros(channels), running_var=np.ones(channels), epsilon=epsilon)

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    def scale(self) -> np.ndarray:
        """γ / √(running_var + ε)."""
        return self.gamma / np.sqrt(self.running_var + self.epsilon)


@dataclass
class BNCache:
    xhat: np.ndarray
    inv_std: np.ndarray
    training: bool


def _axes(x: np.ndarray) -> tuple:
    return (0,) + tuple(range(2, x.ndim))


def _bcast(v: np.ndarray, x: np.ndarray) -> np.ndarray:
    return v.reshape((1, -1) + (1,) * (x.ndim - 2))


def batchnorm_forward_cached(x, bn: BatchNormState, training: bool) -> tuple[np.ndarray, BNCache]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[1] != bn.channels:
        raise ShapeError(f"batch norm over {bn.channels} channels got input {x.shape}")
    axes = _axes(x)
    if training:
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        bn.running_mean = bn.momentum * bn.running_mean + (1.0 - bn.momentum) * mean
        bn.running_var = bn.momentum * bn.running_var + (1.0 - bn.momentum) * var
    else:
        mean, var = bn.running_mean, bn.running_var
    inv_std = 1.0 / np.sqrt(var + bn.epsilon)
    xhat = (x - _bcast(mean, x)) * _bcast(inv_std, x)
    out = _bcast(bn.gamma, x) * xhat + _bcast(bn.beta, x)
    return out, BNCache(xhat=xhat, inv_std=inv_std, training=training)


def batchnorm_forward(x, bn: BatchNormState, training: bool) -> np.ndarray:
    return batchnorm_forward_cached(x, bn, training)[0]


def batchnorm_backward(dout, bn: BatchNormState, cache: BNCache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dgamma, dbeta)."""
    dout = np.asarray(dout, dtype=np.float64)
    axes = _axes(dout)
    xhat = cache.xhat
    dgamma = np.sum(dout * xhat, axis=axes)
    dbeta = np.sum(dout, axis=axes)
    dxhat = dout * _bcast(bn.gamma, dout)
    if not cache.training:
        return dxhat * _bcast(cache.inv_std, dout), dgamma, dbeta
    m = dout.size / dout.shape[1]
    sum_dxhat = _bcast(np.sum(dxhat, axis=axes), dout)
    sum_dxhat_xhat = _bcast(np.sum(dxhat * xhat, axis=axes), dout)
    dx = _bcast(cache.inv_std, dout) / m * (m * dxhat - sum_dxhat - xhat * sum_dxhat_xhat)
    return dx, dgamma, dbeta


def folded_params(weights: np.ndarray, bias: np.ndarray, bn: BatchNormState) -> tuple[np.ndarray, np.ndarray]:
    """W' = W·γ/σ and b' = (b − mean)·γ/σ + β along the output axis."""
    scale = bn.scale()
    w = weights * scale.reshape((-1,) + (1,) * (weights.ndim - 1))
    b = (bias - bn.running_mean) * scale + bn.beta
    return w, b


def batchnorm_fold(layer) -> None:
    """Absorb the layer's BN into its weights and drop it. Folding twice is an error."""
    if layer.bn is None:
        raise StateError("layer has no batch norm to fold (already folded?)")
    layer.weights, layer.bias = folded_params(layer.weights, layer.bias, layer.bn)
    layer.bn = None
