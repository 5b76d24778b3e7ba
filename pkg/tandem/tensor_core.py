"""
tandemnet — Tensor Core
Dense numeric kernels every other module is built on: matrix multiply,
strided 2-D convolution (cross-correlation, zero padding) and its adjoints,
reductions, finiteness checks and the sample-axis thread splitter. Every
kernel raises NumericError instead of returning a non-finite result.

Tensors are float64 numpy arrays in row-major (C) order. 32-bit inputs are
promoted before any accumulation.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

from tandem.errors import NumericError, ShapeError

R = TypeVar("R")


def as_tensor(x) -> np.ndarray:
    """Return x as a C-contiguous float64 array (no copy when it already is one)."""
    return np.ascontiguousarray(x, dtype=np.float64)


def ensure_finite(x: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        bad = int(np.size(x) - np.count_nonzero(np.isfinite(x)))
        raise NumericError(f"{what}: {bad} non-finite value(s)")
    return x


# ═════════════════════════════════════════════════════════════════════
#  1. Matrix multiply and reductions
# ═════════════════════════════════════════════════════════════════════
def matmul(a, b) -> np.ndarray:
    """[m×k] · [k×n] → [m×n]."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} × {b.shape}")
    return ensure_finite(a @ b, "matmul")


def reduce_sum(t, axis: int) -> np.ndarray:
    t = as_tensor(t)
    if not isinstance(axis, (int, np.integer)) or not 0 <= axis < t.ndim:
        raise ShapeError(f"axis {axis} out of range for rank-{t.ndim} tensor")
    return ensure_finite(np.sum(t, axis=int(axis)), "reduce_sum")


# ═════════════════════════════════════════════════════════════════════
#  2. Convolution
# ═════════════════════════════════════════════════════════════════════
def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    if stride < 1 or padding < 0:
        raise ShapeError(f"invalid stride {stride} / padding {padding}")
    if size + 2 * padding < k:
        raise ShapeError(f"kernel {k} larger than padded input {size + 2 * padding}")
    return (size + 2 * padding - k) // stride + 1


def _check_conv(input_shape, kernel_shape, stride, padding):
    if len(input_shape) != 4 or len(kernel_shape) != 4:
        raise ShapeError(f"conv2d expects N×C×H×W input and F×C×kh×kw kernel, "
                         f"got {tuple(input_shape)} and {tuple(kernel_shape)}")
    if input_shape[1] != kernel_shape[1]:
        raise ShapeError(f"channel mismatch: input C={input_shape[1]}, kernel C={kernel_shape[1]}")
    h_out = conv_output_size(input_shape[2], kernel_shape[2], stride, padding)
    w_out = conv_output_size(input_shape[3], kernel_shape[3], stride, padding)
    return h_out, w_out


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)), mode="constant")


def conv2d(input, kernel, stride: int = 1, padding: int = 0) -> np.ndarray:
    """
    Strided 2-D cross-correlation with zero padding.
    Accumulates one kernel offset at a time, offsets in row-major order.
    """
    x = as_tensor(input)
    w = as_tensor(kernel)
    h_out, w_out = _check_conv(x.shape, w.shape, stride, padding)
    n, _, _, _ = x.shape
    f, _, kh, kw = w.shape
    xp = _pad(x, padding)

    out = np.zeros((n, h_out, w_out, f))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i:i + stride * (h_out - 1) + 1:stride, j:j + stride * (w_out - 1) + 1:stride]
            out += np.tensordot(patch, w[:, :, i, j], axes=([1], [1]))
    return ensure_finite(np.ascontiguousarray(out.transpose(0, 3, 1, 2)), "conv2d")


def conv2d_grad_input(grad_out, kernel, input_shape, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Adjoint of conv2d with respect to its input."""
    g = as_tensor(grad_out)
    w = as_tensor(kernel)
    h_out, w_out = _check_conv(input_shape, w.shape, stride, padding)
    if g.shape != (input_shape[0], w.shape[0], h_out, w_out):
        raise ShapeError(f"grad_out shape {g.shape} does not match conv output "
                         f"{(input_shape[0], w.shape[0], h_out, w_out)}")
    n, c, h, wd = input_shape
    _, _, kh, kw = w.shape

    dxp = np.zeros((n, c, h + 2 * padding, wd + 2 * padding))
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(g, w[:, :, i, j], axes=([1], [0]))  # N×Ho×Wo×C
            dxp[:, :, i:i + stride * (h_out - 1) + 1:stride, j:j + stride * (w_out - 1) + 1:stride] += \
                contrib.transpose(0, 3, 1, 2)
    if padding:
        dxp = dxp[:, :, padding:-padding, padding:-padding]
    return ensure_finite(np.ascontiguousarray(dxp), "conv2d input gradient")


def conv2d_grad_kernel(input, grad_out, kernel_shape, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Adjoint of conv2d with respect to its kernel."""
    x = as_tensor(input)
    g = as_tensor(grad_out)
    h_out, w_out = _check_conv(x.shape, kernel_shape, stride, padding)
    f, c, kh, kw = kernel_shape
    if g.shape != (x.shape[0], f, h_out, w_out):
        raise ShapeError(f"grad_out shape {g.shape} does not match conv output "
                         f"{(x.shape[0], f, h_out, w_out)}")
    xp = _pad(x, padding)

    dw = np.zeros((f, c, kh, kw))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i:i + stride * (h_out - 1) + 1:stride, j:j + stride * (w_out - 1) + 1:stride]
            dw[:, :, i, j] = np.tensordot(g, patch, axes=([0, 2, 3], [0, 2, 3]))
    return ensure_finite(dw, "conv2d kernel gradient")


# ═════════════════════════════════════════════════════════════════════
#  3. Sample-axis parallelism
# ═════════════════════════════════════════════════════════════════════
def sample_chunks(n: int, threads: int) -> list[tuple[int, int]]:
    """Contiguous [start, stop) ranges covering 0..n, at most `threads` of them."""
    k = max(1, min(int(threads), n))
    bounds = np.linspace(0, n, k + 1).astype(int)
    return [(int(bounds[i]), int(bounds[i + 1])) for i in range(k) if bounds[i + 1] > bounds[i]]


def map_samples(fn: Callable[[int, int], R], n: int, threads: int = 1) -> list[R]:
    """
    Evaluate fn(start, stop) over contiguous sample chunks and return the
    results in chunk order. threads == 1 runs inline.
    """
    chunks = sample_chunks(n, threads)
    if len(chunks) <= 1:
        return [fn(0, n)]
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        futures = [pool.submit(fn, start, stop) for start, stop in chunks]
        return [fut.result() for fut in futures]
