"""Convolution and normalization ops (NCHW layout) for the gradient tape.

Convolutions go through an im2col matrix so forward and both backward
products are single GEMMs; the scatter back (col2im) loops over kernel
taps in a fixed order, so results are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import NonPositiveEps, ShapeMismatch
from .tensor import Tensor


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """(N, C, Hp, Wp) -> (N*ho*wo, C*kh*kw)."""
    n, c = xp.shape[:2]
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)


def _col2im(cols: np.ndarray, padded_shape: tuple[int, ...], kh: int, kw: int,
            stride: int, ho: int, wo: int) -> np.ndarray:
    """Adjoint of ``_im2col``: scatter-add (N*ho*wo, C*kh*kw) back onto the padded input."""
    n, c = padded_shape[:2]
    cols = cols.reshape(n, ho, wo, c, kh, kw)
    out = np.zeros(padded_shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += (
                cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    return out


def _unpad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return x[:, :, padding:-padding, padding:-padding]


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation; ``weight`` is (C_out, C_in, kh, kw)."""
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(f"conv2d: input {x.shape} incompatible with weight {weight.shape}")
    n, c, h, w = x.shape
    o, _, kh, kw = weight.shape
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(w, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeMismatch(f"conv2d: kernel {kh}x{kw} larger than padded input {h}x{w}")
    if bias is not None and bias.shape != (o,):
        raise ShapeMismatch(f"conv2d: bias shape {bias.shape} != ({o},)")

    xp = _pad(x.data, padding)
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    wmat = weight.data.reshape(o, -1)
    out = (cols @ wmat.T).reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data.reshape(1, o, 1, 1)
    out = np.ascontiguousarray(out)

    def backward(g):
        gm = g.transpose(0, 2, 3, 1).reshape(-1, o)
        dx = dw = db = None
        if x.requires_grad:
            dx = _unpad(_col2im(gm @ wmat, xp.shape, kh, kw, stride, ho, wo), padding)
        if weight.requires_grad:
            dw = (gm.T @ cols).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            db = g.sum(axis=(0, 2, 3))
        return dx, dw, db

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, parents, backward)


def conv_transpose_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size - 1) * stride - 2 * padding + kernel


def conv2d_transpose(x: Tensor, weight: Tensor, bias: Tensor | None = None,
                     stride: int = 1, padding: int = 0) -> Tensor:
    """Adjoint of :func:`conv2d` w.r.t. its input; ``weight`` is (C_in, C_out, kh, kw).

    With the same weight array, ``<conv2d(u, k), v> == <u, conv2d_transpose(v, k)>``.
    """
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[0]:
        raise ShapeMismatch(
            f"conv2d_transpose: input {x.shape} incompatible with weight {weight.shape}"
        )
    n, cin, h, w = x.shape
    _, cout, kh, kw = weight.shape
    ho = conv_transpose_output_size(h, kh, stride, padding)
    wo = conv_transpose_output_size(w, kw, stride, padding)
    if ho < 1 or wo < 1:
        raise ShapeMismatch("conv2d_transpose: padding too large for output")
    if bias is not None and bias.shape != (cout,):
        raise ShapeMismatch(f"conv2d_transpose: bias shape {bias.shape} != ({cout},)")

    padded_shape = (n, cout, ho + 2 * padding, wo + 2 * padding)
    xm = x.data.transpose(0, 2, 3, 1).reshape(-1, cin)
    wmat = weight.data.reshape(cin, -1)
    out = _unpad(_col2im(xm @ wmat, padded_shape, kh, kw, stride, h, w), padding)
    if bias is not None:
        out = out + bias.data.reshape(1, cout, 1, 1)
    out = np.ascontiguousarray(out)

    def backward(g):
        cols = _im2col(_pad(g, padding), kh, kw, stride, h, w)
        dx = dw = db = None
        if x.requires_grad:
            dx = np.ascontiguousarray(
                (cols @ wmat.T).reshape(n, h, w, cin).transpose(0, 3, 1, 2)
            )
        if weight.requires_grad:
            dw = (xm.T @ cols).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            db = g.sum(axis=(0, 2, 3))
        return dx, dw, db

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, parents, backward)


def _normalize(x: Tensor, axes: tuple[int, ...], eps: float) -> Tensor:
    if eps <= 0:
        raise NonPositiveEps(f"eps must be positive, got {eps}")
    if x.ndim != 4:
        raise ShapeMismatch(f"normalization expects NCHW input, got {x.shape}")
    mu = x.data.mean(axis=axes, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=axes, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.dtype))
    xhat = centered * inv_std

    def backward(g):
        g_mean = g.mean(axis=axes, keepdims=True)
        gx_mean = (g * xhat).mean(axis=axes, keepdims=True)
        return (inv_std * (g - g_mean - xhat * gx_mean),)

    return Tensor._from_op(xhat, (x,), backward)


def instance_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel standardization over the spatial axes (no affine)."""
    return _normalize(x, (2, 3), eps)


def batch_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-channel standardization with current-batch statistics (no running stats)."""
    return _normalize(x, (0, 2, 3), eps)
