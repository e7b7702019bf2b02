"""Differentiable 1-D layers on ``(batch, channel, length)`` tensors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .autodiff import Tensor, add, as_tensor, record

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


# -- raw kernels shared by conv1d and conv1d_transpose -----------------------

def _conv_forward(x: np.ndarray, w: np.ndarray, stride: int, padding: int) -> np.ndarray:
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    cout, _, k = w.shape
    if cout <= 4:
        # few output channels: k shifted matmuls beat building the im2col matrix
        lout = (x.shape[2] - k) // stride + 1
        span = stride * (lout - 1) + 1
        out = w[:, :, 0] @ x[:, :, 0:span:stride]
        for j in range(1, k):
            out += w[:, :, j] @ x[:, :, j:j + span:stride]
        return out
    win = sliding_window_view(x, k, axis=2)[:, :, ::stride, :]
    out = np.tensordot(win, w, axes=([1, 3], [1, 2]))  # (B, Lout, Cout)
    return np.ascontiguousarray(out.transpose(0, 2, 1))


def _conv_grad_input(g: np.ndarray, w: np.ndarray, length: int, stride: int,
                     padding: int) -> np.ndarray:
    """Adjoint of :func:`_conv_forward` with respect to its input."""
    # full correlation of the stride-dilated gradient with the flipped kernel
    batch, cout, lout = g.shape
    k = w.shape[2]
    padded_len = length + 2 * padding
    dilated = stride * (lout - 1) + 1
    right = max(padded_len - dilated, k - 1)
    gd = np.zeros((batch, cout, (k - 1) + dilated + right))
    gd[:, :, k - 1:k - 1 + dilated:stride] = g
    xp = _conv_forward(gd, w[:, :, ::-1].transpose(1, 0, 2), 1, 0)[:, :, :padded_len]
    return xp[:, :, padding:padding + length] if padding else xp


def _conv_grad_weight(g: np.ndarray, x: np.ndarray, k: int, stride: int,
                      padding: int) -> np.ndarray:
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding)))
    lout = g.shape[2]
    span = stride * (lout - 1) + 1
    if g.shape[1] <= 4:
        return np.stack([np.einsum("bol,bcl->oc", g, x[:, :, j:j + span:stride])
                         for j in range(k)], axis=2)
    g2 = g.transpose(1, 0, 2).reshape(g.shape[1], -1)  # (Cout, B*Lout)
    cols = [x[:, :, j:j + span:stride].transpose(1, 0, 2).reshape(x.shape[1], -1)
            for j in range(k)]
    return np.stack([g2 @ c.T for c in cols], axis=2)  # (Cout, Cin, k)


def _check_conv_shapes(x: Tensor, w: Tensor, channel_axis: int, what: str) -> None:
    if x.ndim != 3 or w.ndim != 3:
        raise ValueError(f"{what}: expected 3-D input and weight, got input {x.shape} "
                         f"and weight {w.shape}")
    if x.shape[1] != w.shape[channel_axis]:
        raise ValueError(f"{what}: input {x.shape} has {x.shape[1]} channels but weight "
                         f"{w.shape} expects {w.shape[channel_axis]}")


def _add_bias(out: Tensor, bias: Tensor | None) -> Tensor:
    if bias is None:
        return out
    bias = as_tensor(bias)
    return add(out, bias.reshape((1, -1, 1)))


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1,
           padding: int = 0) -> Tensor:
    """Cross-correlation with weight ``(out_ch, in_ch, k)`` and zero padding."""
    x, weight = as_tensor(x), as_tensor(weight)
    _check_conv_shapes(x, weight, 1, "conv1d")
    if stride < 1 or padding < 0:
        raise ValueError(f"conv1d: bad stride={stride} / padding={padding}")
    k, length = weight.shape[2], x.shape[2]
    if length + 2 * padding < k:
        raise ValueError(f"conv1d: input {x.shape} shorter than kernel {weight.shape}")

    def bwd(g):
        gx = _conv_grad_input(g, weight.data, length, stride, padding) if x.requires_grad else None
        gw = _conv_grad_weight(g, x.data, k, stride, padding) if weight.requires_grad else None
        return gx, gw

    out = record("conv1d", (x, weight), _conv_forward(x.data, weight.data, stride, padding), bwd)
    return _add_bias(out, bias)


def conv1d_transpose(x: Tensor, weight: Tensor, bias: Tensor | None = None,
                     stride: int = 1) -> Tensor:
    """Transposed convolution with weight ``(in_ch, out_ch, k)``.

    Output length is ``(length - 1) * stride + k``; the forward map is the
    input-gradient of :func:`conv1d` with the same weight and stride.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    _check_conv_shapes(x, weight, 0, "conv1d_transpose")
    if stride < 1:
        raise ValueError(f"conv1d_transpose: bad stride={stride}")
    k = weight.shape[2]
    out_len = (x.shape[2] - 1) * stride + k

    def bwd(g):
        gx = _conv_forward(g, weight.data, stride, 0) if x.requires_grad else None
        gw = _conv_grad_weight(x.data, g, k, stride, 0) if weight.requires_grad else None
        return gx, gw

    out = record("conv1d_transpose", (x, weight),
                 _conv_grad_input(x.data, weight.data, out_len, stride, 0), bwd)
    return _add_bias(out, bias)


@dataclass
class RunningStats:
    """Per-channel running mean/variance of a batch-norm layer."""

    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def fresh(cls, channels: int) -> "RunningStats":
        return cls(np.zeros(channels), np.ones(channels))


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, stats: RunningStats | None = None,
               training: bool = True, momentum: float = BN_MOMENTUM,
               eps: float = BN_EPS) -> Tensor:
    """Per-channel normalization over the batch and length axes.

    In training mode the batch statistics are used and ``stats`` (if given)
    is updated in place by an exponential moving average.  ``eps`` floors the
    variance so constant channels map to ``beta`` instead of dividing by zero.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim != 3 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ValueError(f"batch_norm: input {x.shape} vs gamma {gamma.shape} / beta {beta.shape}")
    axes = (0, 2)
    n = x.shape[0] * x.shape[2]
    if training:
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        if stats is not None:
            stats.mean[:] = (1 - momentum) * stats.mean + momentum * mu
            unbiased = var * n / (n - 1) if n > 1 else var
            stats.var[:] = (1 - momentum) * stats.var + momentum * unbiased
    else:
        if stats is None:
            raise ValueError("batch_norm: eval mode needs running stats")
        mu, var = stats.mean, stats.var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu[None, :, None]) * inv[None, :, None]
    out = gamma.data[None, :, None] * xhat + beta.data[None, :, None]

    def bwd(g):
        dgamma = (g * xhat).sum(axis=axes)
        dbeta = g.sum(axis=axes)
        dxhat = g * gamma.data[None, :, None]
        if training:
            s1 = dxhat.sum(axis=axes, keepdims=True)
            s2 = (dxhat * xhat).sum(axis=axes, keepdims=True)
            dx = inv[None, :, None] / n * (n * dxhat - s1 - xhat * s2)
        else:
            dx = dxhat * inv[None, :, None]
        return dx, dgamma, dbeta

    return record("batch_norm", (x, gamma, beta), out, bwd)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return record("relu", (x,), x.data * mask, lambda g: (g * mask,))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    if not 0 < slope < 1:
        raise ValueError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    x = as_tensor(x)
    scale = np.where(x.data > 0, 1.0, slope)
    return record("leaky_relu", (x,), x.data * scale, lambda g: (g * scale,))


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    # two-branch form avoids overflow in exp for large |x|
    z = np.exp(-np.abs(x.data))
    s = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
    return record("sigmoid", (x,), s, lambda g: (g * s * (1.0 - s),))


def activation(kind: str, x: Tensor, slope: float = 0.2) -> Tensor:
    if kind == "relu":
        return relu(x)
    if kind == "leaky_relu":
        return leaky_relu(x, slope)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation {kind!r}")


def fully_connected(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map of the flattened per-sample input; weight is ``(out, features)``."""
    x, weight = as_tensor(x), as_tensor(weight)
    flat = x.reshape((x.shape[0], -1))
    if weight.ndim != 2 or weight.shape[1] != flat.shape[1]:
        raise ValueError(f"fully_connected: input {x.shape} ({flat.shape[1]} features) "
                         f"does not match weight {weight.shape}")

    def bwd(g):
        gx = g @ weight.data if flat.requires_grad else None
        gw = g.T @ flat.data if weight.requires_grad else None
        return gx, gw

    out = record("fully_connected", (flat, weight), flat.data @ weight.data.T, bwd)
    if bias is not None:
        out = add(out, bias)
    return out


def max_pool1d(x: Tensor, k: int = 3, s: int = 1) -> Tensor:
    """Sliding-window maximum over the last axis with replicate-edge padding.

    The input is padded by ``(k - 1) // 2`` samples on the left and the rest
    of ``k - 1`` on the right, so stride 1 preserves length.  Works on any
    leading shape.  Gradients go to the first argmax of each window.
    """
    x = as_tensor(x)
    if k < 1 or s < 1:
        raise ValueError(f"max_pool1d: bad kernel {k} / stride {s}")
    length = x.shape[-1]
    left = (k - 1) // 2
    right = k - 1 - left
    if length + left + right < k or length == 0:
        raise ValueError(f"max_pool1d: kernel {k} larger than padded length {length + k - 1}")
    pad_width = [(0, 0)] * (x.ndim - 1) + [(left, right)]
    xp = np.pad(x.data, pad_width, mode="edge")
    win = sliding_window_view(xp, k, axis=-1)[..., ::s, :]
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    # source index in the unpadded signal of every window maximum
    starts = np.arange(out.shape[-1]) * s
    src = np.clip(starts + arg - left, 0, length - 1)

    def bwd(g):
        flat_g = g.reshape(-1, g.shape[-1])
        flat_src = src.reshape(-1, src.shape[-1])
        gx = np.zeros((flat_g.shape[0], length))
        rows = np.repeat(np.arange(flat_g.shape[0]), flat_g.shape[1])
        np.add.at(gx, (rows, flat_src.ravel()), flat_g.ravel())
        return (gx.reshape(x.shape),)

    return record("max_pool1d", (x,), out, bwd)


def residual_block(x: Tensor, params: dict[str, Tensor], stats: dict[str, RunningStats],
                   training: bool = True, prefix: str = "") -> Tensor:
    """conv -> BN -> ReLU -> conv -> BN, plus the identity skip.

    ``params`` holds ``{prefix}conv1.weight``, ``{prefix}conv1.bias``,
    ``{prefix}bn1.gamma``, ``{prefix}bn1.beta`` and the same for
    ``conv2``/``bn2``; the kernels must be odd so same-padding keeps the length.
    """
    h = x
    for i in (1, 2):
        w = params[f"{prefix}conv{i}.weight"]
        k = w.shape[2]
        if k % 2 == 0 or w.shape[0] != w.shape[1]:
            raise ValueError(f"residual block {prefix!r}: conv{i} weight {w.shape} would "
                             "change the signal shape (needs in=out channels and odd k)")
        h = conv1d(h, w, params[f"{prefix}conv{i}.bias"], 1, k // 2)
        h = batch_norm(h, params[f"{prefix}bn{i}.gamma"], params[f"{prefix}bn{i}.beta"],
                       stats.get(f"{prefix}bn{i}"), training)
        if i == 1:
            h = relu(h)
    return add(x, h)
