"""Neural-network kernels: convolution, pooling, resize, softmax, activations and norms.

Convolution is cross-correlation (no kernel flip) computed as im2col + matmul.
Standard, grouped, depthwise and dilated convolutions share one code path: the
im2col columns are viewed as ``groups`` independent blocks and multiplied by the
matching block of the kernel in a single batched matmul.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.special import erf, expit

from tensor import ops
from tensor.tensor import Function, ShapeError, Tensor, as_tensor

PoolKind = Literal["max", "avg"]
ResizeMode = Literal["nearest", "bilinear"]
ActivationKind = Literal["relu", "sigmoid", "gelu"]

_SQRT_2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of a 2-D convolution; ``kernel`` is (out_ch, in_ch/groups, kH, kW)."""

    kernel: tuple[int, int, int, int]
    stride: int = 1
    padding: int = 0
    dilation: int = 1
    groups: int = 1

    def validate(self, in_channels: int) -> None:
        out_ch, in_per_group, _, _ = self.kernel
        if self.groups < 1 or in_channels % self.groups or out_ch % self.groups:
            raise ShapeError(
                f"channels in={in_channels} out={out_ch} not divisible by groups={self.groups}"
            )
        if in_channels // self.groups != in_per_group:
            raise ShapeError(
                f"input has {in_channels} channels but kernel expects {in_per_group * self.groups}"
            )
        if self.dilation < 1 or self.stride < 1 or self.padding < 0:
            raise ShapeError(f"invalid stride/padding/dilation in {self}")

    def output_size(self, height: int, width: int) -> tuple[int, int]:
        _, _, kh, kw = self.kernel
        out_h = (height + 2 * self.padding - self.dilation * (kh - 1) - 1) // self.stride + 1
        out_w = (width + 2 * self.padding - self.dilation * (kw - 1) - 1) // self.stride + 1
        if out_h < 1 or out_w < 1:
            raise ShapeError(f"non-positive output extent ({out_h}, {out_w}) for input ({height}, {width})")
        return out_h, out_w


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, dilation: int, out_hw: tuple[int, int]) -> np.ndarray:
    """Gather sliding patches of an already padded input into (B, C*kh*kw, H_out*W_out)."""
    batch, channels = x.shape[:2]
    out_h, out_w = out_hw
    sb, sc, sh, sw = x.strides
    patches = np.lib.stride_tricks.as_strided(
        x,
        shape=(batch, channels, kh, kw, out_h, out_w),
        strides=(sb, sc, dilation * sh, dilation * sw, stride * sh, stride * sw),
        writeable=False,
    )
    return patches.reshape(batch, channels * kh * kw, out_h * out_w)


def col2im(
    cols: np.ndarray,
    padded_shape: tuple[int, int, int, int],
    kh: int,
    kw: int,
    stride: int,
    dilation: int,
    out_hw: tuple[int, int],
) -> np.ndarray:
    """Scatter-add columns back onto a padded image (adjoint of ``im2col``)."""
    batch, channels, _, _ = padded_shape
    out_h, out_w = out_hw
    image = np.zeros(padded_shape, dtype=cols.dtype)
    cols = cols.reshape(batch, channels, kh, kw, out_h, out_w)
    for i in range(kh):
        top = i * dilation
        for j in range(kw):
            left = j * dilation
            image[
                :, :,
                top : top + stride * (out_h - 1) + 1 : stride,
                left : left + stride * (out_w - 1) + 1 : stride,
            ] += cols[:, :, i, j]
    return image


class Conv2d(Function):
    def forward(self, x: np.ndarray, weight: np.ndarray, *bias: np.ndarray, spec: ConvSpec) -> np.ndarray:
        batch, channels, height, width = x.shape
        out_ch, _, kh, kw = weight.shape
        out_h, out_w = spec.output_size(height, width)
        groups, pad = spec.groups, spec.padding

        if pad:
            x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        if kh == 1 and kw == 1 and spec.stride == 1:
            cols = x.reshape(batch, channels, out_h * out_w)
        else:
            cols = im2col(x, kh, kw, spec.stride, spec.dilation, (out_h, out_w))

        cols = cols.reshape(batch, groups, -1, out_h * out_w)
        kernel = weight.reshape(groups, out_ch // groups, -1)
        out = np.matmul(kernel[None], cols).reshape(batch, out_ch, out_h, out_w)
        if bias:
            out = out + bias[0].reshape(1, -1, 1, 1)

        self.cols, self.kernel, self.spec = cols, kernel, spec
        self.padded_shape = x.shape
        self.weight_shape = weight.shape
        self.has_bias = bool(bias)
        self.out_hw = (out_h, out_w)
        return out

    def backward(self, grad: np.ndarray):
        spec = self.spec
        batch, channels, padded_h, padded_w = self.padded_shape
        out_ch, _, kh, kw = self.weight_shape
        groups = spec.groups
        grad_g = grad.reshape(batch, groups, out_ch // groups, -1)

        grad_weight = np.matmul(grad_g, np.swapaxes(self.cols, -1, -2)).sum(axis=0).reshape(self.weight_shape)
        grad_cols = np.matmul(np.swapaxes(self.kernel, -1, -2)[None], grad_g)
        grad_cols = grad_cols.reshape(batch, channels * kh * kw, -1)
        if kh == 1 and kw == 1 and spec.stride == 1:
            grad_x = grad_cols.reshape(self.padded_shape)
        else:
            grad_x = col2im(grad_cols, self.padded_shape, kh, kw, spec.stride, spec.dilation, self.out_hw)

        pad = spec.padding
        if pad:
            grad_x = grad_x[:, :, pad : padded_h - pad, pad : padded_w - pad]
        grads = (grad_x, grad_weight)
        if self.has_bias:
            grads += (grad.sum(axis=(0, 2, 3)),)
        return grads


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
    groups: int = 1,
) -> Tensor:
    """2-D cross-correlation of x[N,C,H,W] with weight[O, C/groups, kH, kW]."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and kernel, got {x.shape} and {weight.shape}")
    spec = ConvSpec(tuple(weight.shape), stride, padding, dilation, groups)
    spec.validate(x.shape[1])
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError(f"bias shape {bias.shape} does not match {weight.shape[0]} output channels")
    inputs = (x, weight) if bias is None else (x, weight, bias)
    return Conv2d.apply(*inputs, spec=spec)


def _windows(x: np.ndarray, kernel: int, stride: int, out_hw: tuple[int, int]) -> np.ndarray:
    sb, sc, sh, sw = x.strides
    return np.lib.stride_tricks.as_strided(
        x,
        shape=x.shape[:2] + out_hw + (kernel, kernel),
        strides=(sb, sc, stride * sh, stride * sw, sh, sw),
        writeable=False,
    )


class MaxPool2d(Function):
    def forward(self, x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
        out_hw = ((x.shape[2] - kernel) // stride + 1, (x.shape[3] - kernel) // stride + 1)
        windows = _windows(x, kernel, stride, out_hw).reshape(x.shape[:2] + out_hw + (kernel * kernel,))
        self.argmax = windows.argmax(axis=-1)
        self.shape, self.kernel, self.stride = x.shape, kernel, stride
        return np.take_along_axis(windows, self.argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad: np.ndarray):
        batch, channels, out_h, out_w = grad.shape
        rows = np.arange(out_h)[:, None] * self.stride + self.argmax // self.kernel
        cols = np.arange(out_w)[None, :] * self.stride + self.argmax % self.kernel
        b_idx = np.arange(batch)[:, None, None, None]
        c_idx = np.arange(channels)[None, :, None, None]
        grad_x = np.zeros(self.shape, dtype=grad.dtype)
        np.add.at(grad_x, (b_idx, c_idx, rows, cols), grad)
        return (grad_x,)


class AvgPool2d(Function):
    def forward(self, x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
        out_hw = ((x.shape[2] - kernel) // stride + 1, (x.shape[3] - kernel) // stride + 1)
        self.shape, self.kernel, self.stride = x.shape, kernel, stride
        return _windows(x, kernel, stride, out_hw).mean(axis=(-2, -1))

    def backward(self, grad: np.ndarray):
        k, s = self.kernel, self.stride
        out_h, out_w = grad.shape[2:]
        grad_x = np.zeros(self.shape, dtype=grad.dtype)
        share = grad / (k * k)
        for i in range(k):
            for j in range(k):
                grad_x[:, :, i : i + s * (out_h - 1) + 1 : s, j : j + s * (out_w - 1) + 1 : s] += share
        return (grad_x,)


def pool2d(x: Tensor, kind: PoolKind = "max", kernel: int = 2, stride: Optional[int] = None) -> Tensor:
    """Non-padded max or average pooling over square windows."""
    stride = stride or kernel
    if x.ndim != 4:
        raise ShapeError(f"pool2d expects a 4-D tensor, got {x.shape}")
    if kernel > x.shape[2] or kernel > x.shape[3]:
        raise ShapeError(f"pool window {kernel} larger than input extent {x.shape[2:]}")
    if kind == "max":
        return MaxPool2d.apply(x, kernel=kernel, stride=stride)
    if kind == "avg":
        return AvgPool2d.apply(x, kernel=kernel, stride=stride)
    raise ValueError(f"unknown pool kind: {kind}")


def interpolation_matrix(size: int, scale: int, mode: ResizeMode, dtype=np.float64) -> np.ndarray:
    """Row-stochastic (size*scale, size) matrix; bilinear uses half-pixel centres."""
    out = size * scale
    matrix = np.zeros((out, size), dtype=dtype)
    if mode == "nearest":
        matrix[np.arange(out), np.arange(out) // scale] = 1.0
        return matrix
    if mode != "bilinear":
        raise ValueError(f"unknown resize mode: {mode}")
    src = np.maximum((np.arange(out) + 0.5) / scale - 0.5, 0.0)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, size - 1)
    frac = src - lo
    np.add.at(matrix, (np.arange(out), lo), 1.0 - frac)
    np.add.at(matrix, (np.arange(out), hi), frac)
    return matrix


class Resize2d(Function):
    def forward(self, x: np.ndarray, scale: int, mode: ResizeMode) -> np.ndarray:
        self.rows = interpolation_matrix(x.shape[2], scale, mode, x.dtype)
        self.cols = interpolation_matrix(x.shape[3], scale, mode, x.dtype)
        return np.matmul(self.rows, np.matmul(x, self.cols.T))

    def backward(self, grad: np.ndarray):
        return (np.matmul(np.matmul(self.rows.T, grad), self.cols),)


def resize2d(x: Tensor, scale: int, mode: ResizeMode = "bilinear") -> Tensor:
    """Upsample the two trailing axes by an integer factor."""
    if scale < 1:
        raise ShapeError(f"resize scale must be >= 1, got {scale}")
    if scale == 1:
        return x
    return Resize2d.apply(x, scale=scale, mode=mode)


class Softmax(Function):
    def forward(self, x: np.ndarray, axis: int) -> np.ndarray:
        shifted = np.exp(x - x.max(axis=axis, keepdims=True))
        self.out = shifted / shifted.sum(axis=axis, keepdims=True)
        self.axis = axis
        return self.out

    def backward(self, grad: np.ndarray):
        s = self.out
        return (s * (grad - (grad * s).sum(axis=self.axis, keepdims=True)),)


class LogSoftmax(Function):
    def forward(self, x: np.ndarray, axis: int) -> np.ndarray:
        shifted = x - x.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        self.softmax = np.exp(out)
        self.axis = axis
        return out

    def backward(self, grad: np.ndarray):
        return (grad - self.softmax * grad.sum(axis=self.axis, keepdims=True),)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    return LogSoftmax.apply(x, axis=axis)


class ReLU(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad: np.ndarray):
        return (grad * self.mask,)


class Sigmoid(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = expit(x)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * self.out * (1.0 - self.out),)


class GELU(Function):
    """Exact GELU, x * Phi(x)."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        self.cdf = 0.5 * (1.0 + erf(x / _SQRT_2))
        return x * self.cdf

    def backward(self, grad: np.ndarray):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * self.x * self.x)
        return (grad * (self.cdf + self.x * pdf),)


_ACTIVATIONS = {"relu": ReLU, "sigmoid": Sigmoid, "gelu": GELU}


def activation(x: Tensor, kind: ActivationKind) -> Tensor:
    try:
        return _ACTIVATIONS[kind].apply(x)
    except KeyError:
        raise ValueError(f"unknown activation: {kind}") from None


def relu(x: Tensor) -> Tensor:
    return ReLU.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def gelu(x: Tensor) -> Tensor:
    return GELU.apply(x)


class _Normalize(Function):
    """Affine normalization over ``axes``; gamma/beta live on ``channel_axis``."""

    def forward(
        self,
        x: np.ndarray,
        gamma: np.ndarray,
        beta: np.ndarray,
        axes: tuple[int, ...],
        channel_axis: int,
        eps: float,
        mean: Optional[np.ndarray] = None,
        var: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        mean = x.mean(axis=axes, keepdims=True) if mean is None else mean
        var = x.var(axis=axes, keepdims=True) if var is None else var
        self.inv = 1.0 / np.sqrt(var + eps)
        self.xhat = (x - mean) * self.inv
        self.axes, self.count = axes, int(np.prod([x.shape[a] for a in axes]))
        self.param_shape = [1] * x.ndim
        self.param_shape[channel_axis] = x.shape[channel_axis]
        self.gamma = gamma.reshape(self.param_shape)
        self.reduce_axes = tuple(a for a in range(x.ndim) if a != channel_axis % x.ndim)
        return self.xhat * self.gamma + beta.reshape(self.param_shape)

    def backward(self, grad: np.ndarray):
        dxhat = grad * self.gamma
        n = self.count
        grad_x = (self.inv / n) * (
            n * dxhat
            - dxhat.sum(axis=self.axes, keepdims=True)
            - self.xhat * (dxhat * self.xhat).sum(axis=self.axes, keepdims=True)
        )
        grad_gamma = (grad * self.xhat).sum(axis=self.reduce_axes)
        grad_beta = grad.sum(axis=self.reduce_axes)
        return grad_x, grad_gamma, grad_beta


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5, axis: int = -1) -> Tensor:
    """Normalize over one axis (the channel/feature extent), then apply gamma/beta."""
    extent = x.shape[axis]
    if gamma.shape != (extent,) or beta.shape != (extent,):
        raise ShapeError(f"layer_norm gamma/beta {gamma.shape}/{beta.shape} do not match extent {extent}")
    axis = axis % x.ndim
    return _Normalize.apply(x, gamma, beta, axes=(axis,), channel_axis=axis, eps=eps)


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Per-channel normalization of x[N,C,H,W].

    In training the batch statistics are used and the running buffers are updated
    in place with ``momentum`` (unbiased variance); in eval the running buffers are used.
    """
    if x.shape[0] == 0:
        raise ShapeError("batch_norm received an empty batch")
    if gamma.shape != (x.shape[1],):
        raise ShapeError(f"batch_norm gamma {gamma.shape} does not match {x.shape[1]} channels")
    shape = (1, -1, 1, 1)
    if not training:
        scale = as_tensor(1.0 / np.sqrt(running_var + eps), like=x).reshape(shape)
        centred = x - as_tensor(running_mean, like=x).reshape(shape)
        return centred * scale * gamma.reshape(shape) + beta.reshape(shape)

    axes = (0, 2, 3)
    mean = x.data.mean(axis=axes, keepdims=True)
    var = x.data.var(axis=axes, keepdims=True)
    count = x.shape[0] * x.shape[2] * x.shape[3]
    unbiased = var.reshape(-1) * (count / (count - 1)) if count > 1 else var.reshape(-1)
    running_mean *= 1.0 - momentum
    running_mean += momentum * mean.reshape(-1)
    running_var *= 1.0 - momentum
    running_var += momentum * unbiased
    return _Normalize.apply(x, gamma, beta, axes=axes, channel_axis=1, eps=eps, mean=mean, var=var)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x[..., in] @ weight[in, out] (+ bias[out])."""
    out = ops.matmul(x, weight)
    return out + bias if bias is not None else out
