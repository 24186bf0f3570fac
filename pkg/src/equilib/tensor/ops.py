"""Differentiable primitives and the composites built from them."""

from __future__ import annotations

from typing import Any

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from equilib.errors import EquilibConfigError, ShapeMismatchError, UnsupportedOperationError

from .tape import Context, Function, Variable, is_recording

ArrayLike = Variable | np.ndarray | float | int

POINTWISE_FUNCTIONS = ("softplus", "sigmoid", "tanh", "relu")


def constant(value: Any) -> Variable:
    return Variable(value, requires_grad=False)


def _lift(value: ArrayLike) -> Variable:
    return value if isinstance(value, Variable) else constant(value)


# --- shape plumbing ---
class SumTo(Function):
    name = "sum_to"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray, *, shape: tuple[int, ...]) -> np.ndarray:
        ctx.attrs["input_shape"] = x.shape
        return _sum_to(x, shape)

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        return (broadcast_to(grad, ctx.attrs["input_shape"]),)


class BroadcastTo(Function):
    name = "broadcast_to"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray, *, shape: tuple[int, ...]) -> np.ndarray:
        ctx.attrs["input_shape"] = x.shape
        return np.broadcast_to(x, shape).copy()

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        return (sum_to(grad, ctx.attrs["input_shape"]),)


def _sum_to(x: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if x.shape == tuple(shape):
        return x
    lead = x.ndim - len(shape)
    out = x.sum(axis=tuple(range(lead))) if lead > 0 else x
    axes = tuple(i for i, size in enumerate(shape) if size == 1 and out.shape[i] != 1)
    if axes:
        out = out.sum(axis=axes, keepdims=True)
    return out.reshape(shape)


def sum_to(x: Variable, shape: tuple[int, ...]) -> Variable:
    if x.shape == tuple(shape):
        return x
    return SumTo.apply(x, shape=tuple(shape))


def broadcast_to(x: Variable, shape: tuple[int, ...]) -> Variable:
    if x.shape == tuple(shape):
        return x
    return BroadcastTo.apply(x, shape=tuple(shape))


class Reshape(Function):
    name = "reshape"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray, *, shape: tuple[int, ...]) -> np.ndarray:
        ctx.attrs["input_shape"] = x.shape
        return x.reshape(shape)

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        return (reshape(grad, ctx.attrs["input_shape"]),)


def reshape(x: Variable, shape: tuple[int, ...]) -> Variable:
    if x.shape == tuple(shape):
        return x
    return Reshape.apply(x, shape=tuple(shape))


class Transpose(Function):
    name = "transpose"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        return x.T.copy()

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        return (transpose(grad),)


def transpose(x: Variable) -> Variable:
    return Transpose.apply(x)


# --- elementwise arithmetic ---
class Add(Function):
    name = "add"

    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a + b

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        a, b = ctx.inputs
        return sum_to(grad, a.shape), sum_to(grad, b.shape)


class Mul(Function):
    name = "mul"

    @staticmethod
    def forward(ctx: Context, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        ctx.save(*ctx.inputs)
        return a * b

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        a, b = ctx.inputs
        grad_a = sum_to(grad * b, a.shape) if a.requires_grad else None
        grad_b = sum_to(grad * a, b.shape) if b.requires_grad else None
        return grad_a, grad_b


class Neg(Function):
    name = "neg"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        return -x

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        return (neg(grad),)


class Power(Function):
    name = "power"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray, *, exponent: float) -> np.ndarray:
        ctx.save(ctx.inputs[0])
        return np.power(x, exponent)

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        (x,) = ctx.inputs
        exponent = ctx.attrs["exponent"]
        if exponent == 1.0:
            return (grad,)
        return (grad * (power(x, exponent - 1.0) * exponent),)


def add(a: ArrayLike, b: ArrayLike) -> Variable:
    return Add.apply(_lift(a), _lift(b))


def sub(a: ArrayLike, b: ArrayLike) -> Variable:
    return Add.apply(_lift(a), neg(_lift(b)))


def mul(a: ArrayLike, b: ArrayLike) -> Variable:
    return Mul.apply(_lift(a), _lift(b))


def div(a: ArrayLike, b: ArrayLike) -> Variable:
    if isinstance(b, (int, float)):
        return mul(a, 1.0 / b)
    return mul(a, power(_lift(b), -1.0))


def neg(x: Variable) -> Variable:
    return Neg.apply(x)


def power(x: Variable, exponent: float) -> Variable:
    return Power.apply(x, exponent=float(exponent))


def sum_all(x: Variable) -> Variable:
    return sum_to(x, ())


def mean(x: Variable) -> Variable:
    return sum_all(x) * (1.0 / x.value.size)


# --- pointwise nonlinearities ---
def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Softplus(Function):
    name = "softplus"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        ctx.save(ctx.inputs[0])
        return np.logaddexp(0.0, x)

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        return (grad * sigmoid(ctx.inputs[0]),)


class Sigmoid(Function):
    name = "sigmoid"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        ctx.save_output()
        return _sigmoid(x)

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        y = ctx.output
        return (grad * (y * (1.0 - y)),)


class Tanh(Function):
    name = "tanh"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        ctx.save_output()
        return np.tanh(x)

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        y = ctx.output
        return (grad * (1.0 - y * y),)


class Relu(Function):
    name = "relu"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        ctx.save((x > 0.0).astype(np.float64))
        return np.maximum(x, 0.0)

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        if is_recording():
            raise UnsupportedOperationError(
                "relu has no second derivative; double-backward through it is unsupported",
                hint="Use a cell built from softplus/sigmoid/tanh for the Lipschitz penalty.",
            )
        (step,) = ctx.saved
        return (grad * step,)


def softplus(x: Variable) -> Variable:
    return Softplus.apply(x)


def sigmoid(x: Variable) -> Variable:
    return Sigmoid.apply(x)


def tanh(x: Variable) -> Variable:
    return Tanh.apply(x)


def relu(x: Variable) -> Variable:
    return Relu.apply(x)


_POINTWISE = {"softplus": softplus, "sigmoid": sigmoid, "tanh": tanh, "relu": relu}


def pointwise(x: Variable, fn: str) -> Variable:
    try:
        return _POINTWISE[fn](x)
    except KeyError:
        raise UnsupportedOperationError(
            f"Unknown pointwise function: {fn}",
            hint=f"Choose one of {', '.join(POINTWISE_FUNCTIONS)}.",
        ) from None


class L2Norm(Function):
    name = "l2_norm"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray) -> np.ndarray:
        ctx.save(ctx.inputs[0])
        ctx.save_output()
        return np.asarray(np.sqrt(np.sum(x * x)))

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        (x,) = ctx.inputs
        norm = ctx.output
        if norm.value == 0.0:
            # Subgradient 0 at the origin keeps an inactive penalty exactly flat.
            return (constant(np.zeros(x.shape)),)
        return (x * (grad * power(norm, -1.0)),)


def l2_norm(x: Variable) -> Variable:
    return L2Norm.apply(x)


# --- linear algebra over the channel axis ---
class Linear(Function):
    """``x @ w`` contracting the last axis of x with the first axis of w."""

    name = "linear"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        ctx.save(*ctx.inputs)
        return x @ w

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        x, w = ctx.inputs
        grad_x = linear(grad, transpose(w)) if x.requires_grad else None
        grad_w = outer_sum(x, grad) if w.requires_grad else None
        return grad_x, grad_w


class OuterSum(Function):
    """``x^T g`` summed over every leading axis."""

    name = "outer_sum"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        ctx.save(*ctx.inputs)
        return x.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        x, g = ctx.inputs
        grad_x = linear(g, transpose(grad)) if x.requires_grad else None
        grad_g = linear(x, grad) if g.requires_grad else None
        return grad_x, grad_g


def linear(x: Variable, w: Variable) -> Variable:
    if x.shape[-1] != w.shape[0]:
        raise ShapeMismatchError(
            f"Cannot contract input of shape {x.shape} with matrix of shape {w.shape}"
        )
    return Linear.apply(x, w)


def outer_sum(x: Variable, g: Variable) -> Variable:
    return OuterSum.apply(x, g)


# --- convolution by im2col lowering ---
def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    batch, height, width, channels = x.shape
    ph, pw = kh // 2, kw // 2
    padded = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
    windows = sliding_window_view(padded, (kh, kw), axis=(1, 2))
    # (B, H, W, C, kh, kw) -> (B, H, W, kh, kw, C)
    windows = windows.transpose(0, 1, 2, 4, 5, 3)
    return windows.reshape(batch, height, width, kh * kw * channels)


def _col2im(cols: np.ndarray, kh: int, kw: int, channels: int) -> np.ndarray:
    batch, height, width, _ = cols.shape
    ph, pw = kh // 2, kw // 2
    patches = cols.reshape(batch, height, width, kh, kw, channels)
    padded = np.zeros((batch, height + 2 * ph, width + 2 * pw, channels))
    for p in range(kh):
        for q in range(kw):
            padded[:, p : p + height, q : q + width, :] += patches[:, :, :, p, q, :]
    return padded[:, ph : ph + height, pw : pw + width, :]


class Im2Col(Function):
    name = "im2col"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray, *, kh: int, kw: int) -> np.ndarray:
        ctx.attrs["channels"] = x.shape[-1]
        return _im2col(x, kh, kw)

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        return (
            Col2Im.apply(
                grad, kh=ctx.attrs["kh"], kw=ctx.attrs["kw"], channels=ctx.attrs["channels"]
            ),
        )


class Col2Im(Function):
    name = "col2im"

    @staticmethod
    def forward(
        ctx: Context, cols: np.ndarray, *, kh: int, kw: int, channels: int
    ) -> np.ndarray:
        return _col2im(cols, kh, kw, channels)

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        return (Im2Col.apply(grad, kh=ctx.attrs["kh"], kw=ctx.attrs["kw"]),)


def conv2d(x: Variable, kernel: Variable) -> Variable:
    """Same-padded 2-D cross-correlation of an NHWC input with an HWIO kernel."""

    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeMismatchError(
            f"conv2d expects a 4-D input and kernel, got {x.shape} and {kernel.shape}"
        )
    kh, kw, in_channels, out_channels = kernel.shape
    if x.shape[-1] != in_channels:
        raise ShapeMismatchError(
            f"conv2d input shape {x.shape} does not match kernel shape {kernel.shape}: "
            f"{x.shape[-1]} input channels vs {in_channels} kernel input channels"
        )
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeMismatchError(
            f"conv2d kernel shape {kernel.shape} needs odd spatial extents"
        )
    matrix = reshape(kernel, (kh * kw * in_channels, out_channels))
    if kh == 1 and kw == 1:
        return linear(x, matrix)
    return linear(Im2Col.apply(x, kh=kh, kw=kw), matrix)


# --- channel slicing ---
class ChannelSlice(Function):
    name = "channel_slice"

    @staticmethod
    def forward(ctx: Context, x: np.ndarray, *, start: int, stop: int) -> np.ndarray:
        ctx.attrs["total"] = x.shape[-1]
        return x[..., start:stop].copy()

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        attrs = ctx.attrs
        return (
            ChannelPad.apply(
                grad, start=attrs["start"], stop=attrs["stop"], total=attrs["total"]
            ),
        )


class ChannelPad(Function):
    name = "channel_pad"

    @staticmethod
    def forward(
        ctx: Context, x: np.ndarray, *, start: int, stop: int, total: int
    ) -> np.ndarray:
        out = np.zeros(x.shape[:-1] + (total,))
        out[..., start:stop] = x
        return out

    @staticmethod
    def backward(ctx: Context, grad: Variable) -> tuple[Variable | None, ...]:
        return (ChannelSlice.apply(grad, start=ctx.attrs["start"], stop=ctx.attrs["stop"]),)


def channel_slice(x: Variable, start: int, stop: int) -> Variable:
    if start == 0 and stop == x.shape[-1]:
        return x
    return ChannelSlice.apply(x, start=start, stop=stop)


def concat_channels(parts: list[Variable]) -> Variable:
    total = sum(p.shape[-1] for p in parts)
    out: Variable | None = None
    offset = 0
    for part in parts:
        width = part.shape[-1]
        padded = ChannelPad.apply(part, start=offset, stop=offset + width, total=total)
        out = padded if out is None else out + padded
        offset += width
    assert out is not None
    return out


def split_channels(x: Variable, sizes: list[int]) -> list[Variable]:
    if sum(sizes) != x.shape[-1]:
        raise ShapeMismatchError(
            f"Cannot split {x.shape[-1]} channels into sizes {sizes}"
        )
    parts: list[Variable] = []
    offset = 0
    for size in sizes:
        parts.append(channel_slice(x, offset, offset + size))
        offset += size
    return parts


# --- normalization and losses ---
def batch_norm(
    x: Variable,
    scale: Variable,
    bias: Variable,
    eps: float = 1e-5,
) -> Variable:
    """Standardize each channel over (batch, height, width), then ``bias + scale * x``.

    Statistics come from the current batch on every call.
    """

    channels = x.shape[-1]
    if scale.value.size != channels or bias.value.size != channels:
        raise ShapeMismatchError(
            f"batch_norm scale {scale.shape} / bias {bias.shape} do not match "
            f"{channels} channels of input {x.shape}"
        )
    if eps < 0:
        raise EquilibConfigError(f"batch_norm eps must be non-negative, got {eps}")
    stat_shape = (1,) * (x.ndim - 1) + (channels,)
    count = x.value.size // channels
    scale = reshape(scale, stat_shape)
    bias = reshape(bias, stat_shape)
    centered = x - sum_to(x, stat_shape) * (1.0 / count)
    variance = sum_to(centered * centered, stat_shape) * (1.0 / count)
    inv_std = power(variance + eps, -0.5)
    return centered * inv_std * scale + bias


def binary_cross_entropy_with_logits(logits: Variable, targets: np.ndarray) -> Variable:
    """Mean per-pixel cross entropy, written as ``softplus(z) - y z``."""

    if logits.shape != tuple(targets.shape):
        raise ShapeMismatchError(
            f"Logits shape {logits.shape} does not match target shape {targets.shape}"
        )
    return mean(softplus(logits) - logits * constant(targets))
