"""Differentiable primitives over :class:`~autodiff.tensor.Tensor`.

Each primitive computes its forward value with numpy and records a closure
that maps the output adjoint to one adjoint per parent (``None`` for parents
that do not need one). Shapes are checked up front; a mismatch raises
:class:`~contracts.errors.ShapeError` naming the op and the offending extents.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from autodiff.tensor import Tensor
from contracts.errors import ShapeError

Operand = Tensor | float | int | np.ndarray


def as_tensor(value: Operand) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum *grad* down to *shape*, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_dims(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.dims, b.dims)
    except ValueError as exc:
        raise ShapeError(op, f"cannot broadcast {a.dims} with {b.dims}") from exc


# -- elementwise -------------------------------------------------------------


def add(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_dims("add", a, b)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g, a.dims), unbroadcast(g, b.dims)

    return Tensor._from_op(a.data + b.data, "add", (a, b), backward)


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_dims("sub", a, b)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g, a.dims), unbroadcast(-g, b.dims)

    return Tensor._from_op(a.data - b.data, "sub", (a, b), backward)


def mul(a: Operand, b: Operand) -> Tensor:
    """Elementwise product with broadcasting (mask application)."""
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_dims("mul", a, b)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return unbroadcast(g * b.data, a.dims), unbroadcast(g * a.data, b.dims)

    return Tensor._from_op(a.data * b.data, "mul", (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * factor,)

    return Tensor._from_op(a.data * factor, "scale", (a,), backward)


def relu(a: Tensor) -> Tensor:
    positive = a.data > 0

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * positive,)

    return Tensor._from_op(np.where(positive, a.data, 0.0), "relu", (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * out * (1.0 - out),)

    return Tensor._from_op(out, "sigmoid", (a,), backward)


def log_sigmoid(a: Tensor) -> Tensor:
    """log(sigmoid(a)) without overflow for large negative inputs."""
    out = -np.logaddexp(0.0, -a.data)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * 0.5 * (1.0 - np.tanh(0.5 * a.data)),)

    return Tensor._from_op(out, "log_sigmoid", (a,), backward)


# -- dense algebra -----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.dims[1] != b.dims[0]:
        raise ShapeError("matmul", f"{a.dims} @ {b.dims}")

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return g @ b.data.T, a.data.T @ g

    return Tensor._from_op(a.data @ b.data, "matmul", (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` for x (N, in), weight (out, in), bias (out,)."""
    if x.ndim != 2 or weight.ndim != 2 or x.dims[1] != weight.dims[1]:
        raise ShapeError("linear", f"input {x.dims} vs weight {weight.dims}")
    if bias is not None and bias.dims != (weight.dims[0],):
        raise ShapeError("linear", f"bias {bias.dims} vs weight {weight.dims}")
    out = x.data @ weight.data.T
    if bias is not None:
        out = out + bias.data

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        grads: list[np.ndarray | None] = [g @ weight.data, g.T @ x.data]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, "linear", parents, backward)


# -- convolution and pooling -------------------------------------------------


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Stride-1 valid cross-correlation. x (N,C,H,W), weight (F,C,KH,KW)."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError("conv2d", f"expected 4-d input and kernel, got {x.dims} and {weight.dims}")
    n, c, h, w = x.dims
    f, wc, kh, kw = weight.dims
    if wc != c:
        raise ShapeError("conv2d", f"input channels {c} vs kernel channels {wc}")
    if kh > h or kw > w:
        raise ShapeError("conv2d", f"kernel {kh}x{kw} larger than input {h}x{w}")
    if bias is not None and bias.dims != (f,):
        raise ShapeError("conv2d", f"bias {bias.dims} vs {f} filters")

    cols = sliding_window_view(x.data, (kh, kw), axis=(2, 3))  # (N, C, OH, OW, KH, KW)
    out = np.tensordot(cols, weight.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    out = np.ascontiguousarray(out)

    def backward(g: np.ndarray) -> tuple[np.ndarray | None, ...]:
        grad_w = np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))
        padded = np.pad(g, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
        gcols = sliding_window_view(padded, (kh, kw), axis=(2, 3))  # (N, F, H, W, KH, KW)
        flipped = weight.data[:, :, ::-1, ::-1]
        grad_x = np.tensordot(gcols, flipped, axes=([1, 4, 5], [0, 2, 3])).transpose(0, 3, 1, 2)
        grads: list[np.ndarray | None] = [np.ascontiguousarray(grad_x), grad_w]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, "conv2d", parents, backward)


def pad2d(x: Tensor, pad: int) -> Tensor:
    """Zero-pad the two spatial axes of an (N,C,H,W) tensor by *pad* on each side."""
    if x.ndim != 4:
        raise ShapeError("pad2d", f"expected 4-d input, got {x.dims}")
    if pad == 0:
        return x
    out = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g[:, :, pad:-pad, pad:-pad],)

    return Tensor._from_op(out, "pad2d", (x,), backward)


def maxpool2x2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; ties go to the first element in row-major order."""
    if x.ndim != 4 or x.dims[2] % 2 or x.dims[3] % 2:
        raise ShapeError("maxpool2x2", f"expected (N,C,H,W) with even H and W, got {x.dims}")
    n, c, h, w = x.dims
    windows = x.data.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    index = windows.argmax(axis=-1)[..., None]
    out = np.take_along_axis(windows, index, axis=-1)[..., 0]

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros_like(windows)
        np.put_along_axis(grad, index, g[..., None], axis=-1)
        grad = grad.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)
        return (grad,)

    return Tensor._from_op(out, "maxpool2x2", (x,), backward)


def _pooling_matrix(size: int, out: int) -> np.ndarray:
    pool = np.zeros((out, size))
    for i in range(out):
        lo = (i * size) // out
        hi = -(-((i + 1) * size) // out)
        pool[i, lo:hi] = 1.0 / (hi - lo)
    return pool


def adaptive_avgpool2d(x: Tensor, out_hw: tuple[int, int]) -> Tensor:
    """Average-pool (N,C,H,W) to (N,C,oh,ow) with bins [floor(iH/o), ceil((i+1)H/o))."""
    if x.ndim != 4:
        raise ShapeError("adaptive_avgpool2d", f"expected 4-d input, got {x.dims}")
    oh, ow = out_hw
    h, w = x.dims[2], x.dims[3]
    if oh < 1 or ow < 1 or oh > h or ow > w:
        raise ShapeError("adaptive_avgpool2d", f"cannot pool {h}x{w} to {oh}x{ow}")
    if (oh, ow) == (h, w):
        return x
    ph, pw = _pooling_matrix(h, oh), _pooling_matrix(w, ow)
    out = np.einsum("ih,nchw,jw->ncij", ph, x.data, pw)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.einsum("ih,ncij,jw->nchw", ph, g, pw),)

    return Tensor._from_op(out, "adaptive_avgpool2d", (x,), backward)


# -- structure ---------------------------------------------------------------


def reshape(x: Tensor, dims: Sequence[int]) -> Tensor:
    try:
        out = x.data.reshape(tuple(dims))
    except ValueError as exc:
        raise ShapeError("reshape", f"cannot reshape {x.dims} to {tuple(dims)}") from exc
    source = x.dims

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(source),)

    return Tensor._from_op(out, "reshape", (x,), backward)


def flatten(x: Tensor) -> Tensor:
    """Collapse every axis after the batch axis."""
    if x.ndim <= 2:
        return x
    return reshape(x, (x.dims[0], -1))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    if not tensors:
        raise ShapeError("concat", "no inputs")
    ref = tensors[0].dims
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(t.dims[i] != ref[i] for i in range(len(ref)) if i != ax):
            raise ShapeError("concat", f"{ref} vs {t.dims} along axis {axis}")
    bounds = np.cumsum([t.dims[ax] for t in tensors])[:-1]

    def backward(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, bounds, axis=ax)

    out = np.concatenate([t.data for t in tensors], axis=ax)
    return Tensor._from_op(out, "concat", tuple(tensors), backward)


def take(x: Tensor, indices: Sequence[int], axis: int = -1) -> Tensor:
    """Select *indices* along *axis* (class slices of a logit matrix)."""
    idx = np.asarray(indices, dtype=np.int64)
    ax = axis % x.ndim
    if idx.size and (idx.min() < -x.dims[ax] or idx.max() >= x.dims[ax]):
        raise ShapeError("take", f"indices {idx.tolist()} out of range for extent {x.dims[ax]}")
    source = x.dims

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        grad = np.zeros(source)
        np.add.at(np.moveaxis(grad, ax, 0), idx, np.moveaxis(g, ax, 0))
        return (grad,)

    return Tensor._from_op(np.take(x.data, idx, axis=ax), "take", (x,), backward)


# -- reductions and normalisers ---------------------------------------------


def _expand(g: np.ndarray, dims: tuple[int, ...], axis: int | None, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, dims)


def sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    source = x.dims

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.array(_expand(g, source, axis, keepdims)),)

    return Tensor._from_op(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), "sum", (x,), backward)


def mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    source = x.dims
    count = x.size if axis is None else source[axis]

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (_expand(g, source, axis, keepdims) / count,)

    return Tensor._from_op(np.asarray(x.data.mean(axis=axis, keepdims=keepdims)), "mean", (x,), backward)


def sum_of_squares(x: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (2.0 * x.data * g,)

    return Tensor._from_op(np.asarray(np.sum(x.data * x.data)), "sum_of_squares", (x,), backward)


def softmax_array(data: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = data - data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax_array(data: np.ndarray, axis: int = -1) -> np.ndarray:
    """Plain-array log-softmax; same arithmetic as :func:`log_softmax`."""
    shifted = data - data.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    out = softmax_array(x.data, axis)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor._from_op(out, "softmax", (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    out = log_softmax_array(x.data, axis)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)

    return Tensor._from_op(out, "log_softmax", (x,), backward)


def logsumexp(x: Tensor, axis: int = -1) -> Tensor:
    """Row-wise log-sum-exp; drops *axis*."""
    peak = x.data.max(axis=axis, keepdims=True)
    lse = peak + np.log(np.exp(x.data - peak).sum(axis=axis, keepdims=True))
    probs = np.exp(x.data - lse)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.expand_dims(g, axis) * probs,)

    return Tensor._from_op(np.squeeze(lse, axis=axis), "logsumexp", (x,), backward)


# -- dispatcher --------------------------------------------------------------

PRIMITIVES: dict[str, Callable[..., Tensor]] = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "scale": scale,
    "relu": relu,
    "sigmoid": sigmoid,
    "log_sigmoid": log_sigmoid,
    "matmul": matmul,
    "linear": linear,
    "conv2d": conv2d,
    "pad2d": pad2d,
    "maxpool2x2": maxpool2x2,
    "adaptive_avgpool2d": adaptive_avgpool2d,
    "reshape": reshape,
    "flatten": flatten,
    "concat": lambda *tensors, axis=1: concat(tensors, axis=axis),
    "take": take,
    "sum": sum,
    "mean": mean,
    "sum_of_squares": sum_of_squares,
    "softmax": softmax,
    "log_softmax": log_softmax,
    "logsumexp": logsumexp,
}


def primitive_forward(kind: str, *inputs: Operand, **params: object) -> Tensor:
    """Apply the primitive named *kind*; extra keyword params go to the op."""
    try:
        op = PRIMITIVES[kind]
    except KeyError:
        raise ShapeError(kind, f"unknown primitive; known: {sorted(PRIMITIVES)}") from None
    return op(*inputs, **params)
