"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Tensor` wraps an ndarray and records the operations that produced
it; calling :meth:`Tensor.backward` on a scalar loss accumulates exact
gradients into every reachable tensor created with ``requires_grad=True``.
Only the primitives needed by the decoder are provided; composite layers
(softmax, layer norm, attention) are built from them so their gradients come
out of the tape rather than hand-derived formulas.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence, Union

import numpy as np

ArrayLike = Union["Tensor", np.ndarray, float, int]


class Tensor:
    __slots__ = ("value", "grad", "parents", "backprop", "requires_grad")

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backprop: Optional[Callable[[np.ndarray], None]] = None,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.parents = parents
        self.backprop = backprop
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        if self.value.size != 1:
            raise ValueError("backward() expects a scalar tensor")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                stack.append((p, False))
        for node in topo:
            node.grad = None
        self.grad = np.ones_like(self.value)
        for node in reversed(topo):
            if node.backprop is not None and node.grad is not None:
                node.backprop(node.grad)

    # Operator sugar.
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _sum_to_shape(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value + b.value, parents=(a, b))

    def backprop(g):
        if a.requires_grad:
            a.accumulate(_sum_to_shape(g, a.value.shape))
        if b.requires_grad:
            b.accumulate(_sum_to_shape(g, b.value.shape))

    out.backprop = backprop
    return out


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value * b.value, parents=(a, b))

    def backprop(g):
        if a.requires_grad:
            a.accumulate(_sum_to_shape(g * b.value, a.value.shape))
        if b.requires_grad:
            b.accumulate(_sum_to_shape(g * a.value, b.value.shape))

    out.backprop = backprop
    return out


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value / b.value, parents=(a, b))

    def backprop(g):
        if a.requires_grad:
            a.accumulate(_sum_to_shape(g / b.value, a.value.shape))
        if b.requires_grad:
            b.accumulate(_sum_to_shape(-g * a.value / (b.value**2), b.value.shape))

    out.backprop = backprop
    return out


def power(a: ArrayLike, exponent: float) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value**exponent, parents=(a,))

    def backprop(g):
        if a.requires_grad:
            a.accumulate(g * exponent * a.value ** (exponent - 1))

    out.backprop = backprop
    return out


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value @ b.value, parents=(a, b))

    def backprop(g):
        if a.requires_grad:
            a.accumulate(_sum_to_shape(g @ b.value.swapaxes(-1, -2), a.value.shape))
        if b.requires_grad:
            if b.value.ndim == 2 and g.ndim > 2:
                # Plain weight matrix under a batched input: one flat GEMM
                # instead of a batched product plus reduction.
                cols_in = a.value.shape[-1]
                cols_out = g.shape[-1]
                b.accumulate(a.value.reshape(-1, cols_in).T @ g.reshape(-1, cols_out))
            else:
                b.accumulate(_sum_to_shape(a.value.swapaxes(-1, -2) @ g, b.value.shape))

    out.backprop = backprop
    return out


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.exp(a.value), parents=(a,))

    def backprop(g):
        if a.requires_grad:
            a.accumulate(g * out.value)

    out.backprop = backprop
    return out


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.log(a.value), parents=(a,))

    def backprop(g):
        if a.requires_grad:
            a.accumulate(g / a.value)

    out.backprop = backprop
    return out


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.maximum(a.value, 0.0), parents=(a,))

    def backprop(g):
        if a.requires_grad:
            a.accumulate(g * (a.value > 0))

    out.backprop = backprop
    return out


def _normalize_axis(axis, ndim) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def tsum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axis(axis, a.value.ndim)
    out = Tensor(a.value.sum(axis=axes, keepdims=keepdims), parents=(a,))

    def backprop(g):
        if not a.requires_grad:
            return
        if not keepdims:
            g = np.expand_dims(g, axes)
        a.accumulate(np.broadcast_to(g, a.value.shape).copy())

    out.backprop = backprop
    return out


def tmean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axis(axis, a.value.ndim)
    count = int(np.prod([a.value.shape[i] for i in axes]))
    return mul(tsum(a, axis=axes, keepdims=keepdims), 1.0 / count)


def reshape(a: ArrayLike, shape) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value.reshape(shape), parents=(a,))

    def backprop(g):
        if a.requires_grad:
            a.accumulate(g.reshape(a.value.shape))

    out.backprop = backprop
    return out


def swapaxes(a: ArrayLike, ax1: int, ax2: int) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value.swapaxes(ax1, ax2), parents=(a,))

    def backprop(g):
        if a.requires_grad:
            a.accumulate(g.swapaxes(ax1, ax2))

    out.backprop = backprop
    return out


def take_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``table[ids]``: an embedding gather with scatter-add grad."""
    ids = np.asarray(ids)
    out = Tensor(table.value[ids], parents=(table,))

    def backprop(g):
        if table.requires_grad:
            acc = np.zeros_like(table.value)
            np.add.at(acc, ids, g)
            table.accumulate(acc)

    out.backprop = backprop
    return out


def gather_last(a: Tensor, ids: np.ndarray) -> Tensor:
    """Select one entry along the last axis per leading position."""
    ids = np.asarray(ids)
    out_val = np.take_along_axis(a.value, ids[..., None], axis=-1)[..., 0]
    out = Tensor(out_val, parents=(a,))

    def backprop(g):
        if a.requires_grad:
            acc = np.zeros_like(a.value)
            np.put_along_axis(acc, ids[..., None], g[..., None], axis=-1)
            a.accumulate(acc)

    out.backprop = backprop
    return out


def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    """Numerically stable softmax; the shift by the (constant) row max does
    not alter values or gradients."""
    a = as_tensor(a)
    shifted = add(a, -a.value.max(axis=axis, keepdims=True))
    e = exp(shifted)
    return div(e, tsum(e, axis=axis, keepdims=True))


def log_softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = add(a, -a.value.max(axis=axis, keepdims=True))
    return add(shifted, -log(tsum(exp(shifted), axis=axis, keepdims=True)))


def layer_norm(
    x: ArrayLike, gain: ArrayLike, offset: ArrayLike, eps: float = 1e-5
) -> Tensor:
    """Normalize over the last axis; constant rows map to the offset because
    of the eps-stabilized variance."""
    x = as_tensor(x)
    m = tmean(x, axis=-1, keepdims=True)
    centered = add(x, mul(m, -1.0))
    var = tmean(mul(centered, centered), axis=-1, keepdims=True)
    xhat = mul(centered, power(add(var, eps), -0.5))
    return add(mul(xhat, gain), offset)


def linear(x: ArrayLike, w: ArrayLike, b: ArrayLike) -> Tensor:
    return add(matmul(x, w), b)
