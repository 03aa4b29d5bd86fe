"""Minimal reverse-mode automatic differentiation over float64 ndarrays.

Just enough machinery for the recurrent forecaster: broadcast-aware
add/mul, (batched) matmul, sigmoid/tanh/softmax, concat/stack/slice, and
scalar reductions. Graphs are built per forward pass and freed afterwards.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn")

    def __init__(self, value, parents=(), backward_fn=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, grad):
        self.grad = grad if self.grad is None else self.grad + grad

    def backward(self):
        """Backpropagate from a scalar tensor through the whole graph."""
        if self.value.size != 1:
            raise ValueError("backward() requires a scalar tensor")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node.backward_fn is not None and node.grad is not None:
                node.backward_fn(node.grad)

    # Operator sugar, constants allowed on either side.
    def __add__(self, other):
        return add(self, _wrap(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(_wrap(other), _const(-1.0)))

    def __rsub__(self, other):
        return add(_wrap(other), mul(self, _const(-1.0)))

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _const(x) -> Tensor:
    return Tensor(np.asarray(x, dtype=np.float64))


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value + b.value, (a, b))

    def backward(grad):
        a._accumulate(_unbroadcast(grad, a.value.shape))
        b._accumulate(_unbroadcast(grad, b.value.shape))

    out.backward_fn = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value * b.value, (a, b))

    def backward(grad):
        a._accumulate(_unbroadcast(grad * b.value, a.value.shape))
        b._accumulate(_unbroadcast(grad * a.value, b.value.shape))

    out.backward_fn = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.value @ b.value, (a, b))

    def backward(grad):
        av, bv = a.value, b.value
        if av.ndim == 1:
            av = av[None, :]
        if bv.ndim == 1:
            bv = bv[:, None]
        g = grad
        if a.value.ndim == 1:
            g = g[..., None, :]
        if b.value.ndim == 1:
            g = g[..., :, None]
        ga = g @ bv.swapaxes(-1, -2)
        gb = av.swapaxes(-1, -2) @ g
        if a.value.ndim == 1:
            ga = ga[..., 0, :]
        if b.value.ndim == 1:
            gb = gb[..., :, 0]
        a._accumulate(_unbroadcast(ga, a.value.shape))
        b._accumulate(_unbroadcast(gb, b.value.shape))

    out.backward_fn = backward
    return out


def sigmoid(x: Tensor) -> Tensor:
    val = 1.0 / (1.0 + np.exp(-x.value))
    out = Tensor(val, (x,))

    def backward(grad):
        x._accumulate(grad * val * (1.0 - val))

    out.backward_fn = backward
    return out


def tanh(x: Tensor) -> Tensor:
    val = np.tanh(x.value)
    out = Tensor(val, (x,))

    def backward(grad):
        x._accumulate(grad * (1.0 - val**2))

    out.backward_fn = backward
    return out


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    val = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(val, (x,))

    def backward(grad):
        inner = (grad * val).sum(axis=axis, keepdims=True)
        x._accumulate(val * (grad - inner))

    out.backward_fn = backward
    return out


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out = Tensor(np.concatenate([t.value for t in tensors], axis=axis), tuple(tensors))
    sizes = [t.value.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        moved = np.moveaxis(grad, axis, 0)
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            t._accumulate(np.moveaxis(moved[lo:hi], 0, axis))

    out.backward_fn = backward
    return out


def stack(tensors, axis: int = 1) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out = Tensor(np.stack([t.value for t in tensors], axis=axis), tuple(tensors))

    def backward(grad):
        moved = np.moveaxis(grad, axis, 0)
        for i, t in enumerate(tensors):
            t._accumulate(moved[i])

    out.backward_fn = backward
    return out


def index_axis(x: Tensor, idx: int, axis: int = 1) -> Tensor:
    """Select one slice along an axis (e.g. timestep t of a (B, T, d) tensor)."""
    val = np.take(x.value, idx, axis=axis)
    out = Tensor(val, (x,))

    def backward(grad):
        full = np.zeros_like(x.value)
        sl = [slice(None)] * x.value.ndim
        sl[axis] = idx
        full[tuple(sl)] = grad
        x._accumulate(full)

    out.backward_fn = backward
    return out


def transpose_last2(x: Tensor) -> Tensor:
    out = Tensor(x.value.swapaxes(-1, -2), (x,))

    def backward(grad):
        x._accumulate(grad.swapaxes(-1, -2))

    out.backward_fn = backward
    return out


def mean(x: Tensor) -> Tensor:
    out = Tensor(np.array(x.value.mean()), (x,))

    def backward(grad):
        x._accumulate(np.full_like(x.value, grad / x.value.size))

    out.backward_fn = backward
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.array(x.value.sum()), (x,))

    def backward(grad):
        x._accumulate(np.full_like(x.value, grad))

    out.backward_fn = backward
    return out


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with broadcasting over leading batch axes."""
    return add(matmul(x, w), b)
