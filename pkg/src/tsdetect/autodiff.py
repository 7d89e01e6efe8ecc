"""Minimal dense-tensor reverse-mode autodiff engine.

All arrays are float64, row-major numpy. Each op builds a node in a dynamic
graph; ``backward()`` on a scalar walks the graph in reverse topological
order and accumulates gradients additively (required for residual reuse).
"""

import numpy as np
from scipy.special import erf, expit


class NumericError(RuntimeError):
    """A forward op produced a non-finite value."""


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


def _unbroadcast(grad, shape):
    """Sum a broadcasted gradient back down to `shape`."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Dense float64 tensor with optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward",
                 "_consumers")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self._consumers = 0

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None
        self._consumers = 0

    def backward(self):
        if self.data.size != 1:
            raise ShapeError("backward() requires a scalar output")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _node(data, parents, backward_fn):
    """Build a graph node, validating finiteness of the forward result."""
    # sum is finite iff all entries are (one pass, no temporary bool array)
    if not np.isfinite(np.sum(data)):
        raise NumericError("non-finite value in forward pass")
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        for p in parents:
            p._consumers += 1

        def backward(grad):
            for p, g in zip(parents, backward_fn(grad)):
                if not p.requires_grad or g is None:
                    continue
                if p.grad is None:
                    # a freshly-owned array feeding a single consumer can be
                    # adopted without copying; anything shared must be copied
                    # because later contributions accumulate in place
                    if p._consumers == 1 and g.base is None and g is not grad:
                        p.grad = g
                    else:
                        p.grad = g.copy()
                else:
                    p.grad += g
        out._backward = backward
    return out


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data
    return _node(data, (a, b), lambda g: (_unbroadcast(g, a.data.shape),
                                          _unbroadcast(g, b.data.shape)))


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data
    return _node(data, (a, b), lambda g: (_unbroadcast(g * b.data, a.data.shape),
                                          _unbroadcast(g * a.data, b.data.shape)))


def matmul(a, b):
    """Matrix product with numpy broadcasting of leading (batch) axes."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError("matmul requires tensors of rank >= 2")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {a.data.shape} x {b.data.shape}")
    data = np.matmul(a.data, b.data)

    def backward(g):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.data.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.data.shape)
        return ga, gb

    return _node(data, (a, b), backward)


def reshape(a, shape):
    a = _as_tensor(a)
    data = a.data.reshape(shape)
    return _node(data, (a,), lambda g: (g.reshape(a.data.shape),))


def transpose(a, axes):
    a = _as_tensor(a)
    inv = np.argsort(axes)
    return _node(a.data.transpose(axes), (a,),
                 lambda g: (g.transpose(inv),))


def slice_last(a, start, stop):
    """Slice along the last axis."""
    a = _as_tensor(a)
    data = a.data[..., start:stop]

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[..., start:stop] = g
        return (ga,)

    return _node(data, (a,), backward)


def gather_last(a, index):
    """Fancy-index the last axis with an integer array; gradients scatter-add.

    For a of shape (..., L) and index of shape S, returns shape (..., *S).
    """
    a = _as_tensor(a)
    index = np.asarray(index, dtype=np.intp)
    data = a.data[..., index]

    def backward(g):
        ga = np.zeros_like(a.data)
        lead = int(np.prod(a.data.shape[:-1])) if a.data.ndim > 1 else 1
        flat_ga = ga.reshape(lead, a.data.shape[-1])
        flat_g = g.reshape(lead, index.size)
        rows = np.arange(lead)[:, None]
        np.add.at(flat_ga, (rows, index.ravel()[None, :]), flat_g)
        return (ga,)

    return _node(data, (a,), backward)


def softmax_rows(a):
    """Softmax along the last axis, max-subtracted for stability."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return (y * (g - dot),)

    return _node(y, (a,), backward)


LAYER_NORM_EPS = 1e-5


def layer_norm(x, gamma, beta, eps=LAYER_NORM_EPS):
    """Normalize the last axis to mean 0 / variance 1, then affine."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    n = x.data.shape[-1]
    if gamma.data.shape != (n,) or beta.data.shape != (n,):
        raise ShapeError("layer_norm affine params must match the last axis")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    y = gamma.data * xhat + beta.data

    def backward(g):
        gxhat = g * gamma.data
        mean_g = gxhat.mean(axis=-1, keepdims=True)
        mean_gx = (gxhat * xhat).mean(axis=-1, keepdims=True)
        gx = inv_std * (gxhat - mean_g - xhat * mean_gx)
        axes = tuple(range(g.ndim - 1))
        ggamma = (g * xhat).sum(axis=axes)
        gbeta = g.sum(axis=axes)
        return gx, ggamma, gbeta

    return _node(y, (x, gamma, beta), backward)


_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a):
    """Exact (erf-based) GELU: x * Phi(x)."""
    a = _as_tensor(a)
    phi = 0.5 * (1.0 + erf(a.data / _SQRT2))
    y = a.data * phi

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * a.data * a.data)
        return (g * (phi + a.data * pdf),)

    return _node(y, (a,), backward)


def sigmoid(a):
    a = _as_tensor(a)
    s = expit(a.data)
    return _node(s, (a,), lambda g: (g * s * (1.0 - s),))


BCE_CLAMP = 1e-7


def bce_loss(scores, labels):
    """Mean binary cross entropy; scores clamped to [1e-7, 1 - 1e-7].

    `labels` is a plain 0/1 array (no gradient flows into it).
    """
    scores = _as_tensor(scores)
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != scores.data.shape:
        raise ShapeError(
            f"scores shape {scores.data.shape} != labels shape {y.shape}")
    a = np.clip(scores.data, BCE_CLAMP, 1.0 - BCE_CLAMP)
    n = a.size
    loss = -(y * np.log(a) + (1.0 - y) * np.log1p(-a)).sum() / n

    def backward(g):
        inside = (scores.data > BCE_CLAMP) & (scores.data < 1.0 - BCE_CLAMP)
        grad = np.where(inside, -(y / a - (1.0 - y) / (1.0 - a)) / n, 0.0)
        return (g * grad,)

    return _node(np.asarray(loss), (scores,), backward)
