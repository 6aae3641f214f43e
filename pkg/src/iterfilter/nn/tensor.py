"""A small reverse-mode autodiff engine over float64 numpy arrays.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure pushing the output gradient back into them.  :meth:`Tensor.backward`
walks the recorded graph in reverse topological order.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse

from ..errors import InvalidInput, ShapeError


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self):
        self.grad = None

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise InvalidInput(f"backward() needs a scalar loss, got shape {self.shape}")
        if not np.isfinite(self.data).all():
            raise FloatingPointError("non-finite loss")
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
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # interior gradients are not needed once propagated
                if node._parents:
                    node.grad = None if node is not self else node.grad

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None):
        return tsum(self, axis)


def tensor(data, requires_grad=False, name=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward) -> Tensor:
    req = any(p.requires_grad for p in parents)
    return Tensor(data, requires_grad=req, _parents=tuple(parents) if req else (),
                  _backward=backward if req else None)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    try:
        out = a.data + b.data
    except ValueError as e:
        raise ShapeError(str(e)) from None

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.shape))
    return _make(out, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    try:
        out = a.data - b.data
    except ValueError as e:
        raise ShapeError(str(e)) from None

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(-_unbroadcast(g, b.shape))
    return _make(out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    try:
        out = a.data * b.data
    except ValueError as e:
        raise ShapeError(str(e)) from None

    def backward(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))
    return _make(out, (a, b), backward)


def square(a) -> Tensor:
    a = _wrap(a)

    def backward(g):
        a._accum(2.0 * a.data * g)
    return _make(a.data * a.data, (a,), backward)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} do not align")

    def backward(g):
        if a.requires_grad:
            a._accum(g @ b.data.T)
        if b.requires_grad:
            b._accum(a.data.T @ g)
    return _make(a.data @ b.data, (a, b), backward)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` of shape ``(out, in)``."""
    x, weight = _wrap(x), _wrap(weight)
    if x.data.ndim != 2 or weight.data.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {weight.shape}")
    out = x.data @ weight.data.T
    if bias is not None:
        bias = _wrap(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeError(f"linear: bias {bias.shape} does not match weight {weight.shape}")
        out = out + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if x.requires_grad:
            x._accum(g @ weight.data)
        if weight.requires_grad:
            weight._accum(g.T @ x.data)
        if bias is not None and bias.requires_grad:
            bias._accum(g.sum(axis=0))
    return _make(out, parents, backward)


def relu(x) -> Tensor:
    x = _wrap(x)
    mask = x.data > 0

    def backward(g):
        x._accum(g * mask)
    return _make(x.data * mask, (x,), backward)


def concat(tensors, axis=-1) -> Tensor:
    ts = [_wrap(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeError(str(e)) from None
    sizes = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def backward(g):
        for t, piece in zip(ts, np.split(g, sizes, axis=axis)):
            if t.requires_grad:
                t._accum(piece)
    return _make(out, ts, backward)


def take_columns(x, start, stop) -> Tensor:
    x = _wrap(x)

    def backward(g):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        x._accum(full)
    return _make(x.data[:, start:stop], (x,), backward)


def _scatter_rows(g, index, n):
    """``out[index[e]] += g[e]`` via a one-hot sparse product (much faster than ``np.add.at``)."""
    if g.ndim != 2:
        out = np.zeros((n,) + g.shape[1:])
        np.add.at(out, index, g)
        return out
    m = len(index)
    onehot = sparse.csr_matrix((np.ones(m), (index, np.arange(m))), shape=(n, m))
    return np.asarray(onehot @ g)


def gather(x, index) -> Tensor:
    """Row gather ``x[index]``."""
    x = _wrap(x)
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        x._accum(_scatter_rows(g, index, x.shape[0]))
    return _make(x.data[index], (x,), backward)


def scatter_sum(x, index, n) -> Tensor:
    """Sum rows of ``x`` into ``n`` slots: ``out[index[e]] += x[e]``."""
    x = _wrap(x)
    index = np.asarray(index, dtype=np.int64)
    if index.shape != (x.shape[0],):
        raise ShapeError(f"scatter_sum: index {index.shape} does not match rows of {x.shape}")

    def backward(g):
        x._accum(g[index])
    return _make(_scatter_rows(x.data, index, n), (x,), backward)


def segment_sum(x, n, k) -> Tensor:
    """:func:`scatter_sum` for sorted uniform-degree segments ``index = repeat(arange(n), k)``."""
    x = _wrap(x)
    if x.shape[0] != n * k:
        raise ShapeError(f"segment_sum: {x.shape[0]} rows cannot form {n} segments of {k}")

    def backward(g):
        x._accum(np.repeat(g, k, axis=0))
    return _make(x.data.reshape((n, k) + x.shape[1:]).sum(axis=1), (x,), backward)


def edge_sum_pairs(a, b, neighbors) -> Tensor:
    """Per-edge ``a[i] + b[j]`` for each edge ``(i, j)``, rows ordered by source.

    ``neighbors`` is the ``(n, k)`` out-neighbour table of a uniform-degree graph.
    """
    a, b = _wrap(a), _wrap(b)
    nbrs = np.asarray(neighbors, dtype=np.int64)
    n, k = nbrs.shape
    if a.shape[0] != n or b.shape[0] != n or a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"edge_sum_pairs: {a.shape}, {b.shape} vs graph of {n} vertices")
    f = a.shape[1]
    out = (a.data[:, None, :] + b.data[nbrs]).reshape(n * k, f)

    def backward(g):
        g3 = g.reshape(n, k, f)
        if a.requires_grad:
            a._accum(g3.sum(axis=1))
        if b.requires_grad:
            b._accum(_scatter_rows(g, nbrs.reshape(-1), n))
    return _make(out, (a, b), backward)


def tsum(x, axis=None) -> Tensor:
    x = _wrap(x)

    def backward(g):
        if axis is None:
            x._accum(np.broadcast_to(g, x.shape))
        else:
            x._accum(np.broadcast_to(np.expand_dims(g, axis), x.shape))
    return _make(np.asarray(x.data.sum(axis=axis)), (x,), backward)


def weighted_sq_norm_sum(x, weights) -> Tensor:
    """``sum_i weights[i] * ||x[i]||^2`` for ``x`` of shape ``(n, d)``; weights are constants."""
    x = _wrap(x)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (x.shape[0],):
        raise ShapeError(f"weights {w.shape} do not match {x.shape}")

    def backward(g):
        x._accum(2.0 * g * w[:, None] * x.data)
    return _make(np.asarray((w * (x.data * x.data).sum(axis=1)).sum()), (x,), backward)
