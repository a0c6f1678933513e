"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every op builds its output eagerly and records a closure that maps the
output gradient to the gradients of its parents.  The graph is rebuilt on
every forward pass and released by :meth:`Tensor.backward`.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np

_DTYPE = np.float32


@contextlib.contextmanager
def float64():
    """Run everything created inside the block in 64-bit precision.

    Only meant for finite-difference oracles; model state stays 32-bit.
    """
    global _DTYPE
    previous = _DTYPE
    _DTYPE = np.float64
    try:
        yield
    finally:
        _DTYPE = previous


def default_dtype():
    return _DTYPE


class GraphConsumedError(RuntimeError):
    """Raised when backward runs over a graph that was already released."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op", "_consumed")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, op="leaf"):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.op = op
        self._consumed = False

    # -- introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    def __len__(self):
        return len(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # -- operators -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(_lift(other)))

    def __rsub__(self, other):
        return add(_lift(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return scale(self, 1.0 / other)
        raise TypeError("only division by a scalar is supported")

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return swap_last(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    # -- backward ----------------------------------------------------------
    def backward(self):
        """Populate ``grad`` on every leaf that requires it.

        The graph is released afterwards, so a second call without a new
        forward pass raises :class:`GraphConsumedError`.
        """
        if self.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {self.shape}")
        if self._consumed:
            raise GraphConsumedError("graph already consumed by backward(); run the forward pass again")
        if not self.requires_grad:
            raise ValueError("loss does not depend on any tensor that requires grad")

        order = _topological(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        for node in order:
            if node._backward is not None:
                node._backward = None
                node._parents = ()
                node._consumed = True


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward, op):
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(data, True, parents, backward, op)
    return Tensor(data, op=op)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: shapes {a.shape} and {b.shape} cannot be broadcast together") from None


# -- elementwise ---------------------------------------------------------------

def add(a, b):
    a, b = _lift(a), _lift(b)
    _broadcast_shape("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), backward, "add")


def mul(a, b):
    a, b = _lift(a), _lift(b)
    _broadcast_shape("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), backward, "mul")


def scale(a, c):
    """Multiply by a Python scalar."""
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def neg(a):
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def exp(a):
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def relu(a):
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a):
    """tanh approximation of GELU."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x ** 3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x ** 2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * dinner),)

    return _make(out, (a,), backward, "gelu")


def dropout(a, p, rng, train=True):
    """Inverted dropout: kept units are scaled by 1/(1-p) at train time."""
    if not train or p == 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    mask = (rng.random(a.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "dropout")


# -- reductions ------------------------------------------------------------------

def tsum(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(out, (a,), backward, "sum")


def mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# -- linear algebra and layout ------------------------------------------------------

def matmul(a, b):
    a, b = _lift(a), _lift(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul: shapes {a.shape} and {b.shape} are incompatible")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ValueError(f"matmul: batch dims of {a.shape} and {b.shape} cannot be broadcast") from None

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _make(a.data @ b.data, (a, b), backward, "matmul")


def reshape(a, shape):
    shape = tuple(shape)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ValueError(f"reshape: cannot reshape {a.shape} into {shape}") from None
    return _make(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None):
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "transpose")


def swap_last(a):
    axes = list(range(a.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(a, axes)


def concat(tensors, axis=0):
    """Concatenate along an existing axis."""
    tensors = [_lift(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(t.shape[i] != ref[i] for i in range(len(ref)) if i != ax):
            raise ValueError(f"concat: shapes {ref} and {t.shape} differ off axis {axis}")
    sizes = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=ax))

    return _make(np.concatenate([t.data for t in tensors], axis=ax), tensors, backward, "concat")


def stack(tensors, axis=0):
    """Stack equally shaped tensors along a new axis."""
    tensors = [_lift(t) for t in tensors]
    for t in tensors[1:]:
        if t.shape != tensors[0].shape:
            raise ValueError(f"stack: shapes {tensors[0].shape} and {t.shape} differ")
    out = np.stack([t.data for t in tensors], axis=axis)
    ax = axis % out.ndim

    def backward(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(tensors)))

    return _make(out, tensors, backward, "stack")


def getitem(a, index):
    out = a.data[index]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return _make(out, (a,), backward, "getitem")


def pick(a, index):
    """Select ``a[..., index[...]]`` along the last axis.

    ``index`` is an integer array shaped like ``a.shape[:-1]``.
    """
    index = np.asarray(index)
    if index.shape != a.shape[:-1]:
        raise ValueError(f"pick: index shape {index.shape} does not match {a.shape[:-1]}")
    expanded = index[..., None]
    out = np.take_along_axis(a.data, expanded, axis=-1)[..., 0]

    def backward(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, expanded, g[..., None], axis=-1)
        return (full,)

    return _make(out, (a,), backward, "pick")


def embedding(table, ids):
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding: ids out of range for table of {table.shape[0]} rows")

    def backward(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        return (full,)

    return _make(table.data[ids], (table,), backward, "embedding")


# -- normalisation ------------------------------------------------------------------

def softmax(a, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (a,), backward, "softmax")


def log_softmax(a, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _make(out, (a,), backward, "log_softmax")


def layer_norm(a, gamma, beta, eps=1e-5):
    """Normalise over the last axis, then apply the affine map."""
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        dxhat = g * gamma.data
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _make(out, (a, gamma, beta), backward, "layer_norm")


# -- initialisation -----------------------------------------------------------------

def he_init(shape, fan_in, rng):
    """Draw N(0, 2/fan_in) entries into a trainable float32 tensor."""
    if fan_in < 1:
        raise ValueError(f"fan_in must be >= 1, got {fan_in}")
    std = math.sqrt(2.0 / fan_in)
    return Tensor(rng.normal(0.0, std, size=shape).astype(np.float32), requires_grad=True)


def uniform_init(shape, fan_in, rng):
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(np.float32), requires_grad=True)


def zeros(shape, requires_grad=True):
    return Tensor(np.zeros(shape, dtype=np.float32), requires_grad=requires_grad)


def ones(shape, requires_grad=True):
    return Tensor(np.ones(shape, dtype=np.float32), requires_grad=requires_grad)
