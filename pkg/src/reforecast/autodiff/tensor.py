"""Reverse-mode automatic differentiation over dense float64 arrays.

Define-by-run: primitives executed inside a ``with Tape():`` block are
recorded and can be differentiated with ``tape.backward(loss)``. Outside a
tape, the same primitives just compute values, which is how sampling and
evaluation run without bookkeeping overhead. Gradient accumulation follows
tape order, so two identical runs produce bit-identical gradients.
"""

import threading

import numpy as np

from ..errors import NonScalarLoss, ShapeMismatch

_LOCAL = threading.local()


def _stack():
    if not hasattr(_LOCAL, "tapes"):
        _LOCAL.tapes = []
    return _LOCAL.tapes


def active_tape():
    tapes = _stack()
    return tapes[-1] if tapes else None


class Tape:
    """Ordered record of executed primitives for one forward pass."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        popped = _stack().pop()
        assert popped is self
        return False

    def record(self, outputs, parents, vjp):
        self.nodes.append((outputs, parents, vjp))

    def backward(self, loss):
        """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

        Repeated calls keep accumulating; zero the grads to reset.
        """
        if loss.data.size != 1:
            raise NonScalarLoss(f"loss must be scalar, got shape {loss.data.shape}")
        flow = {id(loss): np.ones_like(loss.data)}
        produced = set()
        for outputs, _, _ in self.nodes:
            for out in outputs:
                produced.add(id(out))
        leaves = {}
        for outputs, parents, vjp in reversed(self.nodes):
            gouts = [flow.get(id(out)) for out in outputs]
            if all(g is None for g in gouts):
                continue
            gouts = [
                g if g is not None else np.zeros_like(out.data)
                for g, out in zip(gouts, outputs)
            ]
            gparents = vjp(*gouts)
            for parent, gp in zip(parents, gparents):
                if gp is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in flow:
                    flow[key] = flow[key] + gp
                else:
                    flow[key] = gp
                if key not in produced:
                    leaves[key] = parent
        for key, leaf in leaves.items():
            g = flow[key]
            leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def backward(loss, tape):
    tape.backward(loss)


class Tensor:
    """Dense float64 array plus gradient bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def zero_grad(self):
        self.grad = None

    def item(self):
        return float(self.data)

    # arithmetic ----------------------------------------------------------

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

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def softplus(self):
        return softplus(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes=None):
        return transpose(self, axes)

    @property
    def T(self):
        return transpose(self, None)

    def broadcast_to(self, shape):
        return broadcast_to(self, shape)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, rng=None, scale=None):
    """A leaf tensor with requires_grad set; optionally randomly initialized."""
    if rng is not None:
        data = rng.normal(0.0, scale if scale is not None else 1.0, size=data)
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _emit(out_data, parents, vjp):
    out = Tensor(out_data)
    grad_parents = [p for p in parents if isinstance(p, Tensor) and p.requires_grad]
    if grad_parents:
        out.requires_grad = True
        tape = active_tape()
        if tape is not None:
            tape.record((out,), tuple(parents), vjp)
    return out


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# primitive ops -------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _emit(a.data + b.data, (a, b), vjp)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _emit(a.data - b.data, (a, b), vjp)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def vjp(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _emit(ad * bd, (a, b), vjp)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def vjp(g):
        return (
            _unbroadcast(g / bd, ad.shape),
            _unbroadcast(-g * ad / (bd * bd), bd.shape),
        )

    return _emit(ad / bd, (a, b), vjp)


def neg(a):
    a = as_tensor(a)
    return _emit(-a.data, (a,), lambda g: (-g,))


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0 or ad.ndim > 2 or bd.ndim > 2:
        raise ShapeMismatch(f"matmul supports 1-D/2-D operands, got {ad.shape} @ {bd.shape}")
    if ad.shape[-1] != bd.shape[0]:
        raise ShapeMismatch(f"matmul inner dims differ: {ad.shape} @ {bd.shape}")

    def vjp(g):
        if ad.ndim == 1 and bd.ndim == 1:
            return g * bd, g * ad
        if ad.ndim == 1:  # (k,) @ (k, n) -> (n,)
            return g @ bd.T, np.outer(ad, g)
        if bd.ndim == 1:  # (m, k) @ (k,) -> (m,)
            return np.outer(g, bd), ad.T @ g
        return g @ bd.T, ad.T @ g

    return _emit(ad @ bd, (a, b), vjp)


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    shape = a.data.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _emit(a.data.sum(axis=axis, keepdims=keepdims), (a,), vjp)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    shape = a.data.shape
    if axis is None:
        count = a.data.size
    else:
        count = shape[axis] if isinstance(axis, int) else int(np.prod([shape[i] for i in axis]))

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, shape).copy(),)

    return _emit(a.data.mean(axis=axis, keepdims=keepdims), (a,), vjp)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return _emit(out, (a,), lambda g: (g * out,))


def log(a):
    a = as_tensor(a)
    ad = a.data
    return _emit(np.log(ad), (a,), lambda g: (g / ad,))


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _emit(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a):
    from scipy.special import expit

    a = as_tensor(a)
    out = expit(a.data)
    return _emit(out, (a,), lambda g: (g * out * (1.0 - out),))


def softplus(a):
    """log(1 + e^x), computed as logaddexp(0, x) so large x cannot overflow."""
    from scipy.special import expit

    a = as_tensor(a)
    ad = a.data
    return _emit(np.logaddexp(0.0, ad), (a,), lambda g: (g * expit(ad),))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, splits, axis=axis))

    return _emit(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), vjp)


def _is_basic_index(key):
    items = key if isinstance(key, tuple) else (key,)
    return all(
        isinstance(k, (int, np.integer, slice)) or k is None or k is Ellipsis
        for k in items
    )


def take(a, key):
    """Indexing; the gradient scatters back into the source shape.

    Basic indexing (ints/slices) writes through a view; advanced indexing
    goes through add.at so duplicate indices accumulate.
    """
    a = as_tensor(a)
    shape = a.data.shape
    basic = _is_basic_index(key)

    def vjp(g):
        out = np.zeros(shape)
        if basic:
            out[key] += g
        else:
            np.add.at(out, key, g)
        return (out,)

    return _emit(a.data[key], (a,), vjp)


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        inv = None
    else:
        inv = tuple(np.argsort(axes))

    def vjp(g):
        return (g.transpose(inv) if inv is not None else g.T,)

    return _emit(a.data.transpose(axes) if axes is not None else a.data.T, (a,), vjp)


def reshape(a, shape):
    a = as_tensor(a)
    old = a.data.shape
    return _emit(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def broadcast_to(a, shape):
    a = as_tensor(a)
    old = a.data.shape
    return _emit(
        np.broadcast_to(a.data, shape).copy(), (a,), lambda g: (_unbroadcast(g, old),)
    )
