"""Reverse-mode automatic differentiation over numpy float64 arrays.

A ``Tape`` records every derived ``Tensor`` in creation order (a valid
topological order), so one reverse sweep yields gradients with respect to
all leaf tensors.  Each node stores closures to recompute its value from
its parents and to push its adjoint back to them, which lets a training
loop build the graph once and replay it with updated leaf data instead of
rebuilding node objects every iteration.  Replay writes into each node's
preallocated buffer (``out=``), so a static graph runs allocation-light.

All arithmetic is IEEE-754 double precision and strictly sequential, so
repeated evaluation of the same graph is bit-for-bit reproducible.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "NonFiniteError",
    "DomainError",
    "leaf",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "pow_const",
    "exp",
    "log",
    "sqrt",
    "sin",
    "cos",
    "tanh",
    "sigmoid",
    "matlast",
    "take1",
    "reshape",
    "segment",
    "sum_axes",
    "sum_all",
]


class NonFiniteError(FloatingPointError):
    """A loss term or gradient produced NaN/Inf.  ``term`` names the culprit."""

    def __init__(self, message, term=None, index=None):
        super().__init__(message)
        self.term = term
        self.index = index


class DomainError(ValueError):
    """A primitive was evaluated outside its domain (e.g. log of x <= 0)."""


_ACTIVE: "Tape | None" = None


class Tensor:
    """One node of the computation graph; wraps a float64 ndarray."""

    __slots__ = ("data", "grad", "_fwd", "_bwd", "name")

    # Keep numpy from absorbing Tensor operands into object arrays; binary
    # ops with ndarray on the left then fall back to our reflected methods.
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, data, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._fwd = None
        self._bwd = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def is_leaf(self):
        return self._bwd is None

    def item(self):
        return float(self.data)

    def __repr__(self):
        kind = "leaf" if self.is_leaf else "node"
        return f"Tensor({kind}, shape={self.data.shape})"

    # -- operators ----------------------------------------------------------
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

    def __pow__(self, p):
        return pow_const(self, p)


def leaf(data, name=None):
    """Create a leaf tensor (no recompute/backward closures)."""
    return Tensor(data, name=name)


class Tape:
    """Records derived tensors; supports replay and reverse sweeps."""

    def __init__(self):
        self.nodes = []
        self.leaves = set()

    # -- context management --------------------------------------------------
    def __enter__(self):
        global _ACTIVE
        if _ACTIVE is not None:
            raise RuntimeError("nested tapes are not supported")
        _ACTIVE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE
        _ACTIVE = None
        return False

    # -- execution ------------------------------------------------------------
    def forward(self):
        """Recompute every node from current leaf data, in record order."""
        for node in self.nodes:
            node._fwd()

    def zero_grad(self):
        for node in self.nodes:
            node.grad = None
        for node in self.leaves:
            node.grad = None

    def backward(self, root, zero=True):
        """Reverse sweep seeding d(root)/d(root) = 1."""
        if zero:
            self.zero_grad()
        root.grad = np.ones_like(root.data)
        for node in reversed(self.nodes):
            if node.grad is not None:
                node._bwd()


def _record(out, parents):
    if _ACTIVE is None:
        raise RuntimeError("tape operations require an active Tape context")
    _ACTIVE.nodes.append(out)
    for p in parents:
        if p._bwd is None:
            _ACTIVE.leaves.add(p)
    return out


def _accum(t, g):
    # Non-inplace accumulation: adjoint arrays may be shared between parents.
    if t.grad is None:
        t.grad = g
    else:
        t.grad = t.grad + g


def _unbroadcast(g, shape):
    """Sum gradient g down to ``shape`` (the operand's pre-broadcast shape)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _binary_out(ufunc, a, b):
    """Tensor for ufunc(a, b) with a preallocated result buffer."""
    out = Tensor(ufunc(a.data if isinstance(a, Tensor) else a,
                       b.data if isinstance(b, Tensor) else b))
    return out


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------


def add(a, b):
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        out = _binary_out(np.add, a, b)
        ash, bsh = a.data.shape, b.data.shape
        def fwd():
                np.add(a.data, b.data, out=out.data)

        def bwd():
            g = out.grad
            _accum(a, _unbroadcast(g, ash))
            _accum(b, _unbroadcast(g, bsh))

        out._fwd, out._bwd = fwd, bwd
        return _record(out, (a, b))
    if isinstance(b, Tensor):
        a, b = b, a
    c = np.asarray(b, dtype=np.float64)
    out = Tensor(a.data + c)
    ash = a.data.shape
    def fwd():
            np.add(a.data, c, out=out.data)

    def bwd():
        _accum(a, _unbroadcast(out.grad, ash))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (a,))


def sub(a, b):
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        out = _binary_out(np.subtract, a, b)
        ash, bsh = a.data.shape, b.data.shape
        def fwd():
                np.subtract(a.data, b.data, out=out.data)

        def bwd():
            g = out.grad
            _accum(a, _unbroadcast(g, ash))
            _accum(b, _unbroadcast(-g, bsh))

        out._fwd, out._bwd = fwd, bwd
        return _record(out, (a, b))
    if isinstance(a, Tensor):
        c = np.asarray(b, dtype=np.float64)
        out = Tensor(a.data - c)
        ash = a.data.shape
        def fwd():
                np.subtract(a.data, c, out=out.data)

        def bwd():
            _accum(a, _unbroadcast(out.grad, ash))

        out._fwd, out._bwd = fwd, bwd
        return _record(out, (a,))
    c = np.asarray(a, dtype=np.float64)
    out = Tensor(c - b.data)
    bsh = b.data.shape
    def fwd():
            np.subtract(c, b.data, out=out.data)

    def bwd():
        _accum(b, _unbroadcast(-out.grad, bsh))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (b,))


def mul(a, b):
    if isinstance(a, Tensor) and isinstance(b, Tensor):
        out = _binary_out(np.multiply, a, b)
        ash, bsh = a.data.shape, b.data.shape
        def fwd():
                np.multiply(a.data, b.data, out=out.data)

        def bwd():
            g = out.grad
            _accum(a, _unbroadcast(g * b.data, ash))
            _accum(b, _unbroadcast(g * a.data, bsh))

        out._fwd, out._bwd = fwd, bwd
        return _record(out, (a, b))
    if isinstance(b, Tensor):
        a, b = b, a
    c = np.asarray(b, dtype=np.float64)
    out = Tensor(a.data * c)
    ash = a.data.shape
    def fwd():
            np.multiply(a.data, c, out=out.data)

    def bwd():
        _accum(a, _unbroadcast(out.grad * c, ash))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (a,))


def div(a, b):
    if not isinstance(b, Tensor):
        return mul(a, 1.0 / np.asarray(b, dtype=np.float64))
    if isinstance(a, Tensor):
        out = _binary_out(np.divide, a, b)
        ash, bsh = a.data.shape, b.data.shape
        def fwd():
                np.divide(a.data, b.data, out=out.data)

        def bwd():
            g = out.grad
            _accum(a, _unbroadcast(g / b.data, ash))
            _accum(b, _unbroadcast(-g * out.data / b.data, bsh))

        out._fwd, out._bwd = fwd, bwd
        return _record(out, (a, b))
    c = np.asarray(a, dtype=np.float64)
    out = Tensor(c / b.data)
    bsh = b.data.shape
    def fwd():
            np.divide(c, b.data, out=out.data)

    def bwd():
        _accum(b, _unbroadcast(-out.grad * out.data / b.data, bsh))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (b,))


def neg(a):
    out = Tensor(-a.data)

    def fwd():
        np.negative(a.data, out=out.data)

    def bwd():
        _accum(a, -out.grad)

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (a,))


def pow_const(a, p):
    p = float(p)
    out = Tensor(a.data**p)

    def fwd():
        np.power(a.data, p, out=out.data)

    def bwd():
        _accum(a, out.grad * (p * a.data ** (p - 1.0)))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (a,))


# ---------------------------------------------------------------------------
# elementwise transcendentals
# ---------------------------------------------------------------------------


def _unary(np_fn, grad_fn):
    def op(a):
        out = Tensor(np_fn(a.data))

        def fwd():
            np_fn(a.data, out=out.data)

        def bwd():
            _accum(a, grad_fn(out.grad, a.data, out.data))

        out._fwd, out._bwd = fwd, bwd
        return _record(out, (a,))

    return op


exp = _unary(np.exp, lambda g, x, y: g * y)
log = _unary(np.log, lambda g, x, y: g / x)
sqrt = _unary(np.sqrt, lambda g, x, y: g * (0.5 / y))
sin = _unary(np.sin, lambda g, x, y: g * np.cos(x))
cos = _unary(np.cos, lambda g, x, y: g * (-np.sin(x)))
tanh = _unary(np.tanh, lambda g, x, y: g * (1.0 - y * y))


def sigmoid(a):
    out = Tensor(1.0 / (1.0 + np.exp(-a.data)))
    buf = np.empty_like(out.data)

    def fwd():
        np.negative(a.data, out=buf)
        np.exp(buf, out=buf)
        np.add(buf, 1.0, out=buf)
        np.divide(1.0, buf, out=out.data)

    def bwd():
        s = out.data
        _accum(a, out.grad * (s * (1.0 - s)))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (a,))


# ---------------------------------------------------------------------------
# structural / linear-algebra ops
# ---------------------------------------------------------------------------


def _flat2d(a):
    return a if a.ndim == 2 else a.reshape(-1, a.shape[-1])


def matlast(x, w):
    """Linear map along the last axis: out[..., i] = sum_j w[i, j] * x[..., j].

    Either operand may be a constant ndarray; w is (m_out, m_in).  The
    leading axes are flattened so each product is a single GEMM.
    """
    xt, wt = isinstance(x, Tensor), isinstance(w, Tensor)
    xd = x.data if xt else np.asarray(x, dtype=np.float64)
    wd = w.data if wt else np.asarray(w, dtype=np.float64)
    lead = tuple(range(xd.ndim - 1))
    out = Tensor(_flat2d(xd) @ wd.T)
    out.data = out.data.reshape(xd.shape[:-1] + (wd.shape[0],))
    out2d = _flat2d(out.data)

    if xt and wt:

        def fwd():
            np.matmul(_flat2d(x.data), w.data.T, out=out2d)

        def bwd():
            g = out.grad
            _accum(w, np.tensordot(g, x.data, axes=(lead, lead)))
            _accum(x, (_flat2d(g) @ w.data).reshape(x.data.shape))

        out._fwd, out._bwd = fwd, bwd
        return _record(out, (x, w))
    if wt:

        def fwd():
            np.matmul(_flat2d(xd), w.data.T, out=out2d)

        def bwd():
            _accum(w, np.tensordot(out.grad, xd, axes=(lead, lead)))

        out._fwd, out._bwd = fwd, bwd
        return _record(out, (w,))

    wd_t = wd.T

    def fwd():
        np.matmul(_flat2d(x.data), wd_t, out=out2d)

    def bwd():
        _accum(x, (_flat2d(out.grad) @ wd).reshape(x.data.shape))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (x,))


def take1(x, idx):
    """Gather along axis 1: out[:, p, ...] = x[:, idx[p], ...]."""
    idx = np.asarray(idx, dtype=np.intp)
    d = x.data.shape[1]
    scatter = np.zeros((d, idx.size))
    scatter[idx, np.arange(idx.size)] = 1.0
    out = Tensor(x.data[:, idx])

    def fwd():
        np.take(x.data, idx, axis=1, out=out.data)

    def bwd():
        g = np.tensordot(scatter, out.grad, axes=([1], [1]))
        _accum(x, np.moveaxis(g, 0, 1))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (x,))


def reshape(x, shape):
    shape = tuple(shape)
    orig = x.data.shape
    out = Tensor(x.data.reshape(shape))

    def fwd():
        # x.data's buffer is stable under replay, so the view stays valid
        out.data = x.data.reshape(shape)

    def bwd():
        _accum(x, out.grad.reshape(orig))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (x,))


def segment(x, start, stop):
    """Slice a 1-D tensor; adjoint scatters back into a zero vector."""
    n = x.data.shape[0]
    out = Tensor(x.data[start:stop])

    def fwd():
        out.data = x.data[start:stop]

    def bwd():
        g = np.zeros(n)
        g[start:stop] = out.grad
        _accum(x, g)

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (x,))


def sum_axes(x, axes):
    axes = tuple(axes)
    orig = x.data.shape
    expand = tuple(1 if i in axes else s for i, s in enumerate(orig))
    out = Tensor(x.data.sum(axis=axes))

    def fwd():
        np.sum(x.data, axis=axes, out=out.data)

    def bwd():
        _accum(x, np.broadcast_to(out.grad.reshape(expand), orig))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (x,))


def sum_all(x):
    orig = x.data.shape
    out = Tensor(x.data.sum())

    def fwd():
        out.data = np.asarray(x.data.sum())

    def bwd():
        _accum(x, np.broadcast_to(out.grad, orig))

    out._fwd, out._bwd = fwd, bwd
    return _record(out, (x,))
