"""Second-order spatial jets: value, gradient, and Hessian of scalar fields.

A ``Jet`` carries a batch of values together with first and second
derivatives with respect to the d spatial coordinates.  Hessians are stored
packed: only the upper triangle, in row-major pair order, so symmetry is
exact by construction.  Jet components are either plain numpy arrays or
:class:`~aepinn.tape.Tensor` nodes; in the latter case every chain-rule
term lands on the active tape and one reverse sweep yields parameter
gradients of any scalar built from jets (forward-over-reverse).

Shapes, for a batch of n points in d dimensions and payload shape S
(S = () for scalar fields, S = (m,) inside network layers):

    value  (n, *S)
    grad   (n, d, *S)
    hess   (n, P, *S)     with P = d*(d+1)//2

``order`` 0/1/2 selects how many derivative levels are propagated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tape
from .tape import DomainError, NonFiniteError, Tape, Tensor

MAX_DIM = 3

# Upper-triangle pair tables, row-major: d=2 -> (0,0),(0,1),(1,1).
_PAIR_I = {}
_PAIR_J = {}
_DIAG = {}
for _d in range(1, MAX_DIM + 1):
    pairs = [(i, j) for i in range(_d) for j in range(i, _d)]
    _PAIR_I[_d] = np.array([p[0] for p in pairs], dtype=np.intp)
    _PAIR_J[_d] = np.array([p[1] for p in pairs], dtype=np.intp)
    _DIAG[_d] = np.array([k for k, p in enumerate(pairs) if p[0] == p[1]], dtype=np.intp)


def n_pairs(dim, hmode="full"):
    return dim if hmode == "diag" else dim * (dim + 1) // 2


def pair_index(dim, i, j):
    """Position of (i, j) in the packed Hessian of dimension ``dim``."""
    if i > j:
        i, j = j, i
    return i * dim - i * (i - 1) // 2 + (j - i)


# Hessian propagation mode.  'full' carries all upper-triangle pairs;
# 'diag' carries only the d diagonal second derivatives, which is closed
# under every primitive here (affine maps and elementwise functions never
# mix derivative directions) and is all the PDE residual needs.  The mode
# is ambient so field callables keep their (x, order) signature.
_HESS_MODE = "full"


class hessian_mode:
    def __init__(self, mode):
        if mode not in ("full", "diag"):
            raise ValueError("hessian mode must be 'full' or 'diag'")
        self.mode = mode

    def __enter__(self):
        global _HESS_MODE
        self._saved = _HESS_MODE
        _HESS_MODE = self.mode
        return self

    def __exit__(self, *exc):
        global _HESS_MODE
        _HESS_MODE = self._saved
        return False


# ---------------------------------------------------------------------------
# backend dispatch: Tensor ops go on the tape, ndarrays stay in numpy
# ---------------------------------------------------------------------------


def _is_t(x):
    return isinstance(x, Tensor)


def _expand1(x):
    """Insert a broadcast axis at position 1 (the derivative axis)."""
    if _is_t(x):
        s = x.data.shape
        return tape.reshape(x, (s[0], 1) + s[1:])
    return x[:, None]


def _take1(x, idx):
    if _is_t(x):
        return tape.take1(x, idx)
    return x[:, idx]


def _sum1(x):
    if _is_t(x):
        return tape.sum_axes(x, (1,))
    return x.sum(axis=1)


def _matlast(x, w):
    if _is_t(x) or _is_t(w):
        return tape.matlast(x, w)
    return x @ np.asarray(w, dtype=np.float64).T


def _reshape(x, shape):
    if _is_t(x):
        return tape.reshape(x, shape)
    return x.reshape(shape)


def _data(x):
    return x.data if _is_t(x) else x


# ---------------------------------------------------------------------------
# Jet
# ---------------------------------------------------------------------------


class Jet:
    __slots__ = ("value", "grad", "hess", "dim", "hmode")

    def __init__(self, value, grad=None, hess=None, dim=None, hmode=None):
        self.value = value
        self.grad = grad
        self.hess = hess
        if dim is None:
            if grad is None:
                raise ValueError("dim is required for order-0 jets")
            dim = _data(grad).shape[1]
        self.dim = dim
        self.hmode = hmode or _HESS_MODE

    @property
    def order(self):
        if self.hess is not None:
            return 2
        return 1 if self.grad is not None else 0

    def __add__(self, other):
        if isinstance(other, Jet):
            return add(self, other)
        if isinstance(other, (int, float)):
            return Jet(self.value + float(other), self.grad, self.hess, self.dim, self.hmode)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return sub(self, other)
        if isinstance(other, (int, float)):
            return Jet(self.value - float(other), self.grad, self.hess, self.dim, self.hmode)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, -1.0) + float(other)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Jet):
            return mul(self, other)
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return mul(self, reciprocal(other))
        if isinstance(other, (int, float)):
            return scale(self, 1.0 / float(other))
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, float)):
            return scale(reciprocal(self), float(other))
        return NotImplemented

    def __neg__(self):
        return scale(self, -1.0)

    def __pow__(self, p):
        return power(self, p)


def _check_same(a, b):
    if a.dim != b.dim or a.order != b.order:
        raise ValueError("jet operands must share dimension and order")
    if a.order >= 2 and a.hmode != b.hmode:
        raise ValueError("jet operands must share the Hessian mode")


def _pair_tables(dim, hmode):
    if hmode == "diag":
        idx = np.arange(dim, dtype=np.intp)
        return idx, idx
    return _PAIR_I[dim], _PAIR_J[dim]


# ---------------------------------------------------------------------------
# seeds
# ---------------------------------------------------------------------------


def coord_jets(x, order=2):
    """Per-coordinate scalar jets for points x of shape (n, d)."""
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    hmode = _HESS_MODE
    out = []
    for c in range(d):
        g = h = None
        if order >= 1:
            g = np.zeros((n, d))
            g[:, c] = 1.0
        if order >= 2:
            h = np.zeros((n, n_pairs(d, hmode)))
        out.append(Jet(x[:, c].copy(), g, h, dim=d, hmode=hmode))
    return out


def input_jet(x, order=2):
    """Width-d payload jet of the identity field, for network input layers."""
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    hmode = _HESS_MODE
    g = h = None
    if order >= 1:
        g = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    if order >= 2:
        h = np.zeros((n, n_pairs(d, hmode), d))
    return Jet(x.copy(), g, h, dim=d, hmode=hmode)


def constant_jet(values, dim, order=2):
    """Jet of a spatially constant array (zero derivatives)."""
    values = np.asarray(values, dtype=np.float64)
    hmode = _HESS_MODE
    g = h = None
    if order >= 1:
        g = np.zeros(values.shape[:1] + (dim,) + values.shape[1:])
    if order >= 2:
        h = np.zeros(values.shape[:1] + (n_pairs(dim, hmode),) + values.shape[1:])
    return Jet(values, g, h, dim=dim, hmode=hmode)


# ---------------------------------------------------------------------------
# linear operations
# ---------------------------------------------------------------------------


def add(a, b):
    _check_same(a, b)
    g = h = None
    if a.order >= 1:
        g = a.grad + b.grad
    if a.order >= 2:
        h = a.hess + b.hess
    return Jet(a.value + b.value, g, h, a.dim, a.hmode)


def sub(a, b):
    _check_same(a, b)
    g = h = None
    if a.order >= 1:
        g = a.grad - b.grad
    if a.order >= 2:
        h = a.hess - b.hess
    return Jet(a.value - b.value, g, h, a.dim, a.hmode)


def scale(a, c):
    g = h = None
    if a.order >= 1:
        g = a.grad * c
    if a.order >= 2:
        h = a.hess * c
    return Jet(a.value * c, g, h, a.dim, a.hmode)


def affine(w, b, a):
    """w @ payload (+ b on the value); w is (m_out, m_in), b is (m_out,) or None."""
    v = _matlast(a.value, w)
    if b is not None:
        v = v + b
    g = h = None
    if a.order >= 1:
        g = _matlast(a.grad, w)
    if a.order >= 2:
        h = _matlast(a.hess, w)
    return Jet(v, g, h, a.dim, a.hmode)


def scalar_to_payload(a):
    """Append a payload axis of width 1 to a scalar jet."""
    g = h = None
    v = _reshape(a.value, _data(a.value).shape + (1,))
    if a.order >= 1:
        g = _reshape(a.grad, _data(a.grad).shape + (1,))
    if a.order >= 2:
        h = _reshape(a.hess, _data(a.hess).shape + (1,))
    return Jet(v, g, h, a.dim, a.hmode)


def payload_to_scalar(a):
    """Drop a width-1 payload axis."""
    if _data(a.value).shape[-1] != 1:
        raise ValueError("payload width must be 1")
    g = h = None
    v = _reshape(a.value, _data(a.value).shape[:-1])
    if a.order >= 1:
        g = _reshape(a.grad, _data(a.grad).shape[:-1])
    if a.order >= 2:
        h = _reshape(a.hess, _data(a.hess).shape[:-1])
    return Jet(v, g, h, a.dim, a.hmode)


# ---------------------------------------------------------------------------
# products and chain rules
# ---------------------------------------------------------------------------


def mul(a, b):
    _check_same(a, b)
    d = a.dim
    g = h = None
    v = a.value * b.value
    if a.order >= 1:
        av = _expand1(a.value)
        bv = _expand1(b.value)
        g = a.grad * bv + av * b.grad
    if a.order >= 2:
        if a.hmode == "diag":
            cross = (a.grad * b.grad) * 2.0
        else:
            ii, jj = _PAIR_I[d], _PAIR_J[d]
            cross = _take1(a.grad, ii) * _take1(b.grad, jj) + _take1(a.grad, jj) * _take1(
                b.grad, ii
            )
        h = a.hess * bv + av * b.hess + cross
    return Jet(v, g, h, d, a.hmode)


def apply_unary(a, rule):
    """Chain rule for an elementwise f: rule(value, order) -> (f, f', f'')."""
    d = a.dim
    f, f1, f2 = rule(a.value, a.order)
    g = h = None
    if a.order >= 1:
        f1e = _expand1(f1)
        g = f1e * a.grad
    if a.order >= 2:
        if a.hmode == "diag":
            sym = a.grad * a.grad
        else:
            ii, jj = _PAIR_I[d], _PAIR_J[d]
            sym = _take1(a.grad, ii) * _take1(a.grad, jj)
        h = _expand1(f2) * sym + f1e * a.hess
    return Jet(f, g, h, d, a.hmode)


# -- elementwise rules -------------------------------------------------------
# Each rule shares subexpressions between f, f', f'' and works on Tensors or
# ndarrays alike.


def _rule_exp(v, order):
    f = tape.exp(v) if _is_t(v) else np.exp(v)
    return f, f, f


def _rule_log(v, order):
    if np.any(_data(v) <= 0.0):
        raise DomainError("log requires strictly positive input")
    f = tape.log(v) if _is_t(v) else np.log(v)
    f1 = f2 = None
    if order >= 1:
        f1 = 1.0 / v
    if order >= 2:
        f2 = -f1 * f1
    return f, f1, f2


def _rule_sqrt(v, order):
    if np.any(_data(v) < 0.0):
        raise DomainError("sqrt requires non-negative input")
    f = tape.sqrt(v) if _is_t(v) else np.sqrt(v)
    f1 = f2 = None
    if order >= 1:
        f1 = 0.5 / f
    if order >= 2:
        f2 = -0.5 * f1 / v
    return f, f1, f2


def _rule_sin(v, order):
    f = tape.sin(v) if _is_t(v) else np.sin(v)
    f1 = f2 = None
    if order >= 1:
        f1 = tape.cos(v) if _is_t(v) else np.cos(v)
    if order >= 2:
        f2 = -f
    return f, f1, f2


def _rule_cos(v, order):
    f = tape.cos(v) if _is_t(v) else np.cos(v)
    f1 = f2 = None
    if order >= 1:
        s = tape.sin(v) if _is_t(v) else np.sin(v)
        f1 = -s
    if order >= 2:
        f2 = -f
    return f, f1, f2


def _rule_tanh(v, order):
    f = tape.tanh(v) if _is_t(v) else np.tanh(v)
    f1 = f2 = None
    if order >= 1:
        f1 = 1.0 - f * f
    if order >= 2:
        f2 = -2.0 * f * f1
    return f, f1, f2


def _rule_sigmoid(v, order):
    if _is_t(v):
        f = tape.sigmoid(v)
    else:
        f = 1.0 / (1.0 + np.exp(-v))
    f1 = f2 = None
    if order >= 1:
        f1 = f * (1.0 - f)
    if order >= 2:
        f2 = f1 * (1.0 - 2.0 * f)
    return f, f1, f2


def _rule_identity(v, order):
    one = np.ones_like(_data(v))
    return v, one, np.zeros_like(_data(v))


def _rule_recip(v, order):
    f = 1.0 / v
    f1 = f2 = None
    if order >= 1:
        f1 = -f * f
    if order >= 2:
        f2 = -2.0 * f1 * f
    return f, f1, f2


def exp(a):
    return apply_unary(a, _rule_exp)


def log(a):
    return apply_unary(a, _rule_log)


def sqrt(a):
    return apply_unary(a, _rule_sqrt)


def sin(a):
    return apply_unary(a, _rule_sin)


def cos(a):
    return apply_unary(a, _rule_cos)


def tanh(a):
    return apply_unary(a, _rule_tanh)


def sigmoid(a):
    return apply_unary(a, _rule_sigmoid)


def reciprocal(a):
    return apply_unary(a, _rule_recip)


def power(a, p):
    p = float(p)
    if p == 2.0:
        return mul(a, a)

    def rule(v, order):
        if p != int(p) and np.any(_data(v) < 0.0):
            raise DomainError("fractional power requires non-negative input")
        f = v**p
        f1 = f2 = None
        if order >= 1:
            f1 = p * v ** (p - 1.0)
        if order >= 2:
            f2 = p * (p - 1.0) * v ** (p - 2.0)
        return f, f1, f2

    return apply_unary(a, rule)


def atan2(y, x):
    """Two-argument arctangent of scalar jets (numpy components only)."""
    _check_same(y, x)
    if _is_t(y.value) or _is_t(x.value):
        raise TypeError("atan2 jets are supported on numpy components only")
    d = y.dim
    xv, yv = x.value, y.value
    f = np.arctan2(yv, xv)
    g = h = None
    if y.order >= 1:
        s = xv * xv + yv * yv
        fx = -yv / s
        fy = xv / s
        g = fx[:, None] * x.grad + fy[:, None] * y.grad
    if y.order >= 2:
        s2 = s * s
        fxx = 2.0 * xv * yv / s2
        fyy = -fxx
        fxy = (yv * yv - xv * xv) / s2
        ii, jj = _pair_tables(d, y.hmode)
        gxi, gxj = x.grad[:, ii], x.grad[:, jj]
        gyi, gyj = y.grad[:, ii], y.grad[:, jj]
        h = (
            fx[:, None] * x.hess
            + fy[:, None] * y.hess
            + fxx[:, None] * gxi * gxj
            + fxy[:, None] * (gxi * gyj + gxj * gyi)
            + fyy[:, None] * gyi * gyj
        )
    return Jet(f, g, h, d, y.hmode)


def laplacian(a):
    """Sum of the diagonal second derivatives."""
    if a.order < 2:
        raise ValueError("laplacian requires an order-2 jet")
    if a.hmode == "diag":
        return _sum1(a.hess)
    return _sum1(_take1(a.hess, _DIAG[a.dim]))


def dot_grads(a, b):
    """Pointwise gradient dot product of two scalar jets."""
    return _sum1(a.grad * b.grad)


def directional(a, direction):
    """grad(a) . direction for a constant ndarray direction of shape (n, d)."""
    return _sum1(a.grad * direction)


# ---------------------------------------------------------------------------
# point-evaluation API and parameter gradients
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValueJet:
    """Value, gradient, and full (mirrored) Hessian of a field at one point."""

    value: float
    grad: np.ndarray
    hess: np.ndarray


def unpack_hessian(packed, dim):
    """Expand packed upper-triangle rows (n, P) to full (n, d, d) arrays."""
    n = packed.shape[0]
    full = np.empty((n, dim, dim))
    for k in range(dim * (dim + 1) // 2):
        i, j = int(_PAIR_I[dim][k]), int(_PAIR_J[dim][k])
        full[:, i, j] = packed[:, k]
        full[:, j, i] = packed[:, k]
    return full


def eval_jet(field, x):
    """Exact value, gradient, and Hessian of ``field`` at a single point.

    ``field(points, order)`` must accept an (n, d) batch and return a scalar
    Jet; the point x is a length-d sequence.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    d = x.shape[0]
    with hessian_mode("full"):
        jet = field(x[None, :], 2)
    value = float(_data(jet.value)[0])
    grad = np.array(_data(jet.grad)[0])
    hess = unpack_hessian(_data(jet.hess), d)[0]
    return ValueJet(value, grad, hess)


def loss_gradient(loss_fn, theta):
    """Gradient of a scalar functional with respect to a flat parameter vector.

    ``loss_fn`` must evaluate on either a plain ndarray or a flat Tensor
    (using jet/tape primitives throughout).  Repeated calls with identical
    inputs are bit-identical.
    """
    theta = np.asarray(theta, dtype=np.float64)
    with Tape() as tp:
        root = tape.leaf(theta.copy(), name="theta")
        out = loss_fn(root)
        if not isinstance(out, Tensor):
            raise TypeError("loss_fn must return a Tensor when given one")
        value = float(out.data)
        if not np.isfinite(value):
            raise NonFiniteError(
                f"loss evaluated to a non-finite value ({value})",
                term=_first_nonfinite_name(tp),
            )
        tp.backward(out)
    grad = root.grad if root.grad is not None else np.zeros_like(theta)
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("parameter gradient contains non-finite entries")
    return grad


def _first_nonfinite_name(tp):
    for node in tp.nodes:
        if not np.all(np.isfinite(node.data)):
            return node.name or "unnamed intermediate"
    return None


def check_gradient_fd(loss_fn, theta, step=1e-5):
    """Maximum relative discrepancy between analytic and central-difference
    gradients: max_j |a_j - fd_j|, relative to the larger of the two
    gradient magnitudes, max(||a||_inf, ||fd||_inf, 1e-12).

    Normalizing by the gradient magnitude rather than per component keeps
    the check meaningful in double precision: central differences of a loss
    L carry ~eps*|L|/(2*step) of cancellation noise, which would swamp a
    per-component ratio on any near-zero component.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    theta = np.asarray(theta, dtype=np.float64)
    analytic = loss_gradient(loss_fn, theta)
    fd = np.empty_like(analytic)
    for j in range(theta.size):
        shifted = theta.copy()
        shifted[j] = theta[j] + step
        up = float(loss_fn(shifted))
        shifted[j] = theta[j] - step
        down = float(loss_fn(shifted))
        fd[j] = (up - down) / (2.0 * step)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(fd).max(initial=0.0), 1e-12)
    return float(np.abs(analytic - fd).max(initial=0.0) / scale)
