"""Order-2 truncated Taylor jets over a batch of chart points.

A :class:`JetArray` carries, for every point of a batch, the value of a
tensor-valued quantity together with its first and second partial
derivatives with respect to the chart coordinates.  Arithmetic follows the
product and chain rules exactly, so no finite differences are involved.

The ``order`` attribute is the derivative budget: how many derivative
orders are still trustworthy.  Taking a formal partial derivative consumes
one order; an operation that would need an order that is no longer
available raises :class:`BudgetError` instead of returning garbage.

Array layout: ``v`` has shape ``(N, *shape)``, ``d1`` has shape
``(N, *shape, n)`` and ``d2`` has shape ``(N, *shape, n, n)``.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass

import numpy as np

_BATCH = "Z"
_DER1 = "X"
_DER2 = "Y"
_LETTERS = string.ascii_lowercase


class BudgetError(ArithmeticError):
    """Raised when a formula needs more derivative orders than were supplied."""


class JetDivisionError(ZeroDivisionError):
    """Raised when a jet is divided by a value that is numerically zero."""


DIVISION_FLOOR = 1e-12


class JetArray:
    """Batched tensor field with value, gradient and Hessian."""

    __slots__ = ("v", "d1", "d2", "order", "n")

    def __init__(self, v, d1=None, d2=None, n=None, order=None):
        v = np.asarray(v, dtype=float)
        if v.ndim == 0:
            raise ValueError("JetArray needs a leading batch axis")
        if n is None:
            if d1 is None:
                raise ValueError("dimension n is required when no derivatives are given")
            n = d1.shape[-1]
        avail = 0 if d1 is None else (1 if d2 is None else 2)
        if order is None:
            order = avail
        if order > avail:
            raise ValueError(f"order {order} requested but only {avail} derivative slots supplied")
        self.v = v
        self.n = int(n)
        self.order = int(order)
        self.d1 = d1 if order >= 1 else None
        self.d2 = d2 if order >= 2 else None

    # ------------------------------------------------------------------
    @property
    def shape(self):
        return self.v.shape[1:]

    @property
    def batch(self):
        return self.v.shape[0]

    @property
    def ndim(self):
        return self.v.ndim - 1

    def __repr__(self):
        return f"JetArray(shape={self.shape}, batch={self.batch}, n={self.n}, order={self.order})"

    @classmethod
    def constant(cls, value, batch, n, order=2):
        value = np.asarray(value, dtype=float)
        v = np.broadcast_to(value, (batch,) + value.shape).copy()
        d1 = np.zeros(v.shape + (n,)) if order >= 1 else None
        d2 = np.zeros(v.shape + (n, n)) if order >= 2 else None
        return cls(v, d1, d2, n=n, order=order)

    @classmethod
    def coordinates(cls, points):
        """Jets of the coordinate functions x_1..x_n at the given points."""
        points = np.asarray(points, dtype=float)
        batch, n = points.shape
        v = points.copy()
        d1 = np.broadcast_to(np.eye(n), (batch, n, n)).copy()
        d2 = np.zeros((batch, n, n, n))
        return cls(v, d1, d2, n=n, order=2)

    def truncate(self, order):
        order = min(order, self.order)
        return JetArray(self.v, self.d1, self.d2, n=self.n, order=order)

    def value(self):
        return self.v

    # ------------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, JetArray):
            if other.n != self.n:
                raise ValueError("jets over different chart dimensions")
            return other
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return JetArray(self.v + np.asarray(other, dtype=float), self.d1, self.d2, n=self.n, order=self.order)
        order = min(self.order, o.order)
        return JetArray(
            self.v + o.v,
            self.d1 + o.d1 if order >= 1 else None,
            self.d2 + o.d2 if order >= 2 else None,
            n=self.n,
            order=order,
        )

    __radd__ = __add__

    def __neg__(self):
        return JetArray(
            -self.v,
            -self.d1 if self.order >= 1 else None,
            -self.d2 if self.order >= 2 else None,
            n=self.n,
            order=self.order,
        )

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = float(c)
        return JetArray(
            c * self.v,
            c * self.d1 if self.order >= 1 else None,
            c * self.d2 if self.order >= 2 else None,
            n=self.n,
            order=self.order,
        )

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            if np.isscalar(other):
                return self.scale(other)
            c = np.asarray(other, dtype=float)
            return JetArray(
                self.v * c,
                self.d1 * c[..., None] if self.order >= 1 else None,
                self.d2 * c[..., None, None] if self.order >= 2 else None,
                n=self.n,
                order=self.order,
            )
        return elementwise_product(self, o)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return self.scale(1.0 / float(other))
        return elementwise_product(self, reciprocal(o))

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    # ------------------------------------------------------------------
    def partial(self):
        """Formal partial derivative; the derivative index becomes the first tensor axis."""
        if self.order < 1:
            raise BudgetError("derivative order budget exhausted")
        v = np.moveaxis(self.d1, -1, 1)
        d1 = np.moveaxis(self.d2, -2, 1) if self.order >= 2 else None
        return JetArray(v, d1, None, n=self.n, order=self.order - 1)

    def transpose(self, *axes):
        """Permute tensor axes (batch and derivative axes are left in place)."""
        if len(axes) == 1 and not isinstance(axes[0], int):
            axes = tuple(axes[0])
        k = self.ndim
        if sorted(axes) != list(range(k)):
            raise ValueError(f"invalid permutation {axes} for rank {k}")
        perm = (0,) + tuple(a + 1 for a in axes)
        v = self.v.transpose(perm)
        d1 = self.d1.transpose(perm + (k + 1,)) if self.order >= 1 else None
        d2 = self.d2.transpose(perm + (k + 1, k + 2)) if self.order >= 2 else None
        return JetArray(v, d1, d2, n=self.n, order=self.order)

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            raise IndexError("ellipsis indexing is not supported on JetArray")
        full = (slice(None),) + key
        return JetArray(
            self.v[full],
            self.d1[full] if self.order >= 1 else None,
            self.d2[full] if self.order >= 2 else None,
            n=self.n,
            order=self.order,
        )

    def reshape(self, *shape):
        if len(shape) == 1 and not isinstance(shape[0], int):
            shape = tuple(shape[0])
        b = self.batch
        return JetArray(
            self.v.reshape((b,) + shape),
            self.d1.reshape((b,) + shape + (self.n,)) if self.order >= 1 else None,
            self.d2.reshape((b,) + shape + (self.n, self.n)) if self.order >= 2 else None,
            n=self.n,
            order=self.order,
        )


def stack(jets, axis=0):
    """Stack jets of equal shape along a new tensor axis."""
    jets = list(jets)
    order = min(j.order for j in jets)
    n = jets[0].n
    ax = axis + 1
    v = np.stack([j.v for j in jets], axis=ax)
    d1 = np.stack([j.d1 for j in jets], axis=ax) if order >= 1 else None
    d2 = np.stack([j.d2 for j in jets], axis=ax) if order >= 2 else None
    return JetArray(v, d1, d2, n=n, order=order)


def elementwise_product(a, b):
    """Pointwise product of two jets with identical (or scalar) shape."""
    order = min(a.order, b.order)
    av, bv = a.v, b.v
    v = av * bv
    d1 = d2 = None
    if order >= 1:
        d1 = a.d1 * bv[..., None] + av[..., None] * b.d1
    if order >= 2:
        d2 = (
            a.d2 * bv[..., None, None]
            + av[..., None, None] * b.d2
            + a.d1[..., :, None] * b.d1[..., None, :]
            + b.d1[..., :, None] * a.d1[..., None, :]
        )
    return JetArray(v, d1, d2, n=a.n, order=order)


def apply_function(u, f0, f1, f2):
    """Chain rule for a scalar function with known value and first two derivatives at u."""
    order = u.order
    d1 = f1[..., None] * u.d1 if order >= 1 else None
    d2 = None
    if order >= 2:
        d2 = f2[..., None, None] * u.d1[..., :, None] * u.d1[..., None, :] + f1[..., None, None] * u.d2
    return JetArray(f0, d1, d2, n=u.n, order=order)


def sin(u):
    s, c = np.sin(u.v), np.cos(u.v)
    return apply_function(u, s, c, -s)


def cos(u):
    s, c = np.sin(u.v), np.cos(u.v)
    return apply_function(u, c, -s, -c)


def exp(u):
    e = np.exp(u.v)
    return apply_function(u, e, e, e)


def reciprocal(u):
    if np.any(np.abs(u.v) < DIVISION_FLOOR):
        raise JetDivisionError("division by a value below 1e-12 in magnitude")
    r = 1.0 / u.v
    return apply_function(u, r, -r * r, 2.0 * r * r * r)


def integer_power(u, p):
    p = int(p)
    if p == 0:
        return JetArray.constant(np.ones(u.shape), u.batch, u.n, order=u.order)
    if p < 0:
        return reciprocal(integer_power(u, -p))
    x = u.v
    f0 = x**p
    f1 = p * x ** (p - 1)
    f2 = p * (p - 1) * x ** (p - 2) if p >= 2 else np.zeros_like(x)
    return apply_function(u, f0, f1, f2)


# ----------------------------------------------------------------------
# Einstein summation with the product rule.


def _parse_spec(spec, count):
    if "->" not in spec:
        raise ValueError("jein needs an explicit output: 'ab,bc->ac'")
    lhs, out = spec.split("->")
    terms = lhs.split(",")
    if len(terms) != count:
        raise ValueError(f"spec has {len(terms)} operands, got {count}")
    for t in terms + [out]:
        bad = set(t) - set(_LETTERS)
        if bad:
            raise ValueError(f"only lowercase index letters are allowed, got {sorted(bad)}")
    return terms, out


def _sum_out(term, arr, keep):
    kept = "".join(c for c in term if c in keep)
    if kept == term:
        return term, arr
    return kept, np.einsum(f"{term}->{kept}", arr)


def pair_einsum(spec, a, b):
    """Two-operand ``einsum`` routed through batched ``matmul``.

    Shared indices kept in the output become matmul batch axes, which
    ``numpy.einsum`` would otherwise loop over without BLAS.  Specs with a
    repeated index inside one operand fall back to ``numpy.einsum``.
    """
    lhs, out = spec.split("->")
    ta, tb = lhs.split(",")
    if len(set(ta)) < len(ta) or len(set(tb)) < len(tb) or len(set(out)) < len(out):
        return np.einsum(spec, a, b)
    ta, a = _sum_out(ta, a, tb + out)
    tb, b = _sum_out(tb, b, ta + out)
    size = {c: a.shape[i] for i, c in enumerate(ta)}
    size.update({c: b.shape[i] for i, c in enumerate(tb)})
    bat = [c for c in ta if c in tb and c in out]
    con = [c for c in ta if c in tb and c not in out]
    left = [c for c in ta if c not in tb]
    right = [c for c in tb if c not in ta]
    nb = [size[c] for c in bat]
    nl = math.prod(size[c] for c in left)
    nc = math.prod(size[c] for c in con)
    nr = math.prod(size[c] for c in right)
    pa = np.transpose(a, [ta.index(c) for c in bat + left + con]).reshape(nb + [nl, nc])
    pb = np.transpose(b, [tb.index(c) for c in bat + con + right]).reshape(nb + [nc, nr])
    res = np.matmul(pa, pb).reshape([size[c] for c in bat + left + right])
    order = bat + left + right
    return np.transpose(res, [order.index(c) for c in out])


def jein(spec, *operands, order=None):
    """``numpy.einsum`` over jets, propagating first and second derivatives.

    Operands may be :class:`JetArray` (batched) or plain arrays, which are
    treated as exact constants shared by every point.
    """
    terms, out = _parse_spec(spec, len(operands))
    jets = [i for i, op in enumerate(operands) if isinstance(op, JetArray)]
    if not jets:
        raise ValueError("jein needs at least one JetArray operand")
    n = operands[jets[0]].n
    top = min(operands[i].order for i in jets)
    if order is not None:
        top = min(top, order)
    opt = len(operands) > 2

    def term_spec(i, extra):
        if isinstance(operands[i], JetArray):
            return _BATCH + terms[i] + extra
        return terms[i]

    def arr(i, which):
        op = operands[i]
        if not isinstance(op, JetArray):
            return np.asarray(op, dtype=float)
        return {0: op.v, 1: op.d1, 2: op.d2}[which]

    def contract(extras, which, out_extra):
        specs = [term_spec(i, extras.get(i, "")) for i in range(len(operands))]
        args = [arr(i, which.get(i, 0)) for i in range(len(operands))]
        full = ",".join(specs) + "->" + _BATCH + out + out_extra
        if len(args) == 2:
            return pair_einsum(full, *args)
        return np.einsum(full, *args, optimize=opt)

    v = contract({}, {}, "")
    d1 = d2 = None
    if top >= 1:
        d1 = sum(contract({i: _DER1}, {i: 1}, _DER1) for i in jets)
    if top >= 2:
        d2 = sum(contract({i: _DER1 + _DER2}, {i: 2}, _DER1 + _DER2) for i in jets)
        for a in jets:
            for b in jets:
                if a != b:
                    d2 = d2 + contract({a: _DER1, b: _DER2}, {a: 1, b: 1}, _DER1 + _DER2)
    return JetArray(v, d1, d2, n=n, order=top)


def inverse(a):
    """Jet of the matrix inverse of a batched (n, n) jet."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("inverse needs square matrices")
    inv = np.linalg.inv(a.v)
    d1 = d2 = None
    if a.order >= 1:
        # dV_i = -V dA_i V
        t = np.einsum("zab,zbcx->zacx", inv, a.d1)
        d1 = -np.einsum("zabx,zbc->zacx", t, inv)
    if a.order >= 2:
        vdv = np.einsum("zab,zbcx->zacx", inv, a.d1)  # V dA_x
        term = np.einsum("zabx,zbcy,zcd->zadxy", vdv, vdv, inv)
        d2 = term + term.transpose(0, 1, 2, 4, 3)
        d2 = d2 - np.einsum("zab,zbcxy,zcd->zadxy", inv, a.d2, inv)
    return JetArray(inv, d1, d2, n=a.n, order=a.order)


# ----------------------------------------------------------------------
# Single-point scalar jets.


@dataclass
class Jet2Scalar:
    """Value, gradient and Hessian of a scalar at one point."""

    value: float
    grad: np.ndarray
    hess: np.ndarray
    order_budget: int = 2

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=float)
        self.hess = np.asarray(self.hess, dtype=float)
        if self.order_budget not in (0, 1, 2):
            raise ValueError("order_budget must be 0, 1 or 2")


def jet_derivative(j, i):
    """Jet of the i-th partial derivative of the quantity described by ``j``."""
    if j.order_budget < 1:
        raise BudgetError("derivative order budget exhausted")
    n = j.grad.shape[0]
    grad = j.hess[i].copy() if j.order_budget >= 2 else np.zeros(n)
    return Jet2Scalar(float(j.grad[i]), grad, np.zeros((n, n)), j.order_budget - 1)
