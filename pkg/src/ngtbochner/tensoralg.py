"""Dense tensor algebra at a point and over batches of points.

Single-point operations act on :class:`TensorValue` (plain component arrays).
The batched helpers at the end act on :class:`~ngtbochner.chartfield.JetArray`
and are what the geometry modules use on sampling grids.

Index conventions: contravariant slots come first, and a (1,2)-tensor ``K``
stores ``K[k, i, j]`` for the k-th component of ``K(d_i, d_j)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .chartfield.jets import JetArray, jein
from .chartfield.torus import Point

SYM_TOL = 1e-12
SKEW_TOL = 1e-10


class SlotError(IndexError):
    pass


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass
class TensorValue:
    """Components of an (r, s)-tensor at a point; contravariant slots first."""

    valence: tuple
    components: np.ndarray
    point: Point = None
    antisymmetric: bool = False
    symmetric: bool = False

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float)
        r, s = self.valence
        comp = self.components
        if comp.ndim != r + s:
            raise ValueError(f"valence {self.valence} needs {r + s} axes, got {comp.ndim}")
        if comp.ndim and len(set(comp.shape)) != 1:
            raise ValueError("all axes must have the chart dimension")
        if self.antisymmetric and not _is_alternating(comp, SYM_TOL):
            raise ValueError("components are not antisymmetric")
        if self.symmetric and not _is_symmetric(comp, SYM_TOL):
            raise ValueError("components are not symmetric")

    @property
    def n(self):
        return self.components.shape[0] if self.components.ndim else 0

    @property
    def rank(self):
        return sum(self.valence)


class FormValue(TensorValue):
    """Alternating covariant tensor."""

    def __init__(self, components, point=None):
        comp = np.asarray(components, dtype=float)
        super().__init__((0, comp.ndim), comp, point, antisymmetric=True)

    @property
    def degree(self):
        return self.valence[1]


@dataclass
class FrameData:
    frame: np.ndarray
    coframe: np.ndarray = field(default=None)

    def __post_init__(self):
        self.frame = np.asarray(self.frame, dtype=float)
        if self.coframe is None:
            self.coframe = np.linalg.inv(self.frame).T


@dataclass(frozen=True)
class BivectorBasis:
    n: int
    pairs: tuple

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


def _is_alternating(comp, tol):
    k = comp.ndim
    for a in range(k - 1):
        perm = list(range(k))
        perm[a], perm[a + 1] = perm[a + 1], perm[a]
        if np.max(np.abs(comp + comp.transpose(perm)), initial=0.0) > tol * max(1.0, np.max(np.abs(comp), initial=0.0)):
            return False
    return True


def _is_symmetric(comp, tol):
    k = comp.ndim
    for a in range(k - 1):
        perm = list(range(k))
        perm[a], perm[a + 1] = perm[a + 1], perm[a]
        if np.max(np.abs(comp - comp.transpose(perm)), initial=0.0) > tol * max(1.0, np.max(np.abs(comp), initial=0.0)):
            return False
    return True


# ----------------------------------------------------------------------
# Single-point operations


def contract(t, slot_up, slot_down):
    """Trace over a contravariant and a covariant slot."""
    r, s = t.valence
    if not 0 <= slot_up < r:
        raise SlotError(f"slot {slot_up} is not a contravariant slot of a {t.valence} tensor")
    if not r <= slot_down < r + s:
        raise SlotError(f"slot {slot_down} is not a covariant slot of a {t.valence} tensor")
    out = np.trace(t.components, axis1=slot_up, axis2=slot_down)
    return TensorValue((r - 1, s - 1), out, t.point)


def lower(t, slot, g):
    """Lower a contravariant slot with the metric; the new covariant slot goes first among covariant slots."""
    r, s = t.valence
    if not 0 <= slot < r:
        raise SlotError(f"slot {slot} is not contravariant")
    comp = np.tensordot(np.asarray(g, dtype=float), t.components, axes=([0], [slot]))
    # comp axis 0 is the new covariant index; move it after the remaining upper slots
    comp = np.moveaxis(comp, 0, r - 1)
    return TensorValue((r - 1, s + 1), comp, t.point)


def raise_index(t, slot, g_inv):
    """Raise a covariant slot; the new contravariant slot goes last among contravariant slots."""
    r, s = t.valence
    if not r <= slot < r + s:
        raise SlotError(f"slot {slot} is not covariant")
    comp = np.tensordot(np.asarray(g_inv, dtype=float), t.components, axes=([1], [slot]))
    comp = np.moveaxis(comp, 0, r)
    return TensorValue((r + 1, s - 1), comp, t.point)


def alternate(t):
    """Signed average over all permutations of the covariant slots."""
    comp = t.components if isinstance(t, TensorValue) else np.asarray(t, dtype=float)
    if isinstance(t, TensorValue) and t.valence[0] != 0:
        raise SlotError("alternation needs a covariant tensor")
    return FormValue(alternate_array(comp, comp.ndim), getattr(t, "point", None))


def _perm_sign(p):
    sign = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def alternate_array(arr, k, offset=None):
    """Alternate the last ``k`` axes of a plain array."""
    arr = np.asarray(arr, dtype=float)
    if k <= 1:
        return arr.copy()
    lead = arr.ndim - k if offset is None else offset
    out = np.zeros_like(arr)
    for perm in itertools.permutations(range(k)):
        axes = list(range(lead)) + [lead + q for q in perm] + list(range(lead + k, arr.ndim))
        out += _perm_sign(perm) * arr.transpose(axes)
    return out / math.factorial(k)


def orthonormal_frame(g):
    """Columns ``e_i`` with g(e_i, e_j) = delta_ij, from the inverse Cholesky factor."""
    g = np.asarray(g, dtype=float)
    if not np.allclose(g, g.T, atol=SYM_TOL, rtol=0):
        raise NotPositiveDefiniteError("metric is not symmetric")
    try:
        low = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("metric is not positive definite") from exc
    if np.min(np.diag(low)) ** 2 <= 1e-12:
        raise NotPositiveDefiniteError("metric has a pivot below 1e-12")
    frame = np.linalg.inv(low).T
    return FrameData(frame, low)


def tensor_inner(a, b, g_inv):
    """Full contraction g^{i1 j1}...g^{ik jk} a_{i..} b_{j..} of two covariant tensors."""
    a = np.asarray(getattr(a, "components", a), dtype=float)
    b = np.asarray(getattr(b, "components", b), dtype=float)
    if a.shape != b.shape:
        raise ValueError("tensor ranks differ")
    out = b
    for _ in range(a.ndim):
        out = np.tensordot(out, g_inv, axes=([0], [1]))
    return float(np.sum(a * out))


def frame_components(t, frame):
    """Components of a covariant tensor evaluated on the frame vectors."""
    comp = np.asarray(getattr(t, "components", t), dtype=float)
    fr = frame.frame if isinstance(frame, FrameData) else np.asarray(frame)
    for _ in range(comp.ndim):
        comp = np.tensordot(comp, fr, axes=([0], [0]))
    return comp


def form_inner(w1, w2, frame):
    """Sum over strictly increasing frame multi-indices of products of components."""
    d1 = w1.components.ndim
    d2 = w2.components.ndim
    if d1 != d2:
        raise ValueError(f"degree mismatch: {d1} vs {d2}")
    a = frame_components(w1, frame)
    b = frame_components(w2, frame)
    if d1 == 0:
        return float(a * b)
    n = a.shape[0]
    total = 0.0
    for idx in itertools.combinations(range(n), d1):
        total += a[idx] * b[idx]
    return float(total)


def bivector_basis(n):
    return BivectorBasis(n, tuple(itertools.combinations(range(n), 2)))


def wedge_endomorphism(x, y, g):
    """Matrix of Z -> g(Y,Z) X - g(X,Z) Y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = np.asarray(g, dtype=float)
    return np.outer(x, g @ y) - np.outer(y, g @ x)


def bivector_matrix(pair, frame, g):
    i, j = pair
    fr = frame.frame if isinstance(frame, FrameData) else np.asarray(frame)
    return wedge_endomorphism(fr[:, i], fr[:, j], g)


def bivector_action(xi, z, frame, g):
    """(e_i ^ e_j) Z = g(e_j, Z) e_i - g(e_i, Z) e_j."""
    return bivector_matrix(xi, frame, g) @ np.asarray(z, dtype=float)


def is_g_skew(endo, g, tol=SKEW_TOL):
    gl = np.asarray(g) @ np.asarray(endo)
    return np.max(np.abs(gl + gl.T), initial=0.0) <= tol * max(1.0, np.max(np.abs(gl), initial=0.0))


def act_on_tensor(endo, s, g=None):
    """(L S)(X_1..X_k) = -sum_a S(.., L X_a, ..) for a covariant S."""
    endo = np.asarray(endo, dtype=float)
    if g is not None and not is_g_skew(endo, g):
        raise ValueError("endomorphism is not skew with respect to g")
    comp = np.asarray(getattr(s, "components", s), dtype=float)
    out = np.zeros_like(comp)
    for a in range(comp.ndim):
        moved = np.tensordot(comp, endo, axes=([a], [0]))
        out -= np.moveaxis(moved, -1, a)
    if isinstance(s, TensorValue):
        return TensorValue(s.valence, out, s.point)
    return out


# ----------------------------------------------------------------------
# Batched helpers (leading batch axis, JetArray or plain per-point arrays)

_ALPHA = "abcdefghijklmnopqrstuvw"


def letters(k, avoid=""):
    pool = [c for c in _ALPHA if c not in avoid]
    if k > len(pool):
        raise ValueError("tensor rank too large")
    return "".join(pool[:k])


def apply_matrix_to_slot(s, mat, slot):
    """out[.., x@slot, ..] = sum_p s[.., p@slot, ..] * mat[p, x] (a covariant pull-back of one slot)."""
    k = s.ndim
    idx = letters(k, avoid="pq")
    src = idx[:slot] + "p" + idx[slot + 1 :]
    return jein(f"{src},p{idx[slot]}->{idx}", s, mat)


def push_slot(s, mat, slot):
    """out[.., x@slot, ..] = sum_p mat[x, p] * s[.., p@slot, ..] (acts on a contravariant slot)."""
    k = s.ndim
    idx = letters(k, avoid="pq")
    src = idx[:slot] + "p" + idx[slot + 1 :]
    return jein(f"{idx[slot]}p,{src}->{idx}", mat, s)


def endomorphism_action(s, endo, contravariant=0):
    """Derivation action of a batch of endomorphisms ``endo[.., k, j]`` on every slot of ``s``.

    ``endo`` may carry leading extra axes (e.g. two direction slots); those
    axes are placed in front of the result.  The first ``contravariant``
    slots of ``s`` are treated as upper indices.
    """
    k = s.ndim
    extra = endo.ndim - 2
    idx = letters(k, avoid="pqrstu")
    lead = "rstu"[:extra]
    out = None
    for slot in range(k):
        src = idx[:slot] + "p" + idx[slot + 1 :]
        if slot < contravariant:
            term = jein(f"{lead}{idx[slot]}p,{src}->{lead}{idx}", endo, s)
        else:
            term = -jein(f"{lead}p{idx[slot]},{src}->{lead}{idx}", endo, s)
        out = term if out is None else out + term
    return out


def trace_pair(t, a, b, g_inv):
    """g^{ij} t[.., i@a, .., j@b, ..]."""
    k = t.ndim
    idx = letters(k, avoid="pq")
    src = list(idx)
    src[a] = "p"
    src[b] = "q"
    keep = "".join(c for i, c in enumerate(idx) if i not in (a, b))
    return jein(f"pq,{''.join(src)}->{keep}", g_inv, t)


def alternating_sum(d):
    """sum_a (-1)^a d[i_a, i_0, .., omit i_a, .., i_k] for an array whose first tensor axis is a direction."""
    k = d.ndim
    out = None
    for a in range(k):
        perm = list(range(1, k))
        perm.insert(a, 0)
        # output axis a takes input axis 0
        inv = [0] * k
        for pos, src in enumerate(perm):
            inv[pos] = src
        term = d.transpose(inv)
        if a % 2:
            term = -term
        out = term if out is None else out + term
    return out


def alternate_jet(t):
    """Signed average over all permutations of the tensor axes of a jet."""
    k = t.ndim
    if k <= 1:
        return t
    out = None
    for perm in itertools.permutations(range(k)):
        term = t.transpose(perm)
        if _perm_sign(perm) < 0:
            term = -term
        out = term if out is None else out + term
    return out.scale(1.0 / math.factorial(k))


def batch_tensor_inner(a, b, g_inv):
    """Pointwise full contraction of two covariant tensors (JetArray values used)."""
    av = a.v if isinstance(a, JetArray) else a
    bv = b.v if isinstance(b, JetArray) else b
    gi = g_inv.v if isinstance(g_inv, JetArray) else g_inv
    k = av.ndim - 1
    out = bv
    for _ in range(k):
        out = np.einsum("z...p,zqp->z...q", out, gi)
        out = np.moveaxis(out, -1, 1)
    # each pass rotated one axis to the front; k passes restore the order
    return np.sum((av * out).reshape(av.shape[0], -1), axis=1)


def batch_form_inner(a, b, g_inv):
    k = (a.v if isinstance(a, JetArray) else a).ndim - 1
    return batch_tensor_inner(a, b, g_inv) / math.factorial(k)


def batch_orthonormal_frames(g):
    """Frames E with E^T g E = I for a batch of metrics (values only)."""
    gv = g.v if isinstance(g, JetArray) else np.asarray(g)
    low = np.linalg.cholesky(gv)
    return np.swapaxes(np.linalg.inv(low), -1, -2)
