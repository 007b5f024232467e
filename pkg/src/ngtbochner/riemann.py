"""Riemannian core on a chart: metric data, Levi-Civita calculus and curvature.

Everything is evaluated over a batch of chart points at once.  Arrays are
:class:`JetArray` objects whose tensor axes follow these conventions:

* ``gamma[k, i, j]``  is the Christoffel symbol of nabla_{d_i} d_j along d_k;
* ``riemann13[m, i, j, k]`` is the m-th component of R_{d_i, d_j} d_k with
  R_{X,Y} = nabla_X nabla_Y - nabla_Y nabla_X - nabla_{[X,Y]};
* ``riemann04[i, j, k, l] = g(R_{d_i,d_j} d_k, d_l)``;
* covariant derivatives put the direction index first (after any single
  upper index).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chartfield import expr as E
from .chartfield.jets import BudgetError, inverse, jein
from .chartfield.torus import TorusChart, grid_coordinates
from .tensoralg import alternating_sum, endomorphism_action, letters, trace_pair


class GeometryError(ValueError):
    pass


def _as_nodes(entries, dim):
    out = []
    for row in entries:
        out.append([e if isinstance(e, (E.Const, E.Coord, E.Unary, E.Binary)) else E.parse_expr(str(e), dim) for e in row])
    return out


def _half_sum(a, b, sign):
    op = "add" if sign > 0 else "sub"
    return E.Binary("mul", E.Const(0.5), E.Binary(op, a, b))


def decompose_G(G, dim=None):
    """Split a square array of expressions into symmetric part g and skew part F."""
    n = len(G)
    nodes = _as_nodes(G, dim or n)
    g = [[_half_sum(nodes[i][j], nodes[j][i], +1) for j in range(n)] for i in range(n)]
    F = [[_half_sum(nodes[i][j], nodes[j][i], -1) for j in range(n)] for i in range(n)]
    return g, F


@dataclass
class GeometryInput:
    """Metric g and fundamental 2-form F on a torus chart."""

    chart: TorusChart
    g_components: list
    F_components: list

    def __post_init__(self):
        n = self.chart.dim
        self.g_components = _as_nodes(self.g_components, n)
        self.F_components = _as_nodes(self.F_components, n)
        for name, comp in (("g", self.g_components), ("F", self.F_components)):
            if len(comp) != n or any(len(row) != n for row in comp):
                raise GeometryError(f"{name} must be a {n}x{n} array")

    def validate(self, points=None, require_nonzero_F=True):
        """Check symmetry of g, skewness of F, positivity of g and F != 0 on sample points."""
        n = self.chart.dim
        if points is None:
            points = grid_coordinates(self.chart.with_resolution(min(self.chart.resolution, 6)))
        g = np.stack([[E.evaluate_values(e, points) for e in row] for row in self.g_components])
        F = np.stack([[E.evaluate_values(e, points) for e in row] for row in self.F_components])
        g = np.moveaxis(g, -1, 0)
        F = np.moveaxis(F, -1, 0)
        for i in range(n):
            for j in range(n):
                if np.max(np.abs(g[:, i, j] - g[:, j, i])) > 1e-12:
                    raise GeometryError(f"g is not symmetric: g_{i + 1}{j + 1} differs from g_{j + 1}{i + 1}")
                if np.max(np.abs(F[:, i, j] + F[:, j, i])) > 1e-12:
                    raise GeometryError(f"F is not antisymmetric: F_{i + 1}{j + 1} vs F_{j + 1}{i + 1}")
        if np.min(np.linalg.eigvalsh(g)) <= 1e-12:
            raise GeometryError("g is not positive definite on the grid")
        if require_nonzero_F and np.max(np.abs(F)) == 0.0:
            raise GeometryError("F vanishes identically")
        return True


class EvalContext:
    """Pointwise geometric data over a batch of points, computed lazily and cached.

    Later modules attach their own quantities (contorsion, curvature
    corrections, ...) to ``extra``.
    """

    def __init__(self, g_nodes, F_nodes, points, order=2):
        self.points = np.asarray(points, dtype=float)
        self.n = self.points.shape[1]
        self.order = order
        self.g_nodes = g_nodes
        self.F_nodes = F_nodes
        self.extra = {}

    @classmethod
    def from_geometry(cls, geometry, points, order=2):
        return cls(geometry.g_components, geometry.F_components, points, order)

    @property
    def batch(self):
        return self.points.shape[0]

    def field(self, nodes, order=None):
        return E.evaluate_array(nodes, self.points, self.order if order is None else order)

    @cached_property
    def g(self):
        g = self.field(self.g_nodes)
        # symmetrize exactly so that round-off in the expressions cannot leak in
        return (g + g.transpose(1, 0)).scale(0.5)

    @cached_property
    def F(self):
        F = self.field(self.F_nodes)
        return (F - F.transpose(1, 0)).scale(0.5)

    @cached_property
    def g_inv(self):
        gi = inverse(self.g)
        return (gi + gi.transpose(1, 0)).scale(0.5)

    @cached_property
    def f(self):
        """f^k_j = g^{ki} F_ij, so that g(X, fY) = F(X, Y)."""
        return jein("ki,ij->kj", self.g_inv, self.F)

    @cached_property
    def dg(self):
        """dg[a, b, c] = d_a g_bc."""
        return self.g.partial()

    @cached_property
    def gamma_lower(self):
        """gamma_lower[i, j, l] = g(nabla_{d_i} d_j, d_l)."""
        dg = self.dg
        return (dg.transpose(0, 1, 2) + dg.transpose(1, 0, 2) - dg.transpose(1, 2, 0)).scale(0.5)

    @cached_property
    def gamma(self):
        return jein("kl,ijl->kij", self.g_inv, self.gamma_lower)

    @cached_property
    def riemann13(self):
        gam = self.gamma
        dgam = gam.partial()  # [a, k, i, j] = d_a gamma^k_ij
        first = dgam.transpose(1, 0, 2, 3) - dgam.transpose(1, 2, 0, 3)
        quad = jein("mip,pjk->mijk", gam, gam)
        return first + quad - quad.transpose(0, 2, 1, 3)

    @cached_property
    def riemann04(self):
        return jein("lm,mijk->ijkl", self.g, self.riemann13)

    @cached_property
    def ricci(self):
        """Ric(X, Y) = sum_a R(X, e_a, e_a, Y)."""
        return jein("ab,xaby->xy", self.g_inv, self.riemann04)

    @cached_property
    def scalar_curvature(self):
        return jein("xy,xy->", self.g_inv, self.ricci)

    @cached_property
    def sqrt_det_g(self):
        return np.sqrt(np.linalg.det(self.g.v))


def f_from_F(ctx, rng=None, tol=1e-10):
    """The endomorphism f with g(X, fY) = F(X, Y), verified on random vectors."""
    f = ctx.f
    rng = np.random.default_rng(0) if rng is None else rng
    x = rng.standard_normal((ctx.batch, ctx.n))
    y = rng.standard_normal((ctx.batch, ctx.n))
    g, F, fv = ctx.g.v, ctx.F.v, f.v
    lhs = np.einsum("zi,zij,zjk,zk->z", x, g, fv, y)
    rhs = np.einsum("zi,zij,zj->z", x, F, y)
    skew = np.einsum("zij,zjk,zi,zk->z", g, fv, x, y) + np.einsum("zij,zjk,zk,zi->z", g, fv, x, y)
    scale = 1.0 + np.max(np.abs(F))
    if max(np.max(np.abs(lhs - rhs)), np.max(np.abs(skew))) > tol * scale:
        raise GeometryError("f fails g(X, fY) = F(X, Y)")
    return f


def christoffel(ctx):
    return ctx.gamma


def covariant_derivative(S, gamma, upper=False, A=None, C=None):
    """Covariant derivative of a tensor jet with the direction slot first.

    ``S`` is covariant, or has exactly one leading contravariant slot when
    ``upper`` is set.  The result is ``A^m_i (d_m S + gamma_m . S) + C_i . S``:
    ``gamma`` is a linear connection used along the direction ``A d_i``
    (identity when ``A`` is None) and ``C[k, i, j]`` an algebraic part added
    along ``d_i`` itself.  The direction index comes right after the upper
    index when there is one, otherwise first.
    """
    k = S.ndim
    if S.order < 1:
        raise BudgetError("covariant derivative needs a first-order jet")
    idx = letters(k, avoid="mipq")
    top = S.order - 1  # d_m S already lost one order; higher terms would be discarded

    def connection_terms(coeff, dirletter):
        out = None
        for slot in range(k):
            src = idx[:slot] + "p" + idx[slot + 1 :]
            if upper and slot == 0:
                term = jein(f"{idx[0]}{dirletter}p,{src}->{dirletter}{idx}", coeff, S, order=top)
            else:
                term = -jein(f"p{dirletter}{idx[slot]},{src}->{dirletter}{idx}", coeff, S, order=top)
            out = term if out is None else out + term
        return out

    D = S.partial()
    if k:
        D = D + connection_terms(gamma, "m")
    if A is not None:
        D = jein(f"mi,m{idx}->i{idx}", A, D, order=top)
    if C is not None and k:
        D = D + connection_terms(C, "i")
    if upper:
        perm = [1, 0] + list(range(2, k + 1))
        D = D.transpose(perm)
    return D


def nabla_g(S, ctx, upper=False):
    return covariant_derivative(S, ctx.gamma, upper=upper)


def exterior_d(omega):
    """(d w)_{i0..ik} = sum_a (-1)^a d_{i_a} w_{..omit i_a..}."""
    return alternating_sum(omega.partial())


def codifferential(omega, ctx):
    """delta w = -g^{ij} (nabla_{d_i} w)(d_j, ...)."""
    if omega.ndim == 0:
        return None
    return -trace_pair(nabla_g(omega, ctx), 0, 1, ctx.g_inv)


def hodge_laplacian(omega, ctx):
    k = omega.ndim
    out = codifferential(exterior_d(omega), ctx)
    if k:
        out = out + exterior_d(codifferential(omega, ctx))
    return out


def bochner_laplacian(S, ctx):
    """nabla^* nabla S = -g^{ij} (nabla^2 S)(d_i, d_j, ...)."""
    return -trace_pair(nabla_g(nabla_g(S, ctx), ctx), 0, 1, ctx.g_inv)


def curvature_action(S, riemann13, contravariant=0):
    """act[i, j, ...] = (R_{d_i, d_j} S)(...) acting as a derivation on the slots of S."""
    endo = riemann13.transpose(1, 2, 0, 3)
    return endomorphism_action(S, endo, contravariant)


def weitzenboeck_from_action(action, g_inv):
    """sum_a sum_i (R_{e_i, X_a} S)(X_1, .., e_i @ a, .., X_k) from a curvature-action array."""
    k = action.ndim - 2
    idx = letters(k, avoid="ij")
    out = None
    for a in range(k):
        src = idx[:a] + "j" + idx[a + 1 :]
        term = jein(f"ij,i{idx[a]}{src}->{idx}", g_inv, action)
        out = term if out is None else out + term
    return out


def classical_weitzenboeck(S, ctx):
    return weitzenboeck_from_action(curvature_action(S, ctx.riemann13), ctx.g_inv)
