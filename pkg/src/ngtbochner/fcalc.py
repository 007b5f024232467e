"""The f-calculus: f-connections, f-brackets, f-divergence and the f-Laplacians.

For X, Y vector fields:

* nabla^0_X Y   = nabla^g_{fX} Y
* nabla^f_X Y   = nabla^0_X Y + K_X Y
* breve nabla^f_X Y = nabla^0_X Y - K*_X Y   (the dual f-connection)

The f-derivative of a tensor puts the direction slot first (after a single
upper index, when present), exactly as :func:`riemann.covariant_derivative`.
Frame sums over an orthonormal frame are taken as g^{-1} contractions.
"""

from __future__ import annotations

from functools import cached_property

from .chartfield.jets import jein
from .einstein import K_star, E_field, E_star_lower, div_g_f, lower_K, torsion_from_K
from .riemann import covariant_derivative
from .tensoralg import alternating_sum, endomorphism_action, letters, trace_pair


class FCalculus:
    """Bundle of the context and the difference tensor K with cached derived data."""

    def __init__(self, ctx, K):
        self.ctx = ctx
        self.K = K
        self.cache = {}

    @property
    def n(self):
        return self.ctx.n

    @property
    def f(self):
        return self.ctx.f

    @property
    def g(self):
        return self.ctx.g

    @property
    def g_inv(self):
        return self.ctx.g_inv

    @property
    def gamma(self):
        return self.ctx.gamma

    @cached_property
    def K_star(self):
        return K_star(self.K, self.ctx)

    @cached_property
    def K_lower(self):
        return lower_K(self.K, self.ctx)

    @cached_property
    def T(self):
        return torsion_from_K(self.K)

    @cached_property
    def E(self):
        return E_field(self.K, self.ctx)

    @cached_property
    def E_star(self):
        """E* as a vector."""
        return jein("kl,l->k", self.g_inv, E_star_lower(self.K, self.ctx))

    @cached_property
    def Phi(self):
        """Phi^k_ij with (nabla^f_{d_i} Y)^k = f^m_i d_m Y^k + Phi^k_ij Y^j."""
        return jein("mi,kmj->kij", self.f, self.gamma) + self.K

    @cached_property
    def Phi_dual(self):
        return jein("mi,kmj->kij", self.f, self.gamma) - self.K_star

    @cached_property
    def Df(self):
        """(nabla^g_{d_a} f)^k_y as [k, a, y]."""
        return covariant_derivative(self.f, self.gamma, upper=True)

    @cached_property
    def div_g_f(self):
        return div_g_f(self.ctx)


# ----------------------------------------------------------------------
# Derivatives


def nabla_0(S, fc, upper=False):
    return covariant_derivative(S, fc.gamma, upper=upper, A=fc.f)


def nabla_f(S, fc, upper=False):
    """f-derivative: direction slot first, one derivative order consumed."""
    return covariant_derivative(S, fc.gamma, upper=upper, A=fc.f, C=fc.K)


def nabla_f_dual(S, fc, upper=False):
    return covariant_derivative(S, fc.gamma, upper=upper, A=fc.f, C=-fc.K_star)


def nabla_f_coefficients(S, fc):
    """nabla^f of a vector field through the coefficient array Phi (independent assembly)."""
    dS = S.partial()  # [m, k]
    return jein("mi,mk->ki", fc.f, dS) + jein("kij,j->ki", fc.Phi, S)


def along(D, X, upper=False):
    """Contract the direction slot of a derivative array with the vector field X."""
    idx = letters(D.ndim, avoid="z")
    if upper:
        return jein(f"{idx[0]}z{idx[2:]},z->{idx[0]}{idx[2:]}", D, X)
    return jein(f"z{idx[1:]},z->{idx[1:]}", D, X)


def evaluate_on(S, *vectors):
    """S(X_1, ..., X_k) for a covariant tensor and vector fields (order follows the slots)."""
    out = S
    for X in vectors:
        k = out.ndim
        idx = letters(k, avoid="z")
        out = jein(f"z{idx[1:]},z->{idx[1:]}", out, X)
    return out


def apply_f(X, fc):
    return jein("kp,p->k", fc.f, X)


def covariant_along(Y, X, coeffs):
    """(nabla_X Y)^k = X^i (d_i Y^k + C^k_ip Y^p) for a linear connection with coefficients C."""
    return jein("i,ik->k", X, Y.partial()) + jein("kip,i,p->k", coeffs, X, Y)


def nabla_f_vector(X, Y, fc, dual=False):
    """nabla^f_X Y (or the dual) for vector fields X, Y."""
    D = (nabla_f_dual if dual else nabla_f)(Y, fc, upper=True)
    return along(D, X, upper=True)


def lie_bracket(U, V):
    """[U, V]^k = U^m d_m V^k - V^m d_m U^k."""
    return jein("m,mk->k", U, V.partial()) - jein("m,mk->k", V, U.partial())


def f_bracket(X, Y, fc, dual=False):
    """[X, Y]_f = nabla^f_X Y - nabla^f_Y X."""
    return nabla_f_vector(X, Y, fc, dual) - nabla_f_vector(Y, X, fc, dual)


def zero_bracket(X, Y, fc):
    """[X, Y]_0 = nabla^g_{fX} Y - nabla^g_{fY} X."""
    fX, fY = apply_f(X, fc), apply_f(Y, fc)
    return covariant_along(Y, fX, fc.gamma) - covariant_along(X, fY, fc.gamma)


def f_bracket_via_torsion(X, Y, fc):
    """[X, Y]_0 + T(X, Y)."""
    return zero_bracket(X, Y, fc) + jein("kij,i,j->k", fc.T, X, Y)


def D_frak(X, Y, fc, dual=False):
    """[fX, fY] - f[X, Y]_f for vector fields X, Y."""
    fX, fY = apply_f(X, fc), apply_f(Y, fc)
    return lie_bracket(fX, fY) - apply_f(f_bracket(X, Y, fc, dual), fc)


def D_frak_from_f(X, Y, fc):
    """(nabla^g f)(fX, Y) - (nabla^g f)(fY, X) - f T(X, Y)."""
    a = jein("kay,ax,x,y->k", fc.Df, fc.f, X, Y)
    b = jein("kay,ax,x,y->k", fc.Df, fc.f, Y, X)
    return a - b - jein("kp,pxy,x,y->k", fc.f, fc.T, X, Y)


def D_frak_components(fc):
    """D(d_x, d_y) as [k, x, y] (tensorial in both arguments)."""
    a = jein("kay,ax->kxy", fc.Df, fc.f)
    return a - a.transpose(0, 2, 1) - jein("kp,pxy->kxy", fc.f, fc.T)


def jacobiator(X, Y, Z, fc):
    """sum over cyclic permutations of [X, [Y, Z]_f]_f."""
    total = None
    for a, b, c in ((X, Y, Z), (Y, Z, X), (Z, X, Y)):
        term = f_bracket(a, f_bracket(b, c, fc), fc)
        total = term if total is None else total + term
    return total


def f_jacobiator_identity(X, Y, Z, fc):
    """f J(X,Y,Z) + sum_cyc ([fX, D(Y,Z)] + D(X, [Y,Z]_f)); vanishes identically."""
    fJ = apply_f(jacobiator(X, Y, Z, fc), fc)
    Dc = D_frak_components(fc)
    total = fJ
    for a, b, c in ((X, Y, Z), (Y, Z, X), (Z, X, Y)):
        total = total + lie_bracket(apply_f(a, fc), D_frak(b, c, fc))
        total = total + jein("kxy,x,y->k", Dc, a, f_bracket(b, c, fc))
    return total


# ----------------------------------------------------------------------
# Divergences and adjoints


def div_g_vector(V, ctx):
    """div_g V = d_k V^k + Gamma^k_kp V^p."""
    return jein("kk->", V.partial()) + jein("kkp,p->", ctx.gamma, V)


def div_f(X, fc):
    """trace(Y -> nabla^f_Y X)."""
    return jein("kk->", nabla_f(X, fc, upper=True))


def div_f_expanded(X, fc):
    """div_g(fX) - (div_g f)(X) + g(X, E*)."""
    return div_g_vector(apply_f(X, fc), fc.ctx) - jein("j,j->", fc.div_g_f, X) + jein("kl,k,l->", fc.g, X, fc.E_star)


def nabla_star(S, fc, dual=False):
    """-sum_i (nabla^f_{e_i} S)(e_i, ...) (or with the dual f-connection)."""
    D = (nabla_f_dual if dual else nabla_f)(S, fc)
    return -trace_pair(D, 0, 1, fc.g_inv)


def nabla0_star(S, fc):
    return -trace_pair(nabla_0(S, fc), 0, 1, fc.g_inv)


def K_action(omega, K):
    """(K_{d_i} w)(...) = -sum_a w(.., K_{d_i} X_a, ..) as [i, ...]."""
    return endomorphism_action(omega, K.transpose(1, 0, 2))


def interior_K_trace(omega, K, fc):
    """sum_i iota_{e_i}(K_{e_i} w)."""
    return trace_pair(K_action(omega, K), 0, 1, fc.g_inv)


def flat(X, fc):
    return jein("kl,l->k", fc.g, X)


# ----------------------------------------------------------------------
# Exterior calculus


def d_f(omega, fc, dual=False):
    """d^f w(X_0..X_k) = sum_i (-1)^i (nabla^f w)(X_i, X_0, .., omit X_i, ..)."""
    return alternating_sum((nabla_f_dual if dual else nabla_f)(omega, fc))


def d_0(omega, fc):
    return alternating_sum(nabla_0(omega, fc))


def delta_f(omega, fc, dual=False):
    return nabla_star(omega, fc, dual)


def delta_0(omega, fc):
    """-sum_i (nabla^g w)(f e_i, e_i, ...)."""
    return nabla0_star(omega, fc)


def d_f_bracket_formula(omega, vectors, fc, dual=False):
    """d^f w(X_0..X_k) via directional derivatives along fX_i and f-brackets."""
    k = len(vectors) - 1
    total = None
    for i in range(k + 1):
        rest = vectors[:i] + vectors[i + 1 :]
        val = evaluate_on(omega, *rest) if rest else omega
        term = jein("m,m->", apply_f(vectors[i], fc), val.partial())
        if i % 2:
            term = -term
        total = term if total is None else total + term
    for i in range(k + 1):
        for j in range(i + 1, k + 1):
            rest = [v for a, v in enumerate(vectors) if a not in (i, j)]
            br = f_bracket(vectors[i], vectors[j], fc, dual)
            term = evaluate_on(omega, br, *rest)
            if (i + j) % 2:
                term = -term
            total = total + term
    return total


def laplacians(omega, fc):
    """All Laplace-type operators of a form (order-2 jets needed)."""
    k = omega.ndim
    out = {}
    out["d_f"] = d_f(omega, fc)
    out["d_f_dual"] = d_f(omega, fc, dual=True)
    out["d_0"] = d_0(omega, fc)
    out["nabla_f"] = nabla_f(omega, fc)
    out["bochner_f"] = nabla_star(out["nabla_f"], fc)
    out["bochner_f_mixed"] = nabla_star(out["nabla_f"], fc, dual=True)
    dd = nabla_star(out["d_f"], fc, dual=True)
    dd_plain = nabla_star(out["d_f"], fc)
    d0d0 = delta_0(out["d_0"], fc)
    if k:
        out["delta_f"] = delta_f(omega, fc)
        out["delta_f_dual"] = delta_f(omega, fc, dual=True)
        out["delta_0"] = delta_0(omega, fc)
        out["hodge_f"] = d_f(out["delta_f_dual"], fc) + dd
        out["hodge_f_dual"] = d_f(out["delta_f"], fc) + dd_plain
        out["hodge_0"] = d0d0 + d_0(out["delta_0"], fc)
    else:
        out["hodge_f"] = dd
        out["hodge_f_dual"] = dd_plain
        out["hodge_0"] = d0d0
    return out


def f_gradient(psi, fc):
    """Vector field V with g(V, Y) = dpsi(fY)."""
    return jein("kl,m,ml->k", fc.g_inv, psi.partial(), fc.f)


def function_laplacian(psi, fc):
    """Delta^f psi = div_f of the f-gradient."""
    return div_f(f_gradient(psi, fc), fc)


def function_laplacian_0(psi, fc):
    """Delta^0 psi = trace(Y -> nabla^0_Y V) with V the f-gradient."""
    return jein("kk->", nabla_0(f_gradient(psi, fc), fc, upper=True))


def einstein_condition_probe_residual(K, ctx, X, Y, Z):
    """X G(Y,Z) - G(nabla_Y X, Z) - G(Y, nabla_X Z) - G([X,Y], Z) for vector fields."""
    G = ctx.g + ctx.F
    coeffs = ctx.gamma + K
    GYZ = jein("ab,a,b->", G, Y, Z)
    XG = jein("m,m->", X, GYZ.partial())
    nYX = covariant_along(X, Y, coeffs)
    nXZ = covariant_along(Z, X, coeffs)
    br = lie_bracket(X, Y)
    return XG - jein("ab,a,b->", G, nYX, Z) - jein("ab,a,b->", G, Y, nXZ) - jein("ab,a,b->", G, br, Z)


def torsion_probe(X, Y, K, ctx):
    """nabla_X Y - nabla_Y X - [X, Y] for nabla = nabla^g + K."""
    coeffs = ctx.gamma + K
    return covariant_along(Y, X, coeffs) - covariant_along(X, Y, coeffs) - lie_bracket(X, Y)
