"""f-curvature: second f-derivatives, R^f, the correction tensor Theta and bivector operators.

Conventions (coordinate slots, batch axis implicit):

* ``theta[m, x, y, z]`` is the m-th component of Theta_{d_x, d_y} d_z;
* ``rf13[m, x, y, z]`` is the m-th component of the algebraic part of R^f_{d_x, d_y} d_z,
  ``rf04[x, y, z, w] = g(R^f_{d_x, d_y} d_z, d_w)``;
* curvature actions on a tensor S are arrays ``act[x, y, ...]`` holding (R^f_{d_x,d_y} S)(...).

R^f_{X,Y} is a derivation that also differentiates along D(X, Y) = [fX, fY] - f[X, Y]_f,
so on a tensor field S

    R^f_{X,Y} S = nabla^g_{D(X,Y)} S + (R^g_{fX,fY} + Theta_{X,Y}) . S

where Theta uses the torsion in place of K_{[X,Y]_f}.  The two agree on vector
fields that are parallel at the evaluation point.
"""

from __future__ import annotations

import numpy as np

from .chartfield.jets import JetArray, jein, stack
from .fcalc import (
    D_frak_components,
    apply_f,
    f_bracket,
    lie_bracket,
    nabla_0,
    nabla_f,
    nabla_f_dual,
    nabla_f_vector,
)
from .riemann import covariant_derivative, nabla_g
from .tensoralg import batch_orthonormal_frames, bivector_basis, endomorphism_action, letters


# ----------------------------------------------------------------------
# Probe fields


def parallel_jet(values, gamma, contravariant=0):
    """Jet of a tensor field with the given values and vanishing nabla^g at each point.

    ``values`` has shape (N, n, ..., n); the first ``contravariant`` slots are
    upper indices.  Second derivatives are zero, so the field is the
    linear Taylor polynomial of a parallel-at-the-point field.
    """
    values = np.asarray(values, dtype=float)
    gv = gamma.v
    k = values.ndim - 1
    n = gv.shape[1]
    idx = letters(k, avoid="apz")
    d1 = np.zeros(values.shape + (n,))
    for slot in range(k):
        src = idx[:slot] + "p" + idx[slot + 1 :]
        if slot < contravariant:
            d1 -= np.einsum(f"z{idx[slot]}ap,z{src}->z{idx}a", gv, values)
        else:
            d1 += np.einsum(f"zpa{idx[slot]},z{src}->z{idx}a", gv, values)
    d2 = np.zeros(values.shape + (n, n))
    return JetArray(values, d1, d2, n=n, order=2)


# ----------------------------------------------------------------------
# Theta and R^f


def theta_tensor(fc):
    """Theta with the tensorial torsion term, as [m, x, y, z]."""
    if "theta" in fc.cache:
        return fc.cache["theta"]
    K = fc.K
    DK = covariant_derivative(K, fc.gamma, upper=True, A=fc.f)  # [m, x, y, z] = ((nabla^g_{f d_x} K)_{d_y} d_z)^m
    KK = jein("mxp,pyz->mxyz", K, K)
    theta = DK - DK.transpose(0, 2, 1, 3) + KK - KK.transpose(0, 2, 1, 3) - jein("mpz,pxy->mxyz", K, fc.T)
    fc.cache["theta"] = theta
    return theta


def theta_probe(X, Y, Z, fc):
    """Theta_{X,Y} Z assembled term by term for vector fields, with K_{[X,Y]_f} as written."""
    K, gam = fc.K, fc.gamma
    fX, fY = apply_f(X, fc), apply_f(Y, fc)

    def nabla_along(V, W):  # nabla^g_W V
        return jein("i,ik->k", W, V.partial()) + jein("kip,i,p->k", gam, W, V)

    def K_on(A, B):
        return jein("kij,i,j->k", K, A, B)

    def dK(W, A, B):  # (nabla^g_W K)_A B
        return nabla_along(K_on(A, B), W) - K_on(nabla_along(A, W), B) - K_on(A, nabla_along(B, W))

    return (
        dK(fX, Y, Z)
        - dK(fY, X, Z)
        + K_on(X, K_on(Y, Z))
        - K_on(Y, K_on(X, Z))
        - K_on(f_bracket(X, Y, fc), Z)
    )


def rg_pullback(fc):
    """R^g_{f d_x, f d_y} d_z as [m, x, y, z]."""
    return jein("mabz,ax,by->mxyz", fc.ctx.riemann13, fc.f, fc.f)


def rf13_theta(fc):
    return rg_pullback(fc) + theta_tensor(fc)


def rf04_theta(fc):
    return jein("wm,mxyz->xyzw", fc.g, rf13_theta(fc))


def second_f_derivative(S, fc, upper=False, dual=False, zero=False):
    """(nabla^f)^2 S with both direction slots first (after the upper index when present)."""
    if zero:
        op = nabla_0
    else:
        op = nabla_f_dual if dual else nabla_f
    D1 = op(S, fc, upper=upper)
    return op(D1, fc, upper=upper)


def curvature_action_direct(S, fc, contravariant=0, dual=False, zero=False):
    """act[x, y, ...] = (R^f_{d_x, d_y} S)(...) from antisymmetrized second f-derivatives."""
    if contravariant > 1:
        raise ValueError("at most one contravariant slot")
    upper = contravariant == 1
    D2 = second_f_derivative(S, fc, upper=upper, dual=dual, zero=zero)
    k = D2.ndim
    if upper:
        perm = [1, 2, 0] + list(range(3, k))
        D2 = D2.transpose(perm)
    swapped = [1, 0] + list(range(2, k))
    return D2 - D2.transpose(swapped)


def curvature_action_theta(S, fc, contravariant=0):
    """act[x, y, ...] = nabla^g_{D(d_x,d_y)} S + ((R^g_{f d_x, f d_y} + Theta_{xy}) . S)."""
    Dc = D_frak_components(fc)  # [k, x, y]
    upper = contravariant == 1
    DS = nabla_g(S, fc.ctx, upper=upper)
    k = S.ndim
    idx = letters(k, avoid="qxy")
    if upper:
        deriv = jein(f"qxy,{idx[0]}q{idx[1:]}->xy{idx}", Dc, DS)
    else:
        deriv = jein(f"qxy,q{idx}->xy{idx}", Dc, DS)
    endo = rf13_theta(fc).transpose(1, 2, 0, 3)
    return deriv + endomorphism_action(S, endo, contravariant)


def curvature_action_algebraic(S, fc, rf13=None, contravariant=0):
    """((R^g_{f d_x, f d_y} + Theta_{xy}) . S) only, the pointwise part of the action."""
    rf13 = rf13_theta(fc) if rf13 is None else rf13
    return endomorphism_action(S, rf13.transpose(1, 2, 0, 3), contravariant)


def D_derivative_action(S, fc, contravariant=0):
    """nabla^g_{D(d_x, d_y)} S, the differential part of the curvature action."""
    return curvature_action_theta(S, fc, contravariant) - curvature_action_algebraic(S, fc, contravariant=contravariant)


def rf13_direct(fc, dual=False):
    """Algebraic R^f on coordinate slots from second f-derivatives of parallel-at-the-point fields."""
    n = fc.n
    N = fc.ctx.batch
    cols = []
    for k in range(n):
        vals = np.zeros((N, n))
        vals[:, k] = 1.0
        Z = parallel_jet(vals, fc.gamma, contravariant=1)
        act = curvature_action_direct(Z, fc, contravariant=1, dual=dual)  # [x, y, m]
        cols.append(act)
    R = stack(cols, axis=3)  # [x, y, m, z]
    return R.transpose(2, 0, 1, 3)


def curvature_probe(X, Y, Z, fc, dual=False):
    """R^f_{X,Y} Z = nabla^f_X nabla^f_Y Z - nabla^f_Y nabla^f_X Z - nabla^f_{[X,Y]_f} Z for fields."""
    a = nabla_f_vector(X, nabla_f_vector(Y, Z, fc, dual), fc, dual)
    b = nabla_f_vector(Y, nabla_f_vector(X, Z, fc, dual), fc, dual)
    c = nabla_f_vector(f_bracket(X, Y, fc, dual), Z, fc, dual)
    return a - b - c


def scalar_curvature_probe(X, Y, psi, fc):
    """R^f_{X,Y} psi and D(X, Y) psi for a function psi."""
    dpsi = psi.partial()
    fX, fY = apply_f(X, fc), apply_f(Y, fc)
    fYpsi = jein("m,m->", fY, dpsi)
    fXpsi = jein("m,m->", fX, dpsi)
    lhs = (
        jein("m,m->", fX, fYpsi.partial())
        - jein("m,m->", fY, fXpsi.partial())
        - jein("m,m->", apply_f(f_bracket(X, Y, fc), fc), dpsi)
    )
    D = lie_bracket(fX, fY) - apply_f(f_bracket(X, Y, fc), fc)
    rhs = jein("m,m->", D, dpsi)
    return lhs, rhs


def ricci_f(rf04, fc):
    """Ric^f(X, Y) = sum_i R^f(X, e_i, e_i, Y)."""
    return jein("ab,xaby->xy", fc.g_inv, rf04)


def ricci_0(fc):
    """Ric^0(X, Y) = sum_i R^g(fX, f e_i, e_i, Y)."""
    R = fc.ctx.riemann04
    return jein("ab,pqby,px,qa->xy", fc.g_inv, R, fc.f, fc.f)


def theta_trace(fc):
    """g(sum_i Theta_{X, e_i} e_i, Y) as [x, y]."""
    th = theta_tensor(fc)
    return jein("ab,mxab,my->xy", fc.g_inv, th, fc.g)


# ----------------------------------------------------------------------
# Bivector operators (plain per-point arrays)


class BivectorOperators:
    """Matrices on Lambda^2 in the orthonormal bivector basis e_i ^ e_j (i < j).

    ``M[beta, alpha] = g(A(xi_alpha), xi_beta)`` for each operator A.
    ``R_f`` follows g(R^f(X^Y), Z^W) = R^f(X, Y, W, Z); ``K`` is the Theta part
    in the same convention, and ``K_literal`` the opposite slot order.
    """

    def __init__(self, fc, rf04=None):
        n = fc.n
        self.n = n
        self.pairs = bivector_basis(n).pairs
        E = batch_orthonormal_frames(fc.g)  # [z, a, i]: column i is e_i
        self.frame = E
        g = fc.g.v
        f = fc.f.v
        Rg = fc.ctx.riemann04.v
        th = theta_tensor(fc).v
        th04 = np.einsum("zwm,zmxyu->zxyuw", g, th)
        rf = rf04_theta(fc).v if rf04 is None else (rf04.v if isinstance(rf04, JetArray) else rf04)

        def frame4(T):
            return np.einsum("zabcd,zai,zbj,zck,zdl->zijkl", T, E, E, E, E)

        Rg_e = frame4(Rg)
        th_e = frame4(th04)
        rf_e = frame4(rf)
        fe = np.einsum("zab,zbi->zai", f, E)  # f e_i in coordinates
        gfe = np.einsum("zab,zai,zbk->zik", g, fe, E)  # g(f e_i, e_k)
        I = np.array([p[0] for p in self.pairs])
        J = np.array([p[1] for p in self.pairs])
        # alpha columns (i, j), beta rows (k, l)
        ii, jj = I[None, :], J[None, :]
        kk, ll = I[:, None], J[:, None]
        self.R_g = Rg_e[:, ii, jj, ll, kk]
        self.R_f_tensor = rf_e[:, ii, jj, ll, kk]
        self.K = th_e[:, ii, jj, ll, kk]
        self.K_literal = th_e[:, ii, jj, kk, ll]
        self.P = gfe[:, ii, kk] * gfe[:, jj, ll] - gfe[:, ii, ll] * gfe[:, jj, kk]
        self.R_f = self.R_g @ self.P + self.K
        self.R_f_breve = self.R_g @ self.P - self.K
        self.Rg_endo = Rg_e  # g(R^g(e_i^e_j) e_z, e_w) = R^g(i, j, z, w)

    @property
    def size(self):
        return len(self.pairs)

    def xi_matrices(self, basis=None):
        """Frame matrices of the bivectors as endomorphisms, shape (z, alpha, n, n)."""
        n = self.n
        m = self.size
        base = np.zeros((m, n, n))
        for a, (i, j) in enumerate(self.pairs):
            # (e_i ^ e_j) e_z = delta_jz e_i - delta_iz e_j
            base[a, i, j] = 1.0
            base[a, j, i] = -1.0
        if basis is None:
            return np.broadcast_to(base, (self.frame.shape[0], m, n, n))
        return np.einsum("zac,aij->zcij", basis, base)

    def eigenbasis(self):
        """Columns: orthonormal eigenvectors of the symmetrized R^g operator."""
        sym = 0.5 * (self.R_g + np.swapaxes(self.R_g, 1, 2))
        _, V = np.linalg.eigh(sym)
        return V

    def bivector_skew_residual(self):
        """g(R^f(xi) W, Z) + g(R^f(xi) Z, W) over basis xi, from the bivector matrix."""
        xi = self.xi_matrices()
        endo = np.einsum("zba,zbij->zaij", self.R_f, xi)  # R^f(xi_alpha) as frame endomorphism
        return endo + np.swapaxes(endo, 2, 3)

    def expansion_residuals(self, fc):
        """Basis expansion of R^f(xi_b) as a sum over xi_a.

        Returns the residual of the corrected expansion
        sum_a (-g(R^g(xi_a) fX, fY) + g(K(X^Y), xi_a)) xi_a and of the variant
        with both coefficients negated together, for X ^ Y = xi_b.
        """
        E = self.frame
        gf = np.einsum("zab,zbc->zac", fc.g.v, fc.f.v)
        f_e = np.einsum("zai,zab,zbk->zik", E, gf, E)  # (f e_k)^i = g(e_i, f e_k)
        I = [p[0] for p in self.pairs]
        J = [p[1] for p in self.pairs]
        Rg_a = self.Rg_endo[:, I, J]  # [z, a, u, w] = g(R^g(xi_a) e_u, e_w)
        A = np.einsum("zauw,zub,zwb->zab", Rg_a, f_e[:, :, I], f_e[:, :, J])
        corrected = self.R_f - (-A + self.K)
        as_written = self.R_f + (A + self.K)
        return corrected, as_written


def rf13_dual_theta(fc):
    """Breve R^f on coordinate slots: the Theta decomposition with -K* in place of K."""
    from .fcalc import FCalculus

    return rf13_theta(FCalculus(fc.ctx, -fc.K_star))
