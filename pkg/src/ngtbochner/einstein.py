"""Einstein connections nabla = nabla^g + K and the hypothesis residuals built on them.

Component conventions (tensor axes after the batch axis):

* ``K[k, i, j]`` is the k-th component of K_{d_i} d_j;
* ``K_lower[i, j, l] = g(K_{d_i} d_j, d_l)``, written K(X, Y, Z) in formulas;
* ``T[k, i, j]`` is the k-th component of T(d_i, d_j) = K_{d_i} d_j - K_{d_j} d_i;
* ``T_lower[i, j, l] = g(T(d_i, d_j), d_l)``.

The Einstein condition is (nabla_X G)(Y, Z) = -G(T(X, Y), Z) with G = g + F.
Since nabla^g g = 0 it is linear in K:

    (nabla^g_X F)(Y, Z) = G(K_Y X, Z) + G(Y, K_X Z).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chartfield import expr as E
from .chartfield.jets import JetArray, jein, stack
from .riemann import covariant_derivative, exterior_d

MODES = ("zero", "explicit_K", "explicit_T", "skew_from_dF", "nearly_kahler", "constant_nullspace", "solve_einstein")
T_FORMULAS = ("einstein", "metric")


class ContorsionError(ValueError):
    pass


@dataclass
class ContorsionModel:
    """How the difference tensor K of the connection is obtained.

    ``K`` or ``T`` hold n x n x n nested lists of expressions for the lowered
    components K(d_i, d_j, d_l) or T(d_i, d_j, d_l).
    """

    mode: str = "zero"
    K: list = None
    T: list = None
    formula: str = "einstein"
    constant_K: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContorsionError(f"unknown contorsion mode {self.mode!r}; valid modes: {', '.join(MODES)}")
        if self.formula not in T_FORMULAS:
            raise ContorsionError(f"unknown torsion formula {self.formula!r}; valid: {', '.join(T_FORMULAS)}")
        if self.mode == "explicit_K" and self.K is None:
            raise ContorsionError("mode explicit_K needs K components")
        if self.mode in ("explicit_T", "nearly_kahler") and self.T is None:
            raise ContorsionError(f"mode {self.mode} needs T components")

    def payload_nodes(self, dim):
        data = self.K if self.mode == "explicit_K" else self.T
        if data is None:
            return None
        arr = np.empty((dim, dim, dim), dtype=object)
        try:
            for i in range(dim):
                for j in range(dim):
                    for k in range(dim):
                        item = data[i][j][k]
                        arr[i, j, k] = item if not isinstance(item, (str, int, float)) else E.parse_expr(str(item), dim)
        except (IndexError, TypeError) as exc:
            raise ContorsionError(f"payload must be a {dim}x{dim}x{dim} array of expressions") from exc
        if np.shape(data) != (dim, dim, dim):
            raise ContorsionError(f"payload must be a {dim}x{dim}x{dim} array of expressions")
        return arr.tolist()


# ----------------------------------------------------------------------
# Index gymnastics


def lower_K(K, ctx):
    return jein("lk,kij->ijl", ctx.g, K)


def raise_K(K_lower, ctx):
    return jein("kl,ijl->kij", ctx.g_inv, K_lower)


def K_star(K, ctx):
    """(K*)^k_ij with g(K*_X Y, Z) = g(Y, K_X Z)."""
    Kl = lower_K(K, ctx)
    return jein("kl,ilj->kij", ctx.g_inv, Kl)


def torsion_from_K(K, ctx=None):
    """T(X, Y) = K_X Y - K_Y X, returned as (1,2) and, with a context, lowered (0,3)."""
    T = K - K.transpose(0, 2, 1)
    if ctx is None:
        return T
    return T, lower_K(T, ctx)


def K_from_torsion(T_lower, ctx, formula="einstein"):
    """Lowered K from lowered T.

    ``einstein``:  2K(X,Y,Z) = T(X,Y,Z) + T(X,Z,fY) + T(Y,Z,fX);
    ``metric``:    2K(Y,Z,X) = T(X,Y,Z) + T(Y,Z,X) + T(X,Z,Y).
    """
    if formula == "einstein":
        f = ctx.f
        out = T_lower + jein("xzp,py->xyz", T_lower, f) + jein("yzp,px->xyz", T_lower, f)
        return out.scale(0.5)
    if formula == "metric":
        # K_lower[y, z, x]
        s = T_lower + T_lower.transpose(2, 0, 1) + T_lower.transpose(0, 2, 1)
        return s.transpose(1, 2, 0).scale(0.5)
    raise ContorsionError(f"unknown formula {formula!r}")


def E_field(K, ctx):
    """E = sum_i K_{e_i} e_i as a vector."""
    return jein("ij,kij->k", ctx.g_inv, K)


def E_star_lower(K, ctx):
    """(E*)^flat_z = sum_i g(e_i, K_{e_i} d_z)."""
    return jein("ij,izj->z", ctx.g_inv, lower_K(K, ctx))


# ----------------------------------------------------------------------
# Einstein linear system


def einstein_matrix(G):
    """Matrix of K -> G(K_Y X, Z) + G(Y, K_X Z) acting on flattened K[p, a, b].

    ``G`` has shape (..., n, n); the result has shape (..., n^3, n^3) with rows
    indexed by (x, y, z) and columns by (p, a, b).
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[-1]
    eye = np.eye(n)
    # first term: G[p, z] delta[a, y] delta[b, x]
    t1 = np.einsum("...pz,ay,bx->...xyzpab", G, eye, eye)
    # second term: G[y, p] delta[a, x] delta[b, z]
    t2 = np.einsum("...yp,ax,bz->...xyzpab", G, eye, eye)
    return (t1 + t2).reshape(G.shape[:-2] + (n**3, n**3))


def constant_einstein_nullspace(G, tol=1e-10):
    """Orthonormal basis (columns) of constant K solving the homogeneous Einstein system."""
    L = einstein_matrix(G)
    _, s, vt = np.linalg.svd(L)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return vt[rank:].T


def skew_subspace_basis(n):
    """Orthonormal basis of K[p, a, b] with lowered components skew in the last two slots (flat metric)."""
    rows = []
    for a in range(n):
        for b in range(n):
            for p in range(n):
                if b < p:
                    v = np.zeros((n, n, n))
                    v[p, a, b] = 1.0
                    v[b, a, p] = -1.0
                    rows.append(v.ravel() / np.sqrt(2.0))
    return np.array(rows).T


def subspace_intersection(A, B, tol=1e-10):
    """Orthonormal basis of span(A) intersect span(B) for orthonormal column bases."""
    if A.shape[1] == 0 or B.shape[1] == 0:
        return np.zeros((A.shape[0], 0))
    M = np.hstack([A, -B])
    _, s, vt = np.linalg.svd(M)
    null = vt[np.sum(s > tol) :].T
    if null.shape[1] == 0:
        return np.zeros((A.shape[0], 0))
    vecs = A @ null[: A.shape[1]]
    q, r = np.linalg.qr(vecs)
    keep = np.abs(np.diag(r)) > tol
    return q[:, keep]


def canonical_vector(basis):
    """Deterministic unit vector in a subspace: projection of the best-aligned coordinate axis."""
    proj = basis @ basis.T
    m = int(np.argmax(np.round(np.diag(proj), 12)))
    v = proj[:, m]
    v = v / np.linalg.norm(v)
    return v if v[m] > 0 else -v


def synthesize_nullspace(F_const, n=None):
    """Constant Einstein contorsion on the flat torus for a constant 2-form.

    Returns ``(K, info)`` where ``K[p, a, b]`` is a unit-norm solution (or zeros when
    the nullspace is trivial) and ``info`` records the nullspace dimensions.
    """
    F_const = np.asarray(F_const, dtype=float)
    n = F_const.shape[0] if n is None else n
    G = np.eye(n) + F_const
    null = constant_einstein_nullspace(G)
    skew = skew_subspace_basis(n)
    both = subspace_intersection(null, skew)
    info = {"nullspace_dim": int(null.shape[1]), "skew_intersection_dim": int(both.shape[1])}
    if null.shape[1] == 0:
        return np.zeros((n, n, n)), info
    v = canonical_vector(null)
    return v.reshape(n, n, n), info


def solve_einstein(ctx):
    """Pointwise solve of the Einstein system for K with first derivatives.

    With b = nabla^g F and L(G) the linear map of :func:`einstein_matrix`,
    K = L^{-1} b and dK = L^{-1}(db - dL.K).  ``dL.K`` is assembled directly
    from dG so the dense derivative of L is never formed.
    """
    n = ctx.n
    G = ctx.g + ctx.F
    b = covariant_derivative(ctx.F, ctx.gamma)  # [x, y, z] = (nabla^g_x F)(y, z)
    L = einstein_matrix(G.v)
    N = ctx.batch
    rhs = b.v.reshape(N, n**3)
    K = np.linalg.solve(L, rhs[..., None])[..., 0].reshape(N, n, n, n)
    d1 = None
    if b.order >= 1 and G.order >= 1:
        dG = G.d1  # [z, a, b, m]
        dLK = np.einsum("zpcm,zpyx->zxycm", dG, K) + np.einsum("zypm,zpxc->zxycm", dG, K)
        drhs = (b.d1 - dLK).reshape(N, n**3, n)
        d1 = np.linalg.solve(L, drhs).reshape(N, n, n, n, n)
    return JetArray(K, d1, None, n=n, order=1 if d1 is not None else 0)


# ----------------------------------------------------------------------
# Building K


def build_K(model, ctx):
    """K[k, i, j] for the selected model, cached on the context."""
    if "K" in ctx.extra:
        return ctx.extra["K"]
    n = ctx.n
    mode = model.mode
    if mode == "zero":
        K = JetArray.constant(np.zeros((n, n, n)), ctx.batch, n, order=ctx.order)
    elif mode == "explicit_K":
        K = raise_K(ctx.field(model.payload_nodes(n)), ctx)
    elif mode == "explicit_T":
        T_lower = ctx.field(model.payload_nodes(n))
        K = raise_K(K_from_torsion(T_lower, ctx, model.formula), ctx)
    elif mode == "nearly_kahler":
        T_lower = ctx.field(model.payload_nodes(n))
        K = raise_K(T_lower, ctx).scale(0.5)
    elif mode == "skew_from_dF":
        T_lower = exterior_d(ctx.F).scale(-1.0 / 3.0)
        T = raise_K(T_lower, ctx)
        # K_X Y = 1/2 [T(fX, Y) - T(X, fY) + T(X, Y)]
        K = (jein("kpj,pi->kij", T, ctx.f) - jein("kip,pj->kij", T, ctx.f) + T).scale(0.5)
    elif mode == "constant_nullspace":
        if model.constant_K is None:
            F0 = ctx.F.v[0]
            if np.max(np.abs(ctx.F.v - F0)) > 1e-12 or np.max(np.abs(ctx.g.v - np.eye(n))) > 1e-12:
                raise ContorsionError("constant_nullspace needs the flat metric and a constant F")
            model.constant_K, _ = synthesize_nullspace(F0)
        K = JetArray.constant(model.constant_K, ctx.batch, n, order=ctx.order)
    else:
        K = solve_einstein(ctx)
    ctx.extra["K"] = K
    return K


def einstein_connection(K, ctx):
    """Connection coefficients of nabla = nabla^g + K."""
    return ctx.gamma + K


def connection_from_torsion_lower(ctx, K):
    """g(nabla_{d_i} d_j, d_l) assembled from the torsion alone (Levi-Civita part plus torsion terms)."""
    _, T_lower = torsion_from_K(K, ctx)
    return ctx.gamma_lower + K_from_torsion(T_lower, ctx, "einstein")


# ----------------------------------------------------------------------
# Residual tensors (component arrays, evaluated on coordinate slots)


def nabla_G_tensor(K, ctx):
    """(nabla_X G)(Y, Z) for nabla = nabla^g + K, as [x, y, z]."""
    G = ctx.g + ctx.F
    return covariant_derivative(G, einstein_connection(K, ctx))


def einstein_condition_tensor(K, ctx):
    """(nabla_X G)(Y, Z) + G(T(X, Y), Z)."""
    G = ctx.g + ctx.F
    T = torsion_from_K(K)
    return nabla_G_tensor(K, ctx) + jein("pz,pxy->xyz", G, T)


def nabla_g_tensor(K, ctx):
    """(nabla_X g)(Y, Z) = -K(X, Y, Z) - K(X, Z, Y)."""
    Kl = lower_K(K, ctx)
    return -(Kl + Kl.transpose(0, 2, 1))


def condE2_tensor(K, ctx):
    """K(X, Y, Z) + K(X, Z, Y)."""
    Kl = lower_K(K, ctx)
    return Kl + Kl.transpose(0, 2, 1)


def condE2_torsion_form(K, ctx):
    """T(X,Y,Z) + T(X,Z,Y) + T(X,Z,fY) + T(X,Y,fZ)."""
    _, Tl = torsion_from_K(K, ctx)
    f = ctx.f
    return Tl + Tl.transpose(0, 2, 1) + jein("xzp,py->xyz", Tl, f) + jein("xyp,pz->xyz", Tl, f)


def commutator_K(K):
    """[K_X, K_Y] as C[k, x, y, j]."""
    a = jein("kxp,pyj->kxyj", K, K)
    return a - a.transpose(0, 2, 1, 3)


def condKKZ_tensor(K, ctx):
    """g([K_X,K_Y]Z, W) + g([K_X,K_Y]W, Z) as [x, y, z, w]."""
    C = jein("lk,kxyj->xyjl", ctx.g, commutator_K(K))
    return C + C.transpose(0, 1, 3, 2)


def f_torsion_tensor(K, ctx):
    """T(fX, Y) - T(X, fY) as [k, x, y]."""
    T = torsion_from_K(K)
    return jein("kpy,px->kxy", T, ctx.f) - jein("kxp,py->kxy", T, ctx.f)


def torsion_condition_tensor(K, ctx):
    """T(Z,X,Y) + T(Z,Y,X) - T(X,Z,fY) - T(Y,Z,fX) as [x, y, z]."""
    _, Tl = torsion_from_K(K, ctx)
    f = ctx.f
    lhs = Tl.transpose(1, 2, 0) + Tl.transpose(2, 1, 0)
    # Tl.transpose(1,2,0)[x,y,z] = Tl[z,x,y]; Tl.transpose(2,1,0)[x,y,z] = Tl[z,y,x]
    rhs = jein("xzp,py->xyz", Tl, f) + jein("yzp,px->xyz", Tl, f)
    return lhs - rhs


def skew_torsion_residual(K, ctx):
    """Deviation of the lowered torsion from total skew-symmetry."""
    _, Tl = torsion_from_K(K, ctx)
    return Tl + Tl.transpose(0, 2, 1)


def eq_A_T_tensor(K, ctx):
    """T(fY, Z) - T(Y, fZ) and T(Y, fZ) + f T(Y, Z), stacked on a leading axis."""
    T = torsion_from_K(K)
    f = ctx.f
    a = jein("kpz,py->kyz", T, f)
    b = jein("kyp,pz->kyz", T, f)
    c = jein("kp,pyz->kyz", f, T)
    return stack([a - b, b + c])


def nabla_F_tensor(K, ctx):
    return covariant_derivative(ctx.F, einstein_connection(K, ctx))


def nabla_g_vs_nabla_F_tensor(K, ctx):
    """(nabla g)(Z, X, Y) - (nabla F)(X, Y, Z) - (nabla F)(Y, X, Z) as [x, y, z]."""
    ng = covariant_derivative(ctx.g, einstein_connection(K, ctx))
    nF = nabla_F_tensor(K, ctx)
    return ng.transpose(1, 2, 0) - nF - nF.transpose(1, 0, 2)


def nabla_gF_display_tensors(K, ctx, literal_F_slots=False):
    """Residuals of the two torsion expressions for nabla g and nabla F.

    The nabla F expression holds with the direction in the first slot,
    (nabla_X F)(Y, Z); ``literal_F_slots`` compares it with (nabla_Z F)(X, Y)
    instead, which fails for non-skew Einstein contorsions.
    """
    conn = einstein_connection(K, ctx)
    ng = covariant_derivative(ctx.g, conn)
    nF = covariant_derivative(ctx.F, conn)
    _, Tl = torsion_from_K(K, ctx)
    f = ctx.f
    TfY = jein("xzp,py->xyz", Tl, f)  # T(X, Z, fY) at [x, y, z]
    TfZ = jein("xyp,pz->xyz", Tl, f)  # T(X, Y, fZ)
    g_rhs = (Tl + Tl.transpose(0, 2, 1) + TfZ + TfY).scale(-0.5)
    # (nabla_X F)(Y, Z) = 1/2 [T(X,Z,Y) - T(X,Y,Z) - T(X,Y,fZ) + T(X,Z,fY)], stored at [x, y, z]
    F_rhs = (Tl.transpose(0, 2, 1) - Tl - TfZ + TfY).scale(0.5)
    lhs = nF.transpose(1, 2, 0) if literal_F_slots else nF
    return ng - g_rhs, lhs - F_rhs


def lemma_iii_tensor(K, ctx):
    """(nabla_X F)(Y, Z) + (nabla_Y F)(X, Z)."""
    nF = nabla_F_tensor(K, ctx)
    return nF + nF.transpose(1, 0, 2)


@dataclass
class ConditionResiduals:
    r_metein: float = 0.0
    r_nabla_g: float = 0.0
    r_condE2: float = 0.0
    r_condKKZ: float = 0.0
    r_condPP: float = 0.0
    r_condPPstat: float = 0.0
    r_torsion_cond: float = 0.0
    r_f_torsion: float = 0.0

    def as_dict(self):
        return dict(self.__dict__)

    def merge(self, other):
        for k, v in other.__dict__.items():
            setattr(self, k, max(getattr(self, k), v))
        return self


def sup(x):
    v = x.v if isinstance(x, JetArray) else np.asarray(x)
    return float(np.max(np.abs(v), initial=0.0))


def D_frak_tensor(K, ctx):
    """D(X, Y) = [fX, fY] - f[X, Y]_f on coordinate fields, as [k, x, y]."""
    Df = covariant_derivative(ctx.f, ctx.gamma, upper=True)  # [k, a, y] = (nabla^g_a f)^k_y
    f = ctx.f
    T = torsion_from_K(K)
    a = jein("kay,ax->kxy", Df, f)
    return a - a.transpose(0, 2, 1) - jein("kp,pxy->kxy", f, T)


def div_g_f(ctx):
    """(div_g f)_j = (nabla^g_{d_k} f)^k_j."""
    Df = covariant_derivative(ctx.f, ctx.gamma, upper=True)
    return jein("kkj->j", Df)


def residual_suite(K, ctx):
    """Sup-norms of every hypothesis residual over the points of ``ctx``."""
    return ConditionResiduals(
        r_metein=sup(einstein_condition_tensor(K, ctx)),
        r_nabla_g=sup(nabla_g_tensor(K, ctx)),
        r_condE2=sup(condE2_tensor(K, ctx)),
        r_condKKZ=sup(condKKZ_tensor(K, ctx)),
        r_condPP=sup(D_frak_tensor(K, ctx)),
        r_condPPstat=sup(div_g_f(ctx) - E_star_lower(K, ctx)),
        r_torsion_cond=sup(torsion_condition_tensor(K, ctx)),
        r_f_torsion=sup(f_torsion_tensor(K, ctx)),
    )


def residual_einstein_condition(K, ctx, probes=None):
    """Sup over points of |(nabla_X G)(Y, Z) + G(T(X, Y), Z)| on coordinate fields and probes."""
    r = sup(einstein_condition_tensor(K, ctx))
    if probes:
        from .fcalc import einstein_condition_probe_residual

        for X, Y, Z in probes:
            r = max(r, sup(einstein_condition_probe_residual(K, ctx, X, Y, Z)))
    return r
