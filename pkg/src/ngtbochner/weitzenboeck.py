"""The Weitzenboeck f-curvature operator, its three evaluation paths and positivity bounds.

* P path: sum_a sum_i (R^f_{e_i, X_a} S)(.., e_i @ a, ..) from second f-derivatives;
  this includes the derivative of S along D(e_i, X_a).
* Pb path: the same sum expanded through the (0,4) curvature R^f and Ric^f.
* xi path: -sum_alpha R^T(xi_alpha)(xi_alpha S) on an orthonormal bivector basis,
  with R the matrix of the curvature operator on Lambda^2.

The Pb and xi paths see only the pointwise part of R^f; they are compared with
the P path after the D-derivative part is removed.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .chartfield.jets import JetArray, jein
from .curvature import (
    D_derivative_action,
    curvature_action_algebraic,
    curvature_action_direct,
    theta_tensor,
)
from .fcalc import FCalculus, laplacians, nabla_f, nabla_star
from .riemann import weitzenboeck_from_action
from .tensoralg import letters


# ----------------------------------------------------------------------
# Coordinate paths


def weitzenboeck_P(S, fc, dual=False, zero=False):
    """Full operator from the definition (second f-derivatives)."""
    return weitzenboeck_from_action(curvature_action_direct(S, fc, dual=dual, zero=zero), fc.g_inv)


def weitzenboeck_D_part(S, fc):
    """Contribution of nabla^g_{D(e_i, X_a)} S to the P path."""
    return weitzenboeck_from_action(D_derivative_action(S, fc), fc.g_inv)


def weitzenboeck_algebraic(S, fc, rf13=None):
    return weitzenboeck_from_action(curvature_action_algebraic(S, fc, rf13), fc.g_inv)


def _raise_pair(R04, g_inv):
    """R[i, x, j, y] with the first and third slots raised."""
    return jein("ip,jq,pxqy->ixjy", g_inv, g_inv, R04)


def _place(S, k, at):
    """Spec pieces for S with letters substituted at given slots: ``at`` maps slot -> letter."""
    idx = letters(k, avoid="ijpqrs")
    src = "".join(at.get(s, idx[s]) for s in range(k))
    return idx, src


def ricci_sum(ric, S, g_inv, transpose=False):
    """sum_a sum_i Ric(X_a, e_i) S(.., e_i @ a, ..), or Ric(e_i, X_a) with ``transpose``."""
    k = S.ndim
    Rr = jein("ip,xp->xi", g_inv, ric) if not transpose else jein("ip,px->xi", g_inv, ric)
    out = None
    for a in range(k):
        idx, src = _place(S, k, {a: "i"})
        term = jein(f"{idx[a]}i,{src}->{idx}", Rr, S)
        out = term if out is None else out + term
    return out


def pair_sum(R04, S, g_inv, pairs):
    """sum over (a, b) in ``pairs`` of R(e_i, X_a, e_j, X_b) S(.., e_i @ a, .., e_j @ b, ..)."""
    k = S.ndim
    Rr = _raise_pair(R04, g_inv)
    out = None
    for a, b in pairs:
        idx, src = _place(S, k, {a: "i", b: "j"})
        term = jein(f"i{idx[a]}j{idx[b]},{src}->{idx}", Rr, S)
        out = term if out is None else out + term
    return out


def weitzenboeck_Pb(R04, S, fc, literal=False):
    """Expansion through R and Ric.

    Default: sum_a Ric(X_a, e_i) S(.. e_i @ a ..) + sum_{a != b} R(e_i, X_a, e_j, X_b) S(.. e_i @ a .. e_j @ b ..),
    which follows from the derivation action when R is skew in its last pair.
    ``literal``: -2 sum_{b<a} R(e_i, X_a, e_j, X_b) S(.. e_j @ b .. e_i @ a ..) + sum_a Ric(e_i, X_a) S(.. e_i @ a ..).
    """
    k = S.ndim
    ric = jein("ab,xaby->xy", fc.g_inv, R04)
    if literal:
        out = ricci_sum(ric, S, fc.g_inv, transpose=True)
        lower = [(b, a) for a in range(k) for b in range(a)]  # i sits at a, j at b (b < a)
        if lower:
            # R(e_i, X_a, e_j, X_b) S(.., e_j @ b, .., e_i @ a, ..)
            out = out - pair_sum(R04, S, fc.g_inv, [(a, b) for b, a in lower]).scale(2.0)
        return out
    out = ricci_sum(ric, S, fc.g_inv)
    off = [(a, b) for a in range(k) for b in range(k) if a != b]
    if off:
        out = out + pair_sum(R04, S, fc.g_inv, off)
    return out


def k_frak(omega, fc, literal=False):
    """The Theta correction between the f- and 0-operators.

    Default: -(Pb expansion with Theta in place of R).  ``literal``:
    2 sum_{b<a} g(Theta_{e_i,X_a} e_j, X_b) w(.. e_j @ b .. e_i @ a ..)
    + sum_a sum_i g(sum_j Theta_{e_i,e_j} e_j, X_a) w(.. e_i @ a ..).
    """
    th04 = jein("wm,mxyz->xyzw", fc.g, theta_tensor(fc))
    if not literal:
        return -weitzenboeck_Pb(th04, omega, fc)
    k = omega.ndim
    ric = jein("ab,xaby->xy", fc.g_inv, th04)
    out = ricci_sum(ric, omega, fc.g_inv, transpose=True)
    pairs = [(a, b) for a in range(k) for b in range(a)]
    if pairs:
        out = out + pair_sum(th04, omega, fc.g_inv, pairs).scale(2.0)
    return out


def r0_tensor(fc):
    """R^0(X, Y, Z, W) = R^g(fX, fY, Z, W)."""
    return jein("abzw,ax,by->xyzw", fc.ctx.riemann04, fc.f, fc.f)


def zero_calculus(fc):
    """The same geometry with K = 0, so that nabla^f becomes nabla^0."""
    return FCalculus(fc.ctx, fc.K.scale(0.0))


# ----------------------------------------------------------------------
# Frame (xi) path: plain per-point arrays


def _frame_components(S, E):
    v = S.v if isinstance(S, JetArray) else S
    k = v.ndim - 1
    for _ in range(k):
        v = np.einsum("z...a,zai->z...i", v, E)
        v = np.moveaxis(v, -1, 1)
    # k moves rotate the axes back into order
    return v


def _coordinate_components(Se, E):
    Einv = np.linalg.inv(E)  # e^i(d_x) = Einv[i, x]
    k = Se.ndim - 1
    v = Se
    for _ in range(k):
        v = np.einsum("z...i,zix->z...x", v, Einv)
        v = np.moveaxis(v, -1, 1)
    return v


def xi_act(xi, Se):
    """(xi S)(Y_1..Y_k) = -sum_b S(.., xi Y_b, ..) for frame matrices xi[z, a, u, v] (xi e_v = xi[u, v] e_u)."""
    k = Se.ndim - 1
    idx = letters(k, avoid="zauv")
    out = None
    for b in range(k):
        src = idx[:b] + "u" + idx[b + 1 :]
        dst = idx[:b] + "v" + idx[b + 1 :]
        term = -np.einsum(f"zauv,z{src}->za{dst}", xi, Se)
        out = term if out is None else out + term
    return out


def xi_act_batched(L, T):
    """Derivation action of L[z, a, u, v] on T[z, a, ...], batched over a."""
    k = T.ndim - 2
    idx = letters(k, avoid="zauv")
    out = None
    for b in range(k):
        src = idx[:b] + "u" + idx[b + 1 :]
        dst = idx[:b] + "v" + idx[b + 1 :]
        term = -np.einsum(f"zauv,za{src}->za{dst}", L, T)
        out = term if out is None else out + term
    return out


def weitzenboeck_xi(S, bv, M=None, basis=None, literal=False):
    """-sum_alpha R^T(xi_alpha)(xi_alpha S) in frame components, returned in coordinates.

    ``M[beta, alpha] = g(R(xi_alpha), xi_beta)``; ``basis`` (columns) changes to another
    orthonormal bivector basis.  ``literal`` applies R(xi_alpha) itself instead of R^T(xi_alpha).
    """
    M = bv.R_f if M is None else M
    xi = bv.xi_matrices(basis)
    if basis is not None:
        M = np.einsum("zac,zab,zbd->zcd", basis, M, basis)
    Se = _frame_components(S, bv.frame)
    xS = xi_act(xi, Se)  # [z, alpha, ...]
    # coef[alpha, beta]: coefficient of xi_beta in the operator applied to xi_alpha S
    coef = np.swapaxes(M, 1, 2) if literal else M
    L = np.einsum("zab,zbuv->zauv", coef, xi)
    out = -np.sum(xi_act_batched(L, xS), axis=1)
    return _coordinate_components(out, bv.frame)


def pairing(A, B, g_inv):
    """Full g-contraction of two covariant tensors given as plain arrays or jets."""
    from .tensoralg import batch_tensor_inner

    return batch_tensor_inner(A, B, g_inv)


def gram(S, bv, basis=None):
    """G[alpha, beta] = g(xi_alpha S, xi_beta S) in an orthonormal bivector basis."""
    xi = bv.xi_matrices(basis)
    xS = xi_act(xi, _frame_components(S, bv.frame))
    N, m = xS.shape[:2]
    flat = xS.reshape(N, m, -1)
    return np.einsum("zap,zbp->zab", flat, flat)


def positivity_report(S, bv, fc, c_emp=None):
    """Pointwise data for the lower bound of g(R(S), S).

    Returns a dict with lambda_min (of the symmetrized curvature operator),
    ||S||^2, sum_alpha ||xi_alpha S||^2, g(R(S), S) via the xi path and via
    tr(M_sym G), and the bound min(lambda_min, 0) * C * ||S||^2.
    """
    Msym = 0.5 * (bv.R_f + np.swapaxes(bv.R_f, 1, 2))
    lam = np.linalg.eigvalsh(Msym)[:, 0]
    Se = _frame_components(S, bv.frame)
    N = Se.shape[0]
    norm2 = np.sum(Se.reshape(N, -1) ** 2, axis=1)
    G = gram(S, bv)
    xinorm2 = np.einsum("zaa->z", G)
    RS = weitzenboeck_xi(S, bv)
    pair_val = pairing(RS, S, fc.g_inv)
    trace_val = np.einsum("zab,zab->z", Msym, G)
    ratio = np.max(xinorm2 / np.where(norm2 > 0, norm2, 1.0)) if c_emp is None else c_emp
    bound = np.minimum(lam, 0.0) * ratio * norm2
    return {
        "lambda_min": lam,
        "norm2": norm2,
        "xi_norm2": xinorm2,
        "pairing": pair_val,
        "trace_form": trace_val,
        "C_emp": float(ratio),
        "bound": bound,
    }


def empirical_C(k, n, samples=64, seed=0, alternating=False):
    """max over random frame tensors of sum_alpha ||xi_alpha S||^2 / ||S||^2 (flat frame)."""
    from .tensoralg import bivector_basis

    rng = np.random.default_rng(seed)
    pairs = bivector_basis(n).pairs
    xi = np.zeros((1, len(pairs), n, n))
    for a, (i, j) in enumerate(pairs):
        xi[0, a, i, j] = 1.0
        xi[0, a, j, i] = -1.0
    best = 0.0
    for _ in range(samples):
        S = rng.standard_normal((1,) + (n,) * k)
        if alternating:
            acc = np.zeros_like(S)
            for perm in itertools.permutations(range(k)):
                sign = np.linalg.det(np.eye(k)[list(perm)])
                acc += sign * np.transpose(S, (0,) + tuple(p + 1 for p in perm))
            S = acc / math.factorial(k)
        xS = xi_act(xi, S)
        best = max(best, float(np.sum(xS**2) / np.sum(S**2)))
    return best


# ----------------------------------------------------------------------
# Decomposition


def decomposition_terms(omega, fc):
    """Hodge f-Laplacian, mixed Bochner f-Laplacian and the P-path operator for a form."""
    lap = laplacians(omega, fc)
    return lap["hodge_f"], lap["bochner_f_mixed"], weitzenboeck_P(omega, fc)


def wei_residual(omega, fc):
    hodge, bochner, rw = decomposition_terms(omega, fc)
    return hodge - bochner - rw


def negated_calculus(fc):
    """The same data with F replaced by -F (hence f by -f); K unchanged."""
    import copy

    ctx = copy.copy(fc.ctx)
    ctx.__dict__ = {k: v for k, v in fc.ctx.__dict__.items()}
    ctx.extra = {}
    ctx.__dict__["F"] = -fc.ctx.F
    ctx.__dict__["f"] = -fc.ctx.f
    return FCalculus(ctx, fc.K)


def bochner_pairing_terms(omega, fc):
    """(nabla*^f nabla^f w, w) density and |nabla^f w|^2 density (pointwise, before quadrature)."""
    D = nabla_f(omega, fc)
    lap = nabla_star(D, fc)
    return pairing(lap, omega, fc.g_inv), pairing(D, D, fc.g_inv)
