"""Registry of hypotheses and checks.

A check evaluates one identity of the theory.  Pointwise checks return sup-norms
over a batch of points (combined by max); integral checks return densities that
the runner integrates over the full grid and then hands to ``finalize``.  Every
check lists the hypothesis residuals that must be small for its conclusion to
be asserted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..chartfield import jein
from ..curvature import (
    curvature_action_algebraic,
    curvature_action_direct,
    curvature_action_theta,
    curvature_probe,
    ricci_0,
    ricci_f,
    rf13_theta,
    rg_pullback,
    scalar_curvature_probe,
    theta_probe,
    theta_tensor,
)
from ..einstein import (
    E_star_lower,
    K_from_torsion,
    D_frak_tensor,
    condE2_tensor,
    condE2_torsion_form,
    condKKZ_tensor,
    div_g_f,
    nabla_g_vs_nabla_F_tensor,
    einstein_connection,
    eq_A_T_tensor,
    f_torsion_tensor,
    connection_from_torsion_lower,
    lemma_iii_tensor,
    lower_K,
    einstein_condition_tensor,
    nabla_gF_display_tensors,
    residual_einstein_condition,
    skew_torsion_residual,
    torsion_condition_tensor,
    torsion_from_K,
)
from ..fcalc import (
    D_frak,
    D_frak_components,
    D_frak_from_f,
    apply_f,
    d_f,
    d_f_bracket_formula,
    delta_0,
    delta_f,
    div_f,
    div_f_expanded,
    div_g_vector,
    evaluate_on,
    f_bracket,
    f_bracket_via_torsion,
    f_jacobiator_identity,
    flat,
    function_laplacian,
    function_laplacian_0,
    interior_K_trace,
    laplacians,
    nabla0_star,
    nabla_f,
    nabla_f_coefficients,
    nabla_f_vector,
    nabla_star,
    torsion_probe,
)
from ..riemann import bochner_laplacian, classical_weitzenboeck, covariant_derivative, hodge_laplacian, nabla_g
from ..tensoralg import batch_form_inner, batch_tensor_inner
from ..weitzenboeck import (
    empirical_C,
    k_frak,
    negated_calculus,
    pairing,
    positivity_report,
    wei_residual,
    weitzenboeck_D_part,
    weitzenboeck_P,
    weitzenboeck_Pb,
    weitzenboeck_xi,
    zero_calculus,
)
from ..curvature import BivectorOperators
from .fixtures import expectation_holds, parse_expectation
from .state import sup

TOL = 1e-10


# ----------------------------------------------------------------------
# Hypotheses


@dataclass(frozen=True)
class Hypothesis:
    name: str
    fn: Callable
    tol: float = TOL
    fixture_level: bool = False
    description: str = ""


HYPOTHESES = {}


def hypothesis(name, tol=TOL, fixture_level=False, description=""):
    def deco(fn):
        HYPOTHESES[name] = Hypothesis(name, fn, tol, fixture_level, description)
        return fn

    return deco


@hypothesis("claim:einstein", tol=0.5, fixture_level=True, description="fixture declares an Einstein connection")
def _h_claim(spec):
    return 0.0 if "einstein" in spec.claims else 1.0


@hypothesis("expectations_declared", tol=0.5, fixture_level=True, description="fixture declares residual expectations")
def _h_expect(spec):
    return 0.0 if spec.expect else 1.0


@hypothesis("r_metein", description="Einstein condition (nabla_X G)(Y,Z) + G(T(X,Y),Z)")
def _h_einstein_condition(st):
    return residual_einstein_condition(st.K, st.ctx, [(st.X, st.Y, st.Z)])


@hypothesis("r_nabla_g", description="nabla g for nabla = nabla^g + K")
def _h_nabla_g(st):
    return sup(covariant_derivative(st.ctx.g, einstein_connection(st.K, st.ctx)))


@hypothesis("r_condE2", description="K(X,Y,Z) + K(X,Z,Y)")
def _h_condE2(st):
    return sup(condE2_tensor(st.K, st.ctx))


@hypothesis("r_condKKZ", description="g([K_X,K_Y]Z,W) + g([K_X,K_Y]W,Z)")
def _h_condKKZ(st):
    return sup(condKKZ_tensor(st.K, st.ctx))


@hypothesis("r_condPP", description="D(X,Y) = [fX,fY] - f[X,Y]_f")
def _h_condPP(st):
    return sup(D_frak_tensor(st.K, st.ctx))


@hypothesis("r_condPPstat", description="div_g f - (E*)^flat")
def _h_condPPstat(st):
    return sup(div_g_f(st.ctx) - E_star_lower(st.K, st.ctx))


@hypothesis("r_torsion_cond", description="T(Z,X,Y) + T(Z,Y,X) - T(X,Z,fY) - T(Y,Z,fX)")
def _h_torsion_cond(st):
    return sup(torsion_condition_tensor(st.K, st.ctx))


@hypothesis("r_f_torsion", description="T(fX,Y) - T(X,fY)")
def _h_f_torsion(st):
    return sup(f_torsion_tensor(st.K, st.ctx))


@hypothesis("r_skew_torsion", description="T(X,Y,Z) + T(X,Z,Y)")
def _h_skew_torsion(st):
    return sup(skew_torsion_residual(st.K, st.ctx))


@hypothesis("r_curvature_negative", description="max(0, -lambda_min) of the symmetrized curvature operator R^f")
def _h_neg(st):
    bv = st.bivectors
    Msym = 0.5 * (bv.R_f + np.swapaxes(bv.R_f, 1, 2))
    return float(max(0.0, -np.min(np.linalg.eigvalsh(Msym)[:, 0])))


@hypothesis("r_harmonic_constant_forms", description="Hodge f-Laplacian of the constant forms dx1, dx1^dx2")
def _h_harmonic(st):
    return max(sup(laplacians(w, st.fc)["hodge_f"]) for w in st.constant_forms)


# ----------------------------------------------------------------------
# Checks


@dataclass(frozen=True)
class Check:
    id: str
    anchor: str
    group: str
    fn: Callable
    hypotheses: tuple = ()
    tol: float = TOL
    kind: str = "point"  # point | integral | fixture
    order: int = 2
    finalize: Callable = None
    description: str = ""


REGISTRY = []


def check(id, anchor, group, hypotheses=(), tol=TOL, kind="point", order=2, finalize=None):
    def deco(fn):
        if any(c.id == id for c in REGISTRY):
            raise ValueError(f"duplicate check id {id}")
        doc = (fn.__doc__ or "").strip().splitlines()
        REGISTRY.append(Check(id, anchor, group, fn, tuple(hypotheses), tol, kind, order, finalize, doc[0] if doc else ""))
        return fn

    return deco


def get_check(check_id):
    for c in REGISTRY:
        if c.id == check_id:
            return c
    raise KeyError(check_id)


def select(selection):
    """Checks for a selection: None / 'all' / list of ids; unknown ids raise KeyError."""
    if selection is None or selection == "all" or selection == ["all"]:
        return list(REGISTRY)
    if isinstance(selection, str):
        selection = [s for s in selection.split(",") if s.strip()]
    wanted = [s.strip() for s in selection]
    known = {c.id for c in REGISTRY}
    unknown = [s for s in wanted if s not in known]
    if unknown:
        raise KeyError(", ".join(unknown))
    return [c for c in REGISTRY if c.id in wanted]


E2 = ("r_condE2",)
STAT = ("r_condE2", "r_condPPstat")


# --- Einstein connections ------------------------------------------------


@check("einstein_condition", "(∇_X G)(Y,Z) = −G(T(X,Y),Z)", "einstein", ("claim:einstein",))
def _einstein_condition(st):
    """Einstein condition on coordinate fields and on random fields."""
    return {
        "residual": residual_einstein_condition(st.K, st.ctx, [(st.X, st.Y, st.Z)]),
        "coordinate": sup(einstein_condition_tensor(st.K, st.ctx)),
    }


@check("einstein_connection_from_torsion", "g(∇_XY,Z) = g(∇^g_XY,Z) + ½[T(X,Y,Z) + T(X,Z,fY) + T(Y,Z,fX)]",
       "einstein", ("r_metein",), tol=1e-12)
def _connection_from_torsion(st):
    """Connection coefficients from the torsion agree with Gamma + K."""
    return {"residual": sup(connection_from_torsion_lower(st.ctx, st.K) - (st.ctx.gamma_lower + lower_K(st.K, st.ctx)))}


@check("torsion_from_difference", "T(X,Y) = K_X Y − K_Y X", "einstein", (), tol=1e-11)
def _torsion_def(st):
    """Torsion of Gamma + K on coordinate fields and on random fields."""
    conn = einstein_connection(st.K, st.ctx)
    T = torsion_from_K(st.K)
    coeff = conn - conn.transpose(0, 2, 1)
    probe = torsion_probe(st.X, st.Y, st.K, st.ctx) - jein("kij,i,j->k", T, st.X, st.Y)
    return {"residual": max(sup(coeff - T), sup(probe)), "probe": sup(probe)}


@check("difference_from_torsion_metric", "2K(Y,Z,X) = T(X,Y,Z) + T(Y,Z,X) + T(X,Z,Y)", "einstein", ("r_nabla_g",))
def _metric_torsion_inverse(st):
    """Metric-case inverse formula recovers K from T."""
    _, Tl = torsion_from_K(st.K, st.ctx)
    return {"residual": sup(K_from_torsion(Tl, st.ctx, "metric") - lower_K(st.K, st.ctx))}


@check("nabla_g_from_nabla_F", "(∇g)(Z,X,Y) = (∇F)(X,Y,Z) + (∇F)(Y,X,Z)", "einstein", ("r_metein",))
def _nabla_g_vs_nabla_F(st):
    return {"residual": sup(nabla_g_vs_nabla_F_tensor(st.K, st.ctx))}


@check("torsion_forms_of_nabla_g_and_nabla_F",
       "(∇g)(X,Y,Z) = −½[T(X,Y,Z) + T(X,Z,Y) + T(X,Y,fZ) + T(X,Z,fY)]; "
       "(∇_X F)(Y,Z) = ½[T(X,Z,Y) − T(X,Y,Z) − T(X,Y,fZ) + T(X,Z,fY)]", "einstein", ("r_metein",))
def _displays(st):
    """Both torsion expressions: for nabla g and for nabla F."""
    a, b = nabla_gF_display_tensors(st.K, st.ctx)
    _, lit = nabla_gF_display_tensors(st.K, st.ctx, literal_F_slots=True)
    return {"residual": max(sup(a), sup(b)), "nabla_g": sup(a), "nabla_F": sup(b), "nabla_F_slot_variant": sup(lit)}


@check("metric_compatibility_equivalences",
       "∇g = 0 ⇔ K(X,Y,Z) = −K(X,Z,Y) ⇔ (∇_X F)(Y,Z) = −(∇_Y F)(X,Z) ⇔ (∇_X f)Y = −(∇_Y f)X",
       "einstein", ("r_metein",), tol=1e-9)
def _nabla_g_lemma(st):
    """If one of the four conditions holds, all hold."""
    conn = einstein_connection(st.K, st.ctx)
    r = {
        "nabla_g": sup(covariant_derivative(st.ctx.g, conn)),
        "K_skew": sup(condE2_tensor(st.K, st.ctx)),
        "nabla_F": sup(lemma_iii_tensor(st.K, st.ctx)),
    }
    Df = covariant_derivative(st.ctx.f, conn, upper=True)  # [k, x, y] = ((nabla_x f) d_y)^k
    r["nabla_f"] = sup(Df + Df.transpose(0, 2, 1))
    vals = list(r.values())
    r["residual"] = max(vals) if min(vals) <= TOL else 0.0
    # (i) <=> (ii) is an identity for any K
    r["identity_nabla_g_vs_K"] = sup(covariant_derivative(st.ctx.g, conn) + condE2_tensor(st.K, st.ctx))
    return r


@check("einstein_torsion_condition", "T(Z,X,Y) + T(Z,Y,X) = T(X,Z,fY) + T(Y,Z,fX)", "einstein",
       ("r_metein", "r_nabla_g"))
def _torsion_condition(st):
    return {"residual": sup(torsion_condition_tensor(st.K, st.ctx))}


@check("skew_condition_torsion_form", "T(X,Y,Z) + T(X,Z,Y) + T(X,Z,fY) + T(X,Y,fZ) = 2[K(X,Y,Z) + K(X,Z,Y)]",
       "einstein", ("r_metein",))
def _condE2_T(st):
    """The torsion form of the skew condition equals twice K(X,Y,Z) + K(X,Z,Y)."""
    lhs = condE2_torsion_form(st.K, st.ctx)
    return {"residual": sup(lhs - condE2_tensor(st.K, st.ctx).scale(2.0))}


@check("commutator_skew", "[K_X, K_Y](Z,W) = −[K_X, K_Y](W,Z)", "einstein", E2)
def _kkz(st):
    return {"residual": sup(condKKZ_tensor(st.K, st.ctx))}


@check("f_torsion_relations", "T(fY, Z) = T(Y, fZ) = −f T(Y, Z)", "einstein",
       ("r_metein", "r_skew_torsion", "r_f_torsion"))
def _eq_A_T(st):
    r = eq_A_T_tensor(st.K, st.ctx)
    return {"residual": sup(r), "second_equality": sup(r[1])}


@check("skew_torsion_difference", "K_X Y = ½[T(fX,Y) − T(X,fY) + T(X,Y)]", "einstein", ("r_skew_torsion",))
def _newnbl(st):
    """For totally skew torsion the torsion-to-K formula takes the f-twisted form."""
    T, Tl = torsion_from_K(st.K, st.ctx)
    f = st.ctx.f
    alt = (Tl + jein("pyz,px->xyz", Tl, f) - jein("xpz,py->xyz", Tl, f)).scale(0.5)
    return {"residual": sup(K_from_torsion(Tl, st.ctx, "einstein") - alt)}


@check("half_torsion_connection", "∇_X Y = ∇^g_X Y + ½T(X,Y)", "einstein",
       ("r_metein", "r_skew_torsion", "r_f_torsion"))
def _half_T(st):
    T = torsion_from_K(st.K)
    return {"residual": sup(st.K - T.scale(0.5))}


@check("E_star_equals_minus_E", "E* = −E", "einstein", E2, tol=1e-11)
def _E_star(st):
    fc = st.fc
    return {"residual": sup(fc.E_star + fc.E)}


# --- f-calculus ----------------------------------------------------------


@check("f_connection_rules", "∇^f_X(ψY) = (fX)(ψ)Y + ψ∇^f_X Y, ∇^f_{ψX}Y = ψ∇^f_X Y", "fcalc", (), tol=1e-11)
def _koszul(st):
    """Leibniz rule in Y, function-linearity in X, and the coefficient assembly of nabla^f."""
    fc, X, Y, psi = st.fc, st.X, st.Y, st.psi
    psiY = jein(",k->k", psi, Y)
    psiX = jein(",k->k", psi, X)
    fXpsi = jein("m,m->", apply_f(X, fc), psi.partial())
    a = nabla_f_vector(X, psiY, fc) - jein(",k->k", fXpsi, Y) - jein(",k->k", psi, nabla_f_vector(X, Y, fc))
    b = nabla_f_vector(psiX, Y, fc) - jein(",k->k", psi, nabla_f_vector(X, Y, fc))
    c = nabla_f_coefficients(Y, fc) - nabla_f(Y, fc, upper=True)
    return {"residual": max(sup(a), sup(b), sup(c)), "leibniz": sup(a), "linearity": sup(b), "coefficients": sup(c)}


@check("f_derivative_of_metric", "(∇^f_X g)(Y,Z) = −K(X,Y,Z) − K(X,Z,Y)", "fcalc", (), tol=1e-11)
def _proof_K(st):
    Kl = st.fc.K_lower
    return {"residual": sup(nabla_f(st.ctx.g, st.fc) + Kl + Kl.transpose(0, 2, 1))}


@check("f_derivative_of_F", "(∇^f_X F)(Y,Z) = (∇^g_{fX}F)(Y,Z) − K(X,Y,fZ) + K(X,Z,fY)", "fcalc", (), tol=1e-11)
def _proof_KF(st):
    fc = st.fc
    f, Kl = fc.f, fc.K_lower
    base = jein("ax,ayz->xyz", f, nabla_g(st.ctx.F, st.ctx))
    KfZ = jein("xyp,pz->xyz", Kl, f)
    KfY = jein("xzp,py->xyz", Kl, f)
    lhs = nabla_f(st.ctx.F, fc)
    return {"residual": sup(lhs - (base - KfZ + KfY)), "sign_variant": sup(lhs - (base - KfZ - KfY))}


@check("f_bracket_two_ways", "[X,Y]_f = ∇^f_X Y − ∇^f_Y X = [X,Y]_0 + T(X,Y)", "fcalc", (), tol=1e-11)
def _bracket(st):
    fc, X, Y = st.fc, st.X, st.Y
    a = f_bracket(X, Y, fc) - f_bracket_via_torsion(X, Y, fc)
    b = f_bracket(X, Y, fc) + f_bracket(Y, X, fc)
    return {"residual": max(sup(a), sup(b))}


@check("anchor_defect", "𝔇^f(X,Y) = [fX,fY] − f[X,Y]_f = (∇^g_{fX}f)Y − (∇^g_{fY}f)X − f T(X,Y)", "fcalc", ())
def _condPP(st):
    fc, X, Y = st.fc, st.X, st.Y
    a = D_frak(X, Y, fc) - D_frak_from_f(X, Y, fc)
    b = D_frak(X, Y, fc) - jein("kxy,x,y->k", D_frak_components(fc), X, Y)
    return {"residual": max(sup(a), sup(b))}


@check("jacobiator_anchor", "f 𝒥_f(X,Y,Z) = 0 when 𝔇^f = 0", "fcalc", ("r_condPP",), tol=1e-9)
def _jacobiator(st):
    """f applied to the Jacobiator vanishes; the general identity with the D terms is reported alongside."""
    from ..fcalc import jacobiator

    fc = st.fc
    fJ = apply_f(jacobiator(st.X, st.Y, st.Z, fc), fc)
    return {"residual": sup(fJ), "general_identity": sup(f_jacobiator_identity(st.X, st.Y, st.Z, fc))}


@check("dual_f_connection", "fX(g(Y,Z)) = g(∇^f_X Y, Z) + g(Y, ∇̆^f_X Z)", "fcalc", (), tol=1e-11)
def _breve(st):
    fc, X, Y, Z = st.fc, st.X, st.Y, st.Z
    gYZ = jein("ab,a,b->", fc.g, Y, Z)
    lhs = jein("m,m->", apply_f(X, fc), gYZ.partial())
    rhs = jein("ab,a,b->", fc.g, nabla_f_vector(X, Y, fc), Z) + jein("ab,a,b->", fc.g, Y, nabla_f_vector(X, Z, fc, True))
    return {"residual": sup(lhs - rhs)}


@check("dual_bracket_equality", "[X,Y]˘_f = [X,Y]_f", "fcalc", E2, tol=1e-11)
def _bracket_b(st):
    fc = st.fc
    return {"residual": sup(f_bracket(st.X, st.Y, fc, dual=True) - f_bracket(st.X, st.Y, fc))}


@check("interior_trace_K_plus_Kstar", "Σ_i ι_{e_i}((K_{e_i} + K*_{e_i})ω) = 0", "fcalc", E2)
def _stat_L1b(st):
    fc = st.fc
    r = 0.0
    for w in (st.w1, st.w2, st.S2):
        r = max(r, sup(interior_K_trace(w, fc.K, fc) + interior_K_trace(w, fc.K_star, fc)))
    return {"residual": r}


@check("f_adjoint_derivative_splitting", "∇^{*f}ω = ∇^{*0}ω − Σ_i ι_{e_i}(K_{e_i}ω), ∇̆^{*f}ω = ∇^{*0}ω + Σ_i ι_{e_i}(K*_{e_i}ω)",
       "fcalc", (), tol=1e-10)
def _L03(st):
    """Both adjoint f-derivatives against the K-free one, for a 1-form, a 2-form and a (0,2) tensor."""
    fc = st.fc
    r = sign = 0.0
    for w in (st.w1, st.w2, st.S2):
        base = nabla0_star(w, fc)
        a = nabla_star(w, fc) - (base - interior_K_trace(w, fc.K, fc))
        b = nabla_star(w, fc, dual=True) - (base + interior_K_trace(w, fc.K_star, fc))
        r = max(r, sup(a), sup(b))
        sign = max(sign, sup(nabla_star(w, fc) - (base + interior_K_trace(w, fc.K, fc))))
    return {"residual": r, "sign_variant": sign}


@check("f_adjoint_dual_equality", "∇̆^{*f} = ∇^{*f}", "fcalc", E2)
def _L03_eq(st):
    fc = st.fc
    return {"residual": max(sup(nabla_star(w, fc, dual=True) - nabla_star(w, fc)) for w in (st.w1, st.w2, st.S2))}


@check("f_divergence_expansion", "div_f X = div_g(fX) − (div_g f)(X) + g(X, E*)", "fcalc", (), tol=1e-11)
def _divf1(st):
    return {"residual": sup(div_f(st.X, st.fc) - div_f_expanded(st.X, st.fc))}


@check("f_divergence_reduction", "div_f X = div_g(fX) ⇔ div_g f = (E*)^♭", "fcalc", (), tol=1e-9)
def _divf4B(st):
    """Gap div_f X - div_g(fX) is small exactly when the stationarity residual is."""
    fc = st.fc
    gap = sup(div_f(st.X, fc) - div_g_vector(apply_f(st.X, fc), st.ctx))
    stat = sup(fc.div_g_f - E_star_lower(fc.K, st.ctx))
    return {"gap": gap, "stationarity": stat}


def _divf4B_verdict(vals):
    gap, stat = vals["gap"], vals["stationarity"]
    if stat <= TOL:
        return gap
    if stat > 0.1:
        return 0.0 if gap > 1e-3 else 1.0
    return 0.0


@check("f_divergence_codifferential", "div_f X = −∇^{*f} X^♭", "fcalc", E2, tol=1e-11)
def _divPX(st):
    """Holds when E + E* = 0; the general identity div_f X + nabla^{*f} X^flat = g(X, E + E*) is reported."""
    fc = st.fc
    lhs = div_f(st.X, fc) + nabla_star(flat(st.X, fc), fc)
    corr = jein("kl,k,l->", fc.g, st.X, fc.E + fc.E_star)
    return {"residual": sup(lhs), "general_identity": sup(lhs - corr)}


@check("exterior_f_derivative_invariant_formula",
       "d^fω(X_0..X_k) = Σ(−1)^i fX_i(ω(..X̂_i..)) + Σ_{i<j}(−1)^{i+j} ω([X_i,X_j]_f, ..X̂_i..X̂_j..)",
       "fcalc", (), tol=1e-10)
def _dP(st):
    """For degrees 0, 1, 2 and for both f-connections."""
    fc, X, Y, Z = st.fc, st.X, st.Y, st.Z
    r = 0.0
    for dual in (False, True):
        r = max(r, sup(evaluate_on(d_f(st.psi, fc, dual), X) - d_f_bracket_formula(st.psi, [X], fc, dual)))
        r = max(r, sup(evaluate_on(d_f(st.w1, fc, dual), X, Y) - d_f_bracket_formula(st.w1, [X, Y], fc, dual)))
        if st.n >= 3:
            r = max(r, sup(evaluate_on(d_f(st.w2, fc, dual), X, Y, Z) - d_f_bracket_formula(st.w2, [X, Y, Z], fc, dual)))
    return {"residual": r}


@check("exterior_dual_equality", "d̆^f = d^f", "fcalc", E2)
def _dP_eq(st):
    fc = st.fc
    return {"residual": max(sup(d_f(w, fc, True) - d_f(w, fc)) for w in (st.psi, st.w1, st.w2))}


@check("codifferential_splitting", "δ^0ω = δ^fω + Σ_i ι_{e_i}(K_{e_i}ω) = δ̆^fω − Σ_i ι_{e_i}(K*_{e_i}ω)", "fcalc", ())
def _58_59A(st):
    fc = st.fc
    r = 0.0
    for w in (st.w1, st.w2):
        d0 = delta_0(w, fc)
        r = max(r, sup(d0 - delta_f(w, fc) - interior_K_trace(w, fc.K, fc)))
        r = max(r, sup(d0 - delta_f(w, fc, dual=True) + interior_K_trace(w, fc.K_star, fc)))
    return {"residual": r}


@check("hodge_dual_equality", "δ̆^f = δ^f, Δ̆^f_H = Δ^f_H", "fcalc", E2, tol=1e-9)
def _58_59(st):
    r = 0.0
    for name in ("w1", "w2"):
        L = st.laplacians(name)
        r = max(r, sup(L["delta_f"] - L["delta_f_dual"]), sup(L["hodge_f"] - L["hodge_f_dual"]))
    return {"residual": r}


@check("function_f_laplacian", "Δ^f ψ = Δ^0 ψ + (fE*)(ψ)", "fcalc", (), tol=1e-10)
def _flap(st):
    """Two evaluations of the f-Laplacian of a function; the variant with E in place of E* is reported."""
    fc, psi = st.fc, st.psi
    lhs = function_laplacian(psi, fc)
    base = function_laplacian_0(psi, fc)
    dpsi = psi.partial()
    corr = jein("m,m->", apply_f(fc.E_star, fc), dpsi)
    var = jein("m,m->", apply_f(fc.E, fc), dpsi)
    return {"residual": sup(lhs - base - corr), "E_variant": sup(lhs - base - var)}


# --- integral identities ---------------------------------------------------


def _ratio_finalize(pairs):
    def fin(tot):
        out = {}
        r = 0.0
        for name, (a, b) in pairs.items():
            gap = abs(tot[a] - tot[b])
            out[name] = gap
            r = max(r, gap)
        out["residual"] = r
        return out

    return fin


@check("divergence_theorem", "∫_M (div_f X) dvol_g = 0", "integral", ("r_condPPstat",), kind="integral", order=1,
       finalize=lambda t: {"residual": abs(t["div_f"]), "div_g_fX": abs(t["div_g_fX"])})
def _stokes(st):
    fc = st.fc
    return {
        "div_f": div_f(st.X, fc).v * st.density,
        "div_g_fX": div_g_vector(apply_f(st.X, fc), st.ctx).v * st.density,
    }


@check("f_derivative_adjointness", "(∇^{*f}ω_2, ω_1)_{L²} = (ω_2, ∇^f ω_1)_{L²}", "integral", STAT, tol=1e-9,
       kind="integral", order=1,
       finalize=_ratio_finalize({"degree0": ("a0", "b0"), "degree1": ("a1", "b1"), "degree2": ("a2", "b2")}))
def _intB(st):
    fc, gi, rho = st.fc, st.ctx.g_inv, st.density
    out = {}
    for k, (w1, w2) in enumerate(((st.psi, st.w1b), (st.w1, st.S2), (st.w2, st.S3))):
        out[f"a{k}"] = batch_tensor_inner(nabla_star(w2, fc), w1, gi) * rho
        out[f"b{k}"] = batch_tensor_inner(w2, nabla_f(w1, fc), gi) * rho
    return out


@check("codifferential_adjointness", "(δ̆^f ω_2, ω_1)_{L²} = (ω_2, d^f ω_1)_{L²}", "integral", STAT, tol=1e-9,
       kind="integral", order=1,
       finalize=_ratio_finalize({"degree0": ("a0", "b0"), "degree1": ("a1", "b1"), "degree2": ("a2", "b2")}))
def _dPdeltaPB(st):
    fc, gi, rho = st.fc, st.ctx.g_inv, st.density
    out = {}
    for k, (w1, w2) in enumerate(((st.psi, st.w1b), (st.w1, st.w2), (st.w2, st.w3))):
        out[f"a{k}"] = batch_form_inner(delta_f(w2, fc, dual=True), w1, gi) * rho
        out[f"b{k}"] = batch_form_inner(w2, d_f(w1, fc), gi) * rho
    return out


def _relative_gap(a, b):
    # quadrature error scales with the size of the integrals compared
    return abs(a - b) / max(1.0, abs(b))


def _pmax_finalize(t):
    return {
        "residual": max(_relative_gap(t["lap1"], t["grad1"]), _relative_gap(t["lap2"], t["grad2"])),
        "absolute_gap": max(abs(t["lap1"] - t["grad1"]), abs(t["lap2"] - t["grad2"])),
        "min_norm2": min(t["grad1"], t["grad2"]),
        "norm2_grad_w1": t["grad1"],
        "norm2_grad_w2": t["grad2"],
    }


@check("bochner_f_energy", "(∇^{*f}∇^f ω, ω)_{L²} = ‖∇^f ω‖² ≥ 0; ∇^{*f}∇^f ω ≤ 0 forces ω f-parallel", "integral",
       STAT, tol=1e-9, kind="integral", order=2, finalize=_pmax_finalize)
def _pmax(st):
    fc, gi, rho = st.fc, st.ctx.g_inv, st.density
    out = {}
    for k, name in ((1, "w1"), (2, "w2")):
        w = getattr(st, name)
        D = nabla_f(w, fc)
        out[f"lap{k}"] = batch_tensor_inner(nabla_star(D, fc), w, gi) * rho
        out[f"grad{k}"] = batch_tensor_inner(D, D, gi) * rho
    return out


def _harm_finalize(t):
    r = a = 0.0
    for k in (1, 2):
        rhs = t[f"d{k}"] + t[f"delta{k}"]
        r = max(r, _relative_gap(t[f"hodge{k}"], rhs))
        a = max(a, abs(t[f"hodge{k}"] - rhs))
    return {"residual": r, "absolute_gap": a}


@check("harmonic_form_characterization", "Δ^f_H ω = 0 ⇔ d^f ω = 0 and δ̆^f ω = 0: (Δ^f_H ω, ω) = ‖d^f ω‖² + ‖δ̆^f ω‖²",
       "integral", STAT, tol=1e-9, kind="integral", order=2, finalize=_harm_finalize)
def _harmonic(st):
    fc, gi, rho = st.fc, st.ctx.g_inv, st.density
    out = {}
    for k, name in ((1, "w1"), (2, "w2")):
        w = getattr(st, name)
        dw = d_f(w, fc)
        bw = delta_f(w, fc, dual=True)
        hodge = d_f(bw, fc) + delta_f(dw, fc, dual=True)
        out[f"hodge{k}"] = batch_form_inner(hodge, w, gi) * rho
        out[f"d{k}"] = batch_form_inner(dw, dw, gi) * rho
        out[f"delta{k}"] = batch_form_inner(bw, bw, gi) * rho
    return out


@check("vanishing_theorem_shadow", "If g(ℛ^f(ω),ω) ≥ 0 and Δ^f_H ω = 0 then ∇^f ω = 0", "integral",
       ("r_condE2", "r_condPPstat", "r_curvature_negative", "r_harmonic_constant_forms"), tol=1e-4,
       kind="integral", order=1, finalize=lambda t: {"residual": float(np.sqrt(max(t["w1"], t["w2"], 0.0)))})
def _vanishing(st):
    """L2 norm of nabla^f of the constant forms dx1 and dx1^dx2."""
    gi, rho = st.ctx.g_inv, st.density
    out = {}
    for name, w in zip(("w1", "w2"), st.constant_forms):
        D = nabla_f(w, st.fc)
        out[name] = batch_tensor_inner(D, D, gi) * rho
    return out


# --- curvature -----------------------------------------------------------


@check("curvature_decomposition", "R^f_{X,Y}Z = R^g_{fX,fY}Z + Θ_{X,Y}Z", "curvature", (), tol=1e-9)
def _prop_i(st):
    """Second f-derivatives against R^g + Theta: parallel-at-point fields and coordinate tensors."""
    fc = st.fc
    p = st.parallel
    X, Y, Z = p["X"], p["Y"], p["Z"]
    lhs = curvature_probe(X, Y, Z, fc)
    rhs = jein("mabz,a,b,z->m", st.ctx.riemann13, apply_f(X, fc), apply_f(Y, fc), Z) + theta_probe(X, Y, Z, fc)
    a = sup(lhs - rhs)
    b = sup(st.rf13_direct - rf13_theta(fc))
    c = sup(theta_probe(X, Y, Z, fc) - jein("mxyz,x,y,z->m", theta_tensor(fc), X, Y, Z))
    return {"residual": max(a, b), "probe": a, "tensor": b, "theta_probe_vs_tensor": c}


@check("curvature_on_one_forms", "(R^f_{X,Y}ω)(Z) = −ω(R^f_{X,Y}Z)", "curvature", (), tol=1e-9)
def _prop_i_forms(st):
    """On a parallel-at-point 1-form; the variant -w(R^f Z + Theta Z) is reported."""
    fc = st.fc
    w = st.parallel["w"]
    act = curvature_action_direct(w, fc)  # [x, y, z]
    Rw = jein("m,mxyz->xyz", w, st.rf13_direct)
    th = jein("m,mxyz->xyz", w, theta_tensor(fc))
    return {"residual": sup(act + Rw), "theta_variant": sup(act + Rw + th)}


@check("curvature_on_functions", "R^f_{X,Y}ψ = 𝔇^f(X,Y)ψ", "curvature", (), tol=1e-9)
def _prop_ii(st):
    lhs, rhs = scalar_curvature_probe(st.X, st.Y, st.psi, st.fc)
    return {"residual": sup(lhs - rhs)}


@check("curvature_on_tensors", "R^f_{X,Y}S = ∇^g_{𝔇^f(X,Y)}S + (R^g_{fX,fY} + Θ_{X,Y})·S", "curvature", (), tol=1e-9)
def _prop_iii(st):
    """Vector field, 1-form, 2-form and (1,1) tensor; the derivative term drops for parallel-at-point tensors."""
    fc = st.fc
    r = 0.0
    for S, c in ((st.X, 1), (st.w1, 0), (st.w2, 0), (st.V11, 1)):
        r = max(r, sup(curvature_action_direct(S, fc, c) - curvature_action_theta(S, fc, c)))
    V = st.parallel["V"]
    par = sup(curvature_action_direct(V, fc, 1) - curvature_action_algebraic(V, fc, st.rf13_direct, 1))
    return {"residual": max(r, par), "fields": r, "parallel": par}


@check("curvature_of_metric", "R^f_{X,Y} g = 0", "curvature", E2, tol=1e-9)
def _Rg0(st):
    return {"residual": sup(curvature_action_direct(st.ctx.g, st.fc))}


@check("curvature_components", "R^f(X,Y,Z,W) = R^g(fX,fY,Z,W) + g(Θ_{X,Y}Z, W)", "curvature", (), tol=1e-9)
def _prop_iv(st):
    fc = st.fc
    rhs = jein("wm,mxyz->xyzw", fc.g, rg_pullback(fc) + theta_tensor(fc))
    return {"residual": sup(st.rf04_direct - rhs)}


@check("curvature_symmetries", "R^f(X,Y,Z,W) = −R^f(Y,X,Z,W) = −R^f(X,Y,W,Z)", "curvature", E2, tol=1e-9)
def _prop_v(st):
    R = st.rf04_direct
    a = sup(R + R.transpose(1, 0, 2, 3))
    b = sup(R + R.transpose(0, 1, 3, 2))
    return {"residual": max(a, b), "first_pair": a, "second_pair": b}


@check("dual_curvature_equality", "R̆^f = R^f", "curvature", E2, tol=1e-9)
def _breve_R(st):
    from ..curvature import rf13_direct

    return {"residual": sup(rf13_direct(st.fc, dual=True) - st.rf13_direct)}


@check("ricci_decomposition", "Ric^f(X,Y) = Ric^0(X,Y) + g(Σ_i Θ_{X,e_i}e_i, Y)", "curvature", E2, tol=1e-9)
def _ric_K(st):
    from ..curvature import theta_trace

    fc = st.fc
    return {"residual": sup(ricci_f(st.rf04_direct, fc) - ricci_0(fc) - theta_trace(fc))}


@check("bivector_operator_consistency", "ℛ^f = ℛ^g 𝒫 + 𝒦, 𝒫(X∧Y) = fX∧fY", "curvature", (), tol=1e-9)
def _bivector(st):
    """Matrix of R^f on bivectors against the curvature tensor; P and R^g self-adjoint."""
    bv = st.bivectors_direct
    a = float(np.max(np.abs(bv.R_f - bv.R_f_tensor), initial=0.0))
    b = float(np.max(np.abs(bv.P - np.swapaxes(bv.P, 1, 2)), initial=0.0))
    c = float(np.max(np.abs(bv.R_g - np.swapaxes(bv.R_g, 1, 2)), initial=0.0))
    lit = float(np.max(np.abs(bv.R_g @ bv.P + bv.K_literal - bv.R_f_tensor), initial=0.0))
    breve = float(np.max(np.abs(bv.R_f_breve - bv.R_f_tensor), initial=0.0))
    return {"residual": max(a, b, c), "P_symmetry": b, "Rg_symmetry": c, "K_slot_variant": lit, "breve_as_difference": breve}


@check("bivector_curvature_skew", "g(ℛ^f(ξ)W, Z) = −g(ℛ^f(ξ)Z, W)", "curvature", E2, tol=1e-9)
def _bivector_skew(st):
    return {"residual": float(np.max(np.abs(st.bivectors.bivector_skew_residual()), initial=0.0))}


@check("bivector_expansion", "ℛ^f(ξ_b) = Σ_a (−g(ℛ^g(ξ_a)fX, fY) + g(𝒦(X∧Y), ξ_a)) ξ_a, ξ_b = X∧Y", "curvature", E2,
       tol=1e-9)
def _L03P1(st):
    corrected, variant = st.bivectors.expansion_residuals(st.fc)
    return {"residual": float(np.max(np.abs(corrected), initial=0.0)), "sign_variant": float(np.max(np.abs(variant), initial=0.0))}


# --- Weitzenboeck operator -------------------------------------------------


def _alg_part(st, S):
    key = ("alg", id(S))
    cache = st._field_cache
    if key not in cache:
        cache[key] = weitzenboeck_P(S, st.fc) - weitzenboeck_D_part(S, st.fc)
    return cache[key]


@check("weitzenboeck_three_paths",
       "ℜ^f(S) = Σ_a Σ_i (R^f_{e_i,X_a}S)(..e_i..) = Pb-expansion = −Σ_α ℛ^f(ξ_α)^T(ξ_α S)", "weitzenboeck", E2,
       tol=1e-8)
def _three_way(st):
    """Definition path (minus its D-derivative part), curvature-tensor expansion and bivector double sum."""
    fc = st.fc
    r = lit_pb = lit_xi = dpart = 0.0
    for S in (st.w1, st.w2, st.S2):
        alg = _alg_part(st, S)
        pb = weitzenboeck_Pb(st.rf04_direct, S, fc)
        xi = weitzenboeck_xi(S, st.bivectors)
        r = max(r, sup(alg - pb), float(np.max(np.abs(alg.v - xi))))
        lit_pb = max(lit_pb, sup(alg - weitzenboeck_Pb(st.rf04_direct, S, fc, literal=True)))
        lit_xi = max(lit_xi, float(np.max(np.abs(alg.v - weitzenboeck_xi(S, st.bivectors, literal=True)))))
        dpart = max(dpart, sup(weitzenboeck_D_part(S, fc)))
    return {"residual": r, "Pb_sign_variant": lit_pb, "xi_untransposed_variant": lit_xi, "D_part": dpart}


@check("weitzenboeck_basis_invariance", "Σ_α ℛ^f(ξ_α)^T(ξ_α S) is independent of the orthonormal basis {ξ_α}",
       "weitzenboeck", E2, tol=1e-9)
def _basis(st):
    bv = st.bivectors
    V = bv.eigenbasis()
    r = 0.0
    for S in (st.w1, st.w2, st.S2):
        r = max(r, float(np.max(np.abs(weitzenboeck_xi(S, bv) - weitzenboeck_xi(S, bv, basis=V)))))
    return {"residual": r}


@check("weitzenboeck_one_forms", "ℜ^f(ω)(X) = Σ_i (R^f_{e_i,X}ω)(e_i) = ω(Σ_i R^f_{X,e_i}e_i)", "weitzenboeck", (),
       tol=1e-9)
def _k1(st):
    ric = jein("ab,mxab->mx", st.ctx.g_inv, st.rf13_direct)
    return {"residual": sup(_alg_part(st, st.w1) - jein("m,mx->x", st.w1, ric))}


@check("weitzenboeck_forms_to_forms", "ℜ^f(ω) is a form when 𝔇^f = 0", "weitzenboeck", ("r_condPP",), tol=1e-9)
def _forms(st):
    R = weitzenboeck_P(st.w2, st.fc)
    return {"residual": sup(R + R.transpose(1, 0))}


@check("weitzenboeck_K_correction", "ℜ^f(ω) = ℜ^0(ω) − 𝔎(ω)", "weitzenboeck", E2, tol=1e-9)
def _hat_ric(st):
    """Algebraic parts with K and without; the K-term with the opposite Ricci sign is reported."""
    fc = st.fc
    fz = zero_calculus(fc)
    r = lit = 0.0
    for S in (st.w1, st.w2):
        alg = _alg_part(st, S)
        r0 = weitzenboeck_P(S, fz) - weitzenboeck_D_part(S, fz)
        r = max(r, sup(alg - (r0 - k_frak(S, fc))))
        lit = max(lit, sup(alg - (r0 - k_frak(S, fc, literal=True))))
    return {"residual": r, "ricci_sign_variant": lit}


@check("weitzenboeck_decomposition", "Δ^f_H ω = ∇̆^{*f}∇^f ω + ℜ^f(ω)", "weitzenboeck", E2, tol=1e-8)
def _wei(st):
    a = sup(wei_residual(st.w1, st.fc))
    b = sup(wei_residual(st.w2, st.fc))
    return {"residual": max(a, b), "degree1": a, "degree2": b}


@check("weitzenboeck_adjoint", "g(ℜ^f(S_2), S_1) = g(S_2, ℜ^f_*(S_1)), ℜ^f_* built from ℛ^f(ξ)^T",
       "weitzenboeck", E2, tol=1e-9)
def _adjoint(st):
    """Pairing symmetry; the readings with f replaced by -f and with R^g P - K are reported."""
    bv = st.bivectors
    gi = st.ctx.g_inv
    S1, S2 = st.S2, st.w2
    a = pairing(weitzenboeck_xi(S2, bv), S1, gi)
    b = pairing(S2, weitzenboeck_xi(S1, bv, M=np.swapaxes(bv.R_f, 1, 2)), gi)
    bvn = BivectorOperators(negated_calculus(st.fc))
    c = pairing(S2, weitzenboeck_xi(S1, bvn), gi)
    d = pairing(S2, weitzenboeck_xi(S1, bv, M=bv.R_f_breve), gi)
    return {
        "residual": float(np.max(np.abs(a - b))),
        "negated_f_reading": float(np.max(np.abs(a - c))),
        "breve_reading": float(np.max(np.abs(a - d))),
    }


_C_CACHE = {}


def _c_emp(k, n, alternating):
    key = (k, n, alternating)
    if key not in _C_CACHE:
        _C_CACHE[key] = empirical_C(k, n, samples=64, seed=0, alternating=alternating)
    return _C_CACHE[key]


@check("weitzenboeck_lower_bound", "g(ℜ^f(S),S) ≥ min(λ_min,0)·C‖S‖², C‖S‖² ≥ Σ_α‖ξ_α S‖²", "weitzenboeck", E2,
       tol=1e-8)
def _positivity(st):
    """Pairing against the eigenvalue bound with the measured constant C; pairing = tr(M_sym G)."""
    r = ident = 0.0
    out = {}
    for name, S, k, alt in (("w1", st.w1, 1, False), ("w2", st.w2, 2, True), ("S2", st.S2, 2, False)):
        C = _c_emp(k, st.n, alt)
        rep = positivity_report(S, st.bivectors, st.fc, c_emp=C)
        r = max(r, float(np.max(rep["bound"] - rep["pairing"])), 0.0)
        ident = max(ident, float(np.max(np.abs(rep["pairing"] - rep["trace_form"]))))
        out[f"C_emp_{name}"] = C
        # the measured ratio at these points never exceeds C
        ratio = rep["xi_norm2"] / np.where(rep["norm2"] > 0, rep["norm2"], 1.0)
        out[f"ratio_excess_{name}"] = float(max(0.0, np.max(ratio) - C))
    out["residual"] = max(r, ident)
    out["trace_form_identity"] = ident
    out["lambda_min_negated"] = -float(np.min(np.linalg.eigvalsh(0.5 * (st.bivectors.R_f + np.swapaxes(st.bivectors.R_f, 1, 2)))[:, 0]))
    return out


@check("classical_weitzenboeck", "Δ_H ω = ∇*∇ω + ℜ(ω)", "weitzenboeck", (), tol=1e-9)
def _classical(st):
    r = 0.0
    for w in (st.w1, st.w2):
        r = max(r, sup(hodge_laplacian(w, st.ctx) - bochner_laplacian(w, st.ctx) - classical_weitzenboeck(w, st.ctx)))
    return {"residual": r}


# --- fixture-level -----------------------------------------------------------


@check("fixture_expectations", "declared hypothesis residual bounds of the fixture", "fixture",
       ("expectations_declared",), tol=0.5, kind="fixture")
def _expectations(spec, hyp_values):
    """Number of violated expectations; the residuals come from the same sample as the gates."""
    bad = 0
    out = {}
    for name, text in sorted(spec.expect.items()):
        op, bound = parse_expectation(text)
        value = hyp_values[name]
        out[f"value:{name}"] = value
        if not expectation_holds(op, bound, value):
            bad += 1
    out["residual"] = float(bad)
    return out


POINT_FINALIZERS = {"f_divergence_reduction": _divf4B_verdict}


def required_hypotheses(checks, spec=None):
    names = []
    for c in checks:
        for h in c.hypotheses:
            if h not in names:
                names.append(h)
        if c.kind == "fixture" and spec is not None:
            for h in sorted(spec.expect):
                if h not in names:
                    names.append(h)
    return names
