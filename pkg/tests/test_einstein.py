import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ngtbochner.chartfield import JetArray, evaluate_array, jein, parse_expr
from ngtbochner.einstein import (
    MODES,
    ContorsionError,
    ContorsionModel,
    E_field,
    E_star_lower,
    K_from_torsion,
    build_K,
    condE2_tensor,
    condKKZ_tensor,
    constant_einstein_nullspace,
    einstein_connection,
    einstein_matrix,
    eq_A_T_tensor,
    connection_from_torsion_lower,
    lemma_iii_tensor,
    lower_K,
    einstein_condition_tensor,
    nabla_g_tensor,
    nabla_gF_display_tensors,
    raise_K,
    residual_einstein_condition,
    residual_suite,
    skew_torsion_residual,
    solve_einstein,
    sup,
    synthesize_nullspace,
    torsion_from_K,
)
from ngtbochner.fcalc import einstein_condition_probe_residual, torsion_probe

from conftest import WARP4, conformal_g, fixture_state, make_ctx, random_points, two_plane_F

EINSTEIN_FIXTURES = ["flat_constant_T4", "nullspace_T4", "einstein_T4", "kaehler_T4"]


def _vec(srcs, pts, order=2):
    return evaluate_array([parse_expr(s, len(srcs)) for s in srcs], pts, order)


PROBE_SRC = [
    ["sin(x2)+0.3", "cos(x1+x3)", "0.5*sin(x4)", "cos(x2-x1)"],
    ["0.7", "sin(x3)*cos(x4)", "cos(x1)", "0.2+sin(x2+x4)"],
    ["cos(x4)", "0.4", "sin(x1-x3)", "cos(x2)"],
]


# --- the model ------------------------------------------------------------


def test_unknown_mode_lists_valid_modes():
    with pytest.raises(ContorsionError) as exc:
        ContorsionModel(mode="bogus")
    for m in MODES:
        assert m in str(exc.value)


def test_payload_required_and_shape_checked():
    with pytest.raises(ContorsionError):
        ContorsionModel(mode="explicit_K")
    with pytest.raises(ContorsionError, match="4x4x4"):
        ContorsionModel(mode="explicit_K", K=[[["0"]]]).payload_nodes(4)


def test_zero_mode():
    ctx = make_ctx(conformal_g(4, WARP4), two_plane_F(4, ["0.5", "0.25"]), random_points(4, 3))
    K = build_K(ContorsionModel("zero"), ctx)
    assert sup(K) == 0.0
    assert sup(einstein_connection(K, ctx) - ctx.gamma) == 0.0


def test_skew_from_dF_with_constant_F_is_zero():
    ctx = make_ctx(conformal_g(4, WARP4), two_plane_F(4, ["0.5", "0.25"]), random_points(4, 3))
    assert sup(build_K(ContorsionModel("skew_from_dF"), ctx)) == 0.0


def test_explicit_K_product_is_skew():
    # K(X,Y,Z) = psi(x) theta(X) A(Y,Z), A constant skew
    psi, theta = "(1+0.3*sin(x2+x4))", ["1", "-0.5", "0", "0.25"]
    A = np.array([[0, 1, -2, 0.5], [-1, 0, 0.3, 0], [2, -0.3, 0, 1], [-0.5, 0, -1, 0]])
    payload = [[[f"{psi}*{theta[i]}*{A[j, k]}" for k in range(4)] for j in range(4)] for i in range(4)]
    ctx = make_ctx(conformal_g(4, WARP4), two_plane_F(4, ["0.5", "0.25"]), random_points(4, 6))
    K = build_K(ContorsionModel("explicit_K", K=payload), ctx)
    assert residual_suite(K, ctx).r_condE2 <= 1e-12
    # lowering the built K recovers the payload values
    x = ctx.points
    amp = 1 + 0.3 * np.sin(x[:, 1] + x[:, 3])
    want = amp[:, None, None, None] * np.einsum("i,jk->ijk", np.array(theta, dtype=float), A)
    np.testing.assert_allclose(lower_K(K, ctx).v, want, atol=1e-13)


# --- torsion and contorsion -----------------------------------------------


def _random_K(rng, pts, order=2):
    srcs = [[[f"{rng.uniform(-1, 1):.3f}*sin(x{1 + (i + j + k) % 4}+{rng.uniform(0, 6):.3f})" for k in range(4)]
             for j in range(4)] for i in range(4)]
    nodes = [[[parse_expr(s, 4) for s in row] for row in plane] for plane in srcs]
    return evaluate_array(nodes, pts, order)


def test_torsion_trivial_cases(rng):
    ctx = make_ctx(conformal_g(4, WARP4), two_plane_F(4, ["0.5", "0.25"]), random_points(4, 4))
    K = _random_K(rng, ctx.points)
    assert sup(torsion_from_K(K.scale(0.0))) == 0.0
    sym = K + K.transpose(0, 2, 1)
    assert sup(torsion_from_K(sym)) <= 1e-15


def test_torsion_matches_connection_minus_bracket(rng):
    ctx = make_ctx(conformal_g(4, WARP4), two_plane_F(4, ["0.5", "0.25"]), random_points(4, 8))
    K = _random_K(rng, ctx.points)
    X, Y = _vec(PROBE_SRC[0], ctx.points), _vec(PROBE_SRC[1], ctx.points)
    direct = torsion_probe(X, Y, K, ctx)
    T = torsion_from_K(K)
    assert sup(direct - jein("kij,i,j->k", T, X, Y)) <= 1e-11


def test_K_from_zero_torsion(warped_ctx4):
    Tl = JetArray.constant(np.zeros((4, 4, 4)), warped_ctx4.batch, 4, order=1)
    for formula in ("einstein", "metric"):
        assert sup(K_from_torsion(Tl, warped_ctx4, formula)) == 0.0
    with pytest.raises(ContorsionError):
        K_from_torsion(Tl, warped_ctx4, "other")


def _f_compatible_three_forms(f):
    """Totally skew T with T(fX, Y) = T(X, fY), found as a constant linear nullspace."""
    n = f.shape[0]
    basis = []
    for a, b, c in itertools.combinations(range(n), 3):
        t = np.zeros((n, n, n))
        for perm, sgn in zip(itertools.permutations((a, b, c)), (1, -1, -1, 1, 1, -1)):
            t[perm] = sgn
        basis.append(t)
    B = np.array(basis)  # [m, x, y, z], lowered components on flat g

    def cond(t):
        # T(fX, Y, Z) - T(X, fY, Z)
        return np.einsum("pyz,px->xyz", t, f) - np.einsum("xpz,py->xyz", t, f)

    M = np.array([cond(t).ravel() for t in B]).T
    _, s, vt = np.linalg.svd(M)
    null = vt[np.sum(s > 1e-10):]
    return np.einsum("km,mxyz->kxyz", null, B)


def test_totally_skew_f_torsion_gives_half_T():
    # flat 6-torus with the standard Kaehler form: the f-compatible 3-forms are Re/Im of dz1^dz2^dz3
    ctx = make_ctx([["1" if i == j else "0" for j in range(6)] for i in range(6)],
                   two_plane_F(6, ["1", "1", "1"]), random_points(6, 2))
    sols = _f_compatible_three_forms(ctx.f.v[0])
    assert sols.shape[0] == 2
    for t in sols:
        Tl = JetArray.constant(t, ctx.batch, 6, order=1)
        K = K_from_torsion(Tl, ctx, "einstein")
        assert sup(K - Tl.scale(0.5)) <= 1e-12
        # the resulting connection has exactly this torsion
        Kup = raise_K(K, ctx)
        assert sup(torsion_from_K(Kup, ctx)[1] - Tl) <= 1e-12
        assert sup(eq_A_T_tensor(Kup, ctx)) <= 1e-12


@pytest.mark.parametrize("name", ["skewK_T4", "algebroid_T4"])
def test_metric_formula_inverts_torsion_on_skew_K(name):
    s = fixture_state(name)
    _, Tl = torsion_from_K(s.K, s.ctx)
    assert sup(nabla_g_tensor(s.K, s.ctx)) <= 1e-12
    assert sup(K_from_torsion(Tl, s.ctx, "metric") - lower_K(s.K, s.ctx)) <= 1e-10


@pytest.mark.parametrize("name", EINSTEIN_FIXTURES)
def test_einstein_formula_inverts_torsion_on_einstein_fixtures(name):
    s = fixture_state(name)
    _, Tl = torsion_from_K(s.K, s.ctx)
    assert sup(K_from_torsion(Tl, s.ctx, "einstein") - lower_K(s.K, s.ctx)) <= 1e-10


# --- the connection -------------------------------------------------------


@pytest.mark.parametrize("name", EINSTEIN_FIXTURES)
def test_two_construction_paths_agree(name):
    s = fixture_state(name)
    direct = s.ctx.gamma_lower + lower_K(s.K, s.ctx)
    assert sup(connection_from_torsion_lower(s.ctx, s.K) - direct) <= 1e-12


def test_flat_constant_K_gives_constant_coefficients():
    ctx = make_ctx([["1" if i == j else "0" for j in range(4)] for i in range(4)],
                   two_plane_F(4, ["0.5", "0.75"]), random_points(4, 3))
    K = build_K(ContorsionModel("constant_nullspace"), ctx)
    coeffs = einstein_connection(K, ctx)
    np.testing.assert_array_equal(coeffs.v, K.v)
    assert np.all(coeffs.v == coeffs.v[0])


def test_constant_nullspace_needs_flat_constant_data():
    with pytest.raises(ContorsionError):
        build_K(ContorsionModel("constant_nullspace"), make_ctx(
            conformal_g(4, WARP4), two_plane_F(4, ["0.5", "0.75"]), random_points(4, 2)))


# --- the Einstein condition -----------------------------------------------


def test_einstein_matrix_matches_loops(rng):
    n = 3
    G = rng.standard_normal((n, n))
    K = rng.standard_normal((n, n, n))  # [p, a, b] = (K_a d_b)^p
    out = (einstein_matrix(G) @ K.ravel()).reshape(n, n, n)
    loop = np.zeros((n, n, n))
    for x, y, z in itertools.product(range(n), repeat=3):
        for p in range(n):
            loop[x, y, z] += G[p, z] * K[p, y, x] + G[y, p] * K[p, x, z]
    np.testing.assert_allclose(out, loop, atol=1e-13)


def _einstein_condition_by_hand(G, K):
    """-(G(K_Y X, Z) + G(Y, K_X Z)) on coordinate fields: the Einstein condition for constant data."""
    n = G.shape[0]
    out = np.zeros((n, n, n))
    for x, y, z in itertools.product(range(n), repeat=3):
        out[x, y, z] = -sum(G[p, z] * K[p, y, x] + G[y, p] * K[p, x, z] for p in range(n))
    return out


def test_nullspace_synthesis_finding():
    F = np.zeros((4, 4))
    F[0, 1], F[2, 3] = 0.5, 0.75
    F -= F.T
    K, info = synthesize_nullspace(F)
    assert info == {"nullspace_dim": 2, "skew_intersection_dim": 0}
    assert np.linalg.norm(K) == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(_einstein_condition_by_hand(np.eye(4) + F, K))) <= 1e-12


@given(st.lists(st.floats(0.1, 2.0), min_size=2, max_size=2))
def test_every_nullspace_vector_is_einstein(planes):
    F = np.zeros((4, 4))
    F[0, 1], F[2, 3] = planes
    F -= F.T
    null = constant_einstein_nullspace(np.eye(4) + F)
    for v in null.T:
        assert np.max(np.abs(_einstein_condition_by_hand(np.eye(4) + F, v.reshape(4, 4, 4)))) <= 1e-10


def test_flat_zero_K_einstein_condition_vanishes():
    s = fixture_state("flat_constant_T4")
    assert residual_einstein_condition(s.K, s.ctx) <= 1e-13


@pytest.mark.parametrize("name", ["nullspace_T4", "einstein_T4"])
def test_einstein_condition_with_probe_fields(name):
    s = fixture_state(name)
    probes = [(s.X, s.Y, s.Z), (s.Y, s.Z, s.X)]
    assert residual_einstein_condition(s.K, s.ctx, probes) <= 1e-10


def test_nearly_kahler_mode_on_wrong_fixture_is_detected():
    T = [[["0"] * 4 for _ in range(4)] for _ in range(4)]
    for perm, sgn in zip(itertools.permutations((0, 1, 2)), (1, -1, -1, 1, 1, -1)):
        T[perm[0]][perm[1]][perm[2]] = str(0.3 * sgn)
    ctx = make_ctx(conformal_g(4, WARP4), two_plane_F(4, ["0.5", "0.25"]), random_points(4, 6))
    K = build_K(ContorsionModel("nearly_kahler", T=T), ctx)
    assert residual_einstein_condition(K, ctx) > 1e-3


def test_einstein_condition_probe_identity_is_multilinear_consistent():
    s = fixture_state("skewK_T4", count=8)
    X, Y, Z = s.X, s.Y, s.Z
    probe = einstein_condition_probe_residual(s.K, s.ctx, X, Y, Z)
    via_tensor = jein("xyz,x,y,z->", einstein_condition_tensor(s.K, s.ctx), X, Y, Z)
    assert sup(probe - via_tensor) <= 1e-11


def test_solved_K_derivative_matches_finite_differences():
    s = fixture_state("einstein_T4", count=1)
    x0 = s.points[0]
    h = 1e-5
    fd = []
    for a in range(4):
        pts = np.array([x0, x0])
        pts[0, a] += h
        pts[1, a] -= h
        ctx = make_ctx(s.spec.g, s.spec.F, pts, order=1)
        Kv = solve_einstein(ctx).v
        fd.append((Kv[0] - Kv[1]) / (2 * h))
    fd = np.stack(fd, axis=-1)
    np.testing.assert_allclose(s.K.d1[0], fd, atol=1e-8)


# --- the residual suite ---------------------------------------------------


@pytest.mark.parametrize("name", ["flat_constant_T2", "flat_constant_T4"])
def test_zero_K_residuals_vanish(name):
    s = fixture_state(name)
    res = residual_suite(s.K, s.ctx).as_dict()
    assert max(res.values()) <= 1e-12


def test_skew_K_residuals():
    s = fixture_state("skewK_T4")
    res = residual_suite(s.K, s.ctx)
    assert res.r_condE2 <= 1e-12
    assert sup(E_field(s.K, s.ctx) + jein("ij,j->i", s.ctx.g_inv, E_star_lower(s.K, s.ctx))) <= 1e-11
    assert sup(skew_torsion_residual(s.K, s.ctx)) <= 1e-12


def test_negative_control_is_detected():
    s = fixture_state("negcontrol_T4")
    res = residual_suite(s.K, s.ctx)
    assert res.r_condE2 > 0.1
    assert res.r_condKKZ > 1e-3


@pytest.mark.parametrize("name", ["skewK_T4", "algebroid_T4", "nullspace_T4", "negcontrol_T4", "einstein_T4"])
def test_condE2_implies_KKZ(name):
    s = fixture_state(name)
    if sup(condE2_tensor(s.K, s.ctx)) <= 1e-10:
        assert sup(condKKZ_tensor(s.K, s.ctx)) <= 1e-9


@pytest.mark.parametrize("name", EINSTEIN_FIXTURES + ["skewK_T4", "negcontrol_T4"])
def test_lemma_equivalences_under_einstein(name):
    s = fixture_state(name)
    res = residual_suite(s.K, s.ctx)
    if res.r_metein > 1e-10:
        return
    lemma = [res.r_nabla_g, res.r_condE2, sup(lemma_iii_tensor(s.K, s.ctx))]
    if min(lemma) <= 1e-10:
        assert max(lemma) <= 1e-9
    else:
        assert min(lemma) > 1e-6


@pytest.mark.parametrize("name", EINSTEIN_FIXTURES)
def test_torsion_displays_for_nabla_g_and_nabla_F(name):
    s = fixture_state(name)
    g_res, F_res = nabla_gF_display_tensors(s.K, s.ctx)
    assert sup(g_res) <= 1e-9
    assert sup(F_res) <= 1e-9


def test_literal_nabla_F_slots_fail_on_nullspace():
    s = fixture_state("nullspace_T4")
    _, literal = nabla_gF_display_tensors(s.K, s.ctx, literal_F_slots=True)
    assert sup(literal) > 1e-3
