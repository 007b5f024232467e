import math

import mpmath
import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from ngtbochner.chartfield import Const, Coord, TorusChart, Unary
from ngtbochner.riemann import EvalContext, GeometryInput

settings.register_profile("ngt", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("ngt")

mpmath.mp.dps = 40


def mp_eval(node, x):
    """Independent high-precision evaluator for expression trees (test oracle)."""
    if isinstance(node, Const):
        return mpmath.mpf(node.value)
    if isinstance(node, Coord):
        return x[node.index]
    if isinstance(node, Unary):
        c = mp_eval(node.child, x)
        return {"neg": lambda v: -v, "sin": mpmath.sin, "cos": mpmath.cos, "exp": mpmath.exp}[node.op](c)
    a = mp_eval(node.left, x)
    if node.op == "pow":
        return a ** int(node.right.value)
    b = mp_eval(node.right, x)
    if node.op == "add":
        return a + b
    if node.op == "sub":
        return a - b
    if node.op == "mul":
        return a * b
    return a / b


def fd_grad_hess(node, point, h=1e-5):
    """Central finite differences in 40-digit arithmetic: no round-off, truncation O(h^2)."""
    n = len(point)
    x0 = [mpmath.mpf(float(c)) for c in point]
    h = mpmath.mpf(h)

    def f(shift):
        return mp_eval(node, [x0[i] + shift[i] for i in range(n)])

    def e(i, s):
        v = [0] * n
        v[i] = s
        return v

    grad = np.array([float((f(e(i, h)) - f(e(i, -h))) / (2 * h)) for i in range(n)])
    hess = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            def sh(a, b):
                v = [0] * n
                v[i] += a
                v[j] += b
                return v

            val = (f(sh(h, h)) - f(sh(h, -h)) - f(sh(-h, h)) + f(sh(-h, -h))) / (4 * h * h)
            hess[i, j] = float(val)
    return grad, hess


def expr_sources(dim, max_depth=6):
    """Random expression source text of bounded depth; denominators and exponents kept tame."""
    coord = st.integers(1, dim).map(lambda i: f"x{i}")
    const = st.floats(-2, 2, allow_nan=False).map(lambda c: f"{c:.3f}")
    leaf = st.one_of(coord, const)

    def extend(inner):
        return st.one_of(
            st.tuples(st.sampled_from(["sin", "cos"]), inner).map(lambda t: f"{t[0]}({t[1]})"),
            inner.map(lambda s: f"exp(0.3*sin({s}))"),
            st.tuples(inner, st.sampled_from(["+", "-", "*"]), inner).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
            st.tuples(inner, inner).map(lambda t: f"({t[0]})/(2.5+sin({t[1]}))"),
            st.tuples(inner, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
            inner.map(lambda s: f"-({s})"),
        )

    return st.recursive(leaf, extend, max_leaves=max_depth)


WARP4 = "(0.1*sin(x1)+0.075*cos(x2)+0.05*sin(x3+x4))"


def conformal_g(dim, u):
    return [[f"exp(2*{u})" if i == j else "0" for j in range(dim)] for i in range(dim)]


def two_plane_F(dim, coeffs):
    F = [["0"] * dim for _ in range(dim)]
    for a, c in enumerate(coeffs):
        F[2 * a][2 * a + 1] = c
        F[2 * a + 1][2 * a] = f"-({c})"
    return F


def random_points(n, count, seed=0):
    return np.random.default_rng(seed).uniform(0, 2 * math.pi, size=(count, n))


def make_ctx(g, F, points, order=2):
    geometry = GeometryInput(TorusChart(len(g)), g, F)
    return EvalContext.from_geometry(geometry, points, order=order)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def warped_ctx4():
    """Warped T^4 context, K = 0 data, on 24 random points."""
    g = conformal_g(4, WARP4)
    F = two_plane_F(4, ["0.5+0.2*sin(x3)", "0.25+0.1*cos(x1)"])
    return make_ctx(g, F, random_points(4, 24, seed=3))


def fixture_state(name, count=16, seed=0, order=2):
    """PointState of a built-in fixture on uniformly random points."""
    from ngtbochner.verifycli.fixtures import builtin
    from ngtbochner.verifycli.state import FieldSet, PointState

    spec = builtin(name)
    pts = random_points(spec.dim, count, seed=seed)
    return PointState(spec, spec.geometry(), FieldSet(spec.dim, spec.seed), pts, order=order)


def zero_K_fc(g, F, pts):
    from ngtbochner.chartfield import JetArray
    from ngtbochner.fcalc import FCalculus

    ctx = make_ctx(g, F, pts)
    n = len(g)
    return FCalculus(ctx, JetArray.constant(np.zeros((n, n, n)), ctx.batch, n, 2))


def sphere_fc(count=6):
    """Round sphere chart (theta = x1 in (0, pi)) with its area form, K = 0."""
    g = [["1", "0"], ["0", "sin(x1)^2"]]
    F = [["0", "sin(x1)"], ["-sin(x1)", "0"]]
    pts = np.column_stack([np.linspace(0.4, 2.7, count), np.linspace(0.3, 5.9, count)])
    return zero_K_fc(g, F, pts)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
