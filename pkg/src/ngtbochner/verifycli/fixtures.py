"""Fixture descriptions: built-in geometries and the JSON fixture format."""

from __future__ import annotations

import copy
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..chartfield import ExprError, TorusChart, parse_expr
from ..einstein import MODES, T_FORMULAS, ContorsionError, ContorsionModel
from ..riemann import GeometryError, GeometryInput

DEFAULT_RESOLUTION = {2: 32, 4: 12}
TOP_KEYS = {
    "name",
    "description",
    "dim",
    "periods",
    "resolution",
    "g",
    "F",
    "contorsion",
    "seed",
    "tolerances",
    "claims",
    "expect",
}
KNOWN_CLAIMS = ("einstein",)


class FixtureError(ValueError):
    """Invalid fixture input; ``field`` names the offending entry when known."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


@dataclass
class FixtureSpec:
    name: str
    dim: int
    g: list
    F: list
    contorsion: dict
    periods: tuple = None
    resolution: int = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    claims: tuple = ()
    expect: dict = field(default_factory=dict)
    description: str = ""

    def chart(self, resolution=None):
        res = resolution or self.resolution or DEFAULT_RESOLUTION.get(self.dim, 8)
        return TorusChart(self.dim, self.periods, res)

    def geometry(self, resolution=None):
        return GeometryInput(self.chart(resolution), self.g, self.F)

    def model(self):
        c = self.contorsion
        return ContorsionModel(c["mode"], K=c.get("K"), T=c.get("T"), formula=c.get("formula", "einstein"))

    def to_dict(self):
        out = {
            "name": self.name,
            "description": self.description,
            "dim": self.dim,
            "periods": list(self.chart().periods),
            "resolution": self.chart().resolution,
            "g": self.g,
            "F": self.F,
            "contorsion": self.contorsion,
            "seed": self.seed,
        }
        if self.tolerances:
            out["tolerances"] = self.tolerances
        if self.claims:
            out["claims"] = list(self.claims)
        if self.expect:
            out["expect"] = self.expect
        return out


# ----------------------------------------------------------------------
# Validation


def _check_matrix(data, n, name):
    if not isinstance(data, list) or len(data) != n or any(not isinstance(r, list) or len(r) != n for r in data):
        raise FixtureError(f"expected a {n}x{n} array of expressions", name)
    out = []
    for i, row in enumerate(data):
        new = []
        for j, item in enumerate(row):
            new.append(_check_expr(item, n, f"{name}_{i + 1}{j + 1}"))
        out.append(new)
    return out


def _check_expr(item, n, where):
    if isinstance(item, bool) or not isinstance(item, (str, int, float)):
        raise FixtureError(f"expected an expression string or number, got {type(item).__name__}", where)
    text = str(item)
    try:
        parse_expr(text, n)
    except ExprError as exc:
        raise FixtureError(str(exc), where) from exc
    return text


def _check_payload(data, n, name):
    if np.shape(data) != (n, n, n):
        raise FixtureError(f"expected a {n}x{n}x{n} array of expressions", name)
    return [
        [[_check_expr(data[i][j][k], n, f"{name}_{i + 1}{j + 1}{k + 1}") for k in range(n)] for j in range(n)]
        for i in range(n)
    ]


def parse_expectation(text):
    """'>0.1' -> ('>', 0.1); accepted operators are >, >=, <, <=."""
    text = str(text).strip()
    for op in (">=", "<=", ">", "<"):
        if text.startswith(op):
            try:
                return op, float(text[len(op) :])
            except ValueError:
                break
    raise FixtureError(f"cannot read expectation {text!r}; use forms like '>0.1' or '<=1e-10'", "expect")


def expectation_holds(op, bound, value):
    return {">": value > bound, ">=": value >= bound, "<": value < bound, "<=": value <= bound}[op]


def fixture_from_dict(data, default_name="fixture"):
    if not isinstance(data, dict):
        raise FixtureError("fixture must be a JSON object")
    unknown = sorted(set(data) - TOP_KEYS)
    if unknown:
        raise FixtureError(f"unknown keys {unknown}; allowed: {sorted(TOP_KEYS)}")
    for key in ("dim", "g", "F"):
        if key not in data:
            raise FixtureError("missing required key", key)
    n = data["dim"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 2:
        raise FixtureError("must be an integer >= 2", "dim")
    periods = data.get("periods")
    if periods is not None:
        if not isinstance(periods, list) or len(periods) != n:
            raise FixtureError(f"expected {n} positive numbers", "periods")
        periods = tuple(float(p) for p in periods)
    resolution = data.get("resolution")
    if resolution is not None and (isinstance(resolution, bool) or not isinstance(resolution, int) or resolution < 4):
        raise FixtureError("must be an integer >= 4", "resolution")
    g = _check_matrix(data["g"], n, "g")
    F = _check_matrix(data["F"], n, "F")

    cont = data.get("contorsion", {"mode": "zero"})
    if not isinstance(cont, dict) or "mode" not in cont:
        raise FixtureError("expected an object with a 'mode' entry", "contorsion")
    mode = cont["mode"]
    if mode not in MODES:
        raise FixtureError(f"unknown contorsion mode {mode!r}; valid modes: {', '.join(MODES)}", "contorsion.mode")
    cont = dict(cont)
    if cont.get("formula", "einstein") not in T_FORMULAS:
        raise FixtureError(f"unknown formula; valid: {', '.join(T_FORMULAS)}", "contorsion.formula")
    for key in ("K", "T"):
        if key in cont and cont[key] is not None:
            cont[key] = _check_payload(cont[key], n, f"contorsion.{key}")

    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise FixtureError("must be a non-negative integer", "seed")
    tolerances = data.get("tolerances", {}) or {}
    if not isinstance(tolerances, dict) or not all(isinstance(v, (int, float)) and v > 0 for v in tolerances.values()):
        raise FixtureError("expected a map from check or hypothesis names to positive numbers", "tolerances")
    claims = tuple(data.get("claims", ()))
    bad = [c for c in claims if c not in KNOWN_CLAIMS]
    if bad:
        raise FixtureError(f"unknown claims {bad}; valid: {', '.join(KNOWN_CLAIMS)}", "claims")
    expect = dict(data.get("expect", {}) or {})
    for v in expect.values():
        parse_expectation(v)

    spec = FixtureSpec(
        name=str(data.get("name", default_name)),
        dim=n,
        g=g,
        F=F,
        contorsion=cont,
        periods=periods,
        resolution=resolution,
        seed=seed,
        tolerances={k: float(v) for k, v in tolerances.items()},
        claims=claims,
        expect=expect,
        description=str(data.get("description", "")),
    )
    validate(spec)
    return spec


def validate(spec):
    """Geometry and contorsion invariants; raises FixtureError naming the failing field."""
    try:
        chart = spec.chart()
    except ValueError as exc:
        raise FixtureError(str(exc), "periods") from exc
    try:
        GeometryInput(chart, spec.g, spec.F).validate()
    except GeometryError as exc:
        field_name = "g" if str(exc).startswith("g ") else "F"
        raise FixtureError(str(exc), field_name) from exc
    try:
        spec.model()
    except ContorsionError as exc:
        raise FixtureError(str(exc), "contorsion") from exc
    return spec


def load_fixture(ref):
    """A fixture by built-in name (optionally prefixed ``builtin:``) or JSON file path."""
    name = ref[len("builtin:") :] if ref.startswith("builtin:") else ref
    if name in BUILTINS:
        return builtin(name)
    if ref.startswith("builtin:"):
        raise FixtureError(f"unknown built-in fixture {name!r}; available: {', '.join(BUILTINS)}")
    path = Path(ref)
    if not path.exists():
        raise FixtureError(f"no built-in fixture or file named {ref!r}; built-ins: {', '.join(BUILTINS)}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise FixtureError(f"cannot read {ref}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FixtureError(f"{ref}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return fixture_from_dict(data, default_name=path.stem)


# ----------------------------------------------------------------------
# Built-in geometries


def _diag(entries):
    n = len(entries)
    return [[entries[i] if i == j else "0" for j in range(n)] for i in range(n)]


def _two_planes(a, b):
    F = [["0"] * 4 for _ in range(4)]
    F[0][1], F[1][0] = a, f"-({a})"
    F[2][3], F[3][2] = b, f"-({b})"
    return F


def _zeros3(n):
    return [[["0"] * n for _ in range(n)] for _ in range(n)]


_WARP = "(0.1*sin(x1)+0.075*cos(x2)+0.05*sin(x3+x4))"


def _skew_payload():
    # totally skew constant pattern on the index triples (1,2,3) and (1,2,4), scaled by a function
    K = _zeros3(4)
    psi = "(1+0.5*sin(x1+x3))"
    for base, c in (((0, 1, 2), 0.3), ((0, 1, 3), 0.2)):
        for perm in itertools.permutations(range(3)):
            idx = tuple(base[p] for p in perm)
            sign = round(np.linalg.det(np.eye(3)[list(perm)]))
            K[idx[0]][idx[1]][idx[2]] = f"{sign * c}*{psi}"
    return K


def _negcontrol_payload():
    K = _zeros3(4)
    K[0][1][1] = "0.3*(1+0.4*cos(x2))"  # symmetric in the last two slots
    K[1][2][3] = "0.2"
    K[2][0][2] = "0.25*sin(x4)"
    K[3][3][0] = "-0.15"
    return K


def _algebroid_payload():
    K = _zeros3(4)
    K[0][2][3] = "0.3*(1+0.5*sin(x1+x2))"
    K[0][3][2] = "-0.3*(1+0.5*sin(x1+x2))"
    return K


_A = "(0.1*sin(x1)+0.05*cos(x2))"
_B = "(0.075*cos(x3)+0.05*sin(x4))"

_BUILTIN_DATA = {
    "flat_constant_T2": {
        "description": "flat 2-torus, constant F = 1/2 dx1^dx2, K = 0",
        "dim": 2,
        "g": _diag(["1", "1"]),
        "F": [["0", "0.5"], ["-0.5", "0"]],
        "contorsion": {"mode": "zero"},
        "seed": 1,
        "claims": ["einstein"],
    },
    "flat_constant_T4": {
        "description": "flat 4-torus, constant F on two planes, K = 0",
        "dim": 4,
        "g": _diag(["1"] * 4),
        "F": _two_planes("0.5", "0.25"),
        "contorsion": {"mode": "zero"},
        "seed": 2,
        "claims": ["einstein"],
    },
    "warped_T4": {
        "description": "conformally flat 4-torus with non-constant F and K = 0",
        "dim": 4,
        "g": _diag([f"exp(2*{_WARP})"] * 4),
        "F": _two_planes("0.5+0.2*sin(x3)", "0.25+0.1*cos(x1)"),
        "contorsion": {"mode": "zero"},
        "seed": 3,
        "expect": {"r_condE2": "<=1e-12", "r_condPP": ">0.1"},
    },
    "skewK_T4": {
        "description": "conformally flat 4-torus, constant F, totally skew K with non-constant amplitude",
        "dim": 4,
        "g": _diag([f"exp(2*{_WARP})"] * 4),
        "F": _two_planes("0.5", "0.25"),
        "contorsion": {"mode": "explicit_K", "K": _skew_payload()},
        "seed": 4,
        "expect": {"r_condE2": "<=1e-12", "r_metein": ">0.1"},
    },
    "nullspace_T4": {
        "description": "flat 4-torus, constant F with a nontrivial constant Einstein nullspace",
        "dim": 4,
        "g": _diag(["1"] * 4),
        "F": _two_planes("0.5", "0.75"),
        "contorsion": {"mode": "constant_nullspace"},
        "seed": 5,
        "claims": ["einstein"],
        "expect": {"r_condE2": ">0.1"},
    },
    "negcontrol_T4": {
        "description": "negative control: K not skew in its last two slots",
        "dim": 4,
        "g": _diag([f"exp(2*{_WARP})"] * 4),
        "F": _two_planes("0.5", "0.25"),
        "contorsion": {"mode": "explicit_K", "K": _negcontrol_payload()},
        "seed": 6,
        "expect": {"r_condE2": ">0.1"},
    },
    "einstein_T4": {
        "description": "flat 4-torus, non-constant F, K from the pointwise Einstein solve",
        "dim": 4,
        "g": _diag(["1"] * 4),
        "F": _two_planes("0.25+0.1*sin(x3)", "0.5+0.1*cos(x1)"),
        "contorsion": {"mode": "solve_einstein"},
        "seed": 7,
        "claims": ["einstein"],
    },
    "algebroid_T4": {
        "description": "flat 4-torus, degenerate F = dx1^dx2, skew K with torsion in ker f (D = 0)",
        "dim": 4,
        "g": _diag(["1"] * 4),
        "F": _two_planes("1", "0"),
        "contorsion": {"mode": "explicit_K", "K": _algebroid_payload()},
        "seed": 8,
        "expect": {"r_condPP": "<=1e-12", "r_condE2": "<=1e-12"},
    },
    "kaehler_T4": {
        "description": "product of two conformal 2-tori with their area forms, K = 0",
        "dim": 4,
        "g": _diag([f"exp(2*{_A})"] * 2 + [f"exp(2*{_B})"] * 2),
        "F": _two_planes(f"exp(2*{_A})", f"exp(2*{_B})"),
        "contorsion": {"mode": "zero"},
        "seed": 9,
        "claims": ["einstein"],
    },
}

BUILTINS = tuple(_BUILTIN_DATA)


def builtin(name):
    if name not in _BUILTIN_DATA:
        raise FixtureError(f"unknown built-in fixture {name!r}; available: {', '.join(BUILTINS)}")
    data = copy.deepcopy(_BUILTIN_DATA[name])
    data["name"] = name
    return fixture_from_dict(data)


def nullspace_fixture(dim=4, planes=(0.5, 0.75), name="nullspace_synth"):
    """Fixture file content with the constant Einstein nullspace solution written out explicitly."""
    from ..einstein import synthesize_nullspace

    if dim % 2 or dim < 2:
        raise FixtureError("dimension must be even", "dim")
    F = np.zeros((dim, dim))
    for a in range(dim // 2):
        c = planes[a % len(planes)] * (1 + a // len(planes))
        F[2 * a, 2 * a + 1], F[2 * a + 1, 2 * a] = c, -c
    K, info = synthesize_nullspace(F)
    # flat metric: lowered components K(d_i, d_j, d_l) = K^l_ij
    Kl = np.transpose(K, (1, 2, 0))
    data = {
        "name": name,
        "description": f"constant Einstein nullspace solution (nullspace dim {info['nullspace_dim']}, "
        f"skew part dim {info['skew_intersection_dim']})",
        "dim": dim,
        "periods": [2 * math.pi] * dim,
        "resolution": DEFAULT_RESOLUTION.get(dim, 8),
        "g": _diag(["1"] * dim),
        "F": [[repr(float(F[i, j])) for j in range(dim)] for i in range(dim)],
        "contorsion": {
            "mode": "explicit_K",
            "K": [[[repr(float(Kl[i, j, k])) for k in range(dim)] for j in range(dim)] for i in range(dim)],
        },
        "seed": 0,
        "claims": ["einstein"],
    }
    return data, info
