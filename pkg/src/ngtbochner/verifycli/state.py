"""Per-chunk evaluation state shared by the checks: context, test fields and cached operators."""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from ..chartfield import JetArray, evaluate_array, parse_expr
from ..curvature import BivectorOperators, parallel_jet, rf13_direct
from ..einstein import build_K
from ..fcalc import FCalculus, laplacians
from ..riemann import EvalContext
from ..tensoralg import alternate_jet


def sup(x):
    v = x.v if isinstance(x, JetArray) else np.asarray(x)
    return float(np.max(np.abs(v), initial=0.0))


def _rand_scalar(rng, n):
    parts = [f"{rng.uniform(-0.5, 0.5):.4f}"]
    for fn in ("sin", "cos"):
        k = rng.integers(-1, 2, size=n)
        if not k.any():
            k[rng.integers(n)] = 1
        arg = ""
        for i, ki in enumerate(k):
            if ki:
                arg += ("+" if ki > 0 and arg else "-" if ki < 0 else "") + f"x{i + 1}"
        arg += f"+{rng.uniform(0, 2 * math.pi):.4f}"
        parts.append(f"{rng.uniform(0.3, 1.0):.4f}*{fn}({arg})")
    return "+".join(parts)


class FieldSet:
    """Random trigonometric test fields, fixed by the seed and parsed once."""

    def __init__(self, dim, seed):
        rng = np.random.default_rng([seed, 7919])
        n = dim
        self.dim = n
        self.seed = seed

        def arr(shape):
            if not shape:
                return _rand_scalar(rng, n)
            return [arr(shape[1:]) for _ in range(shape[0])]

        self.sources = {
            "X": arr((n,)),
            "Y": arr((n,)),
            "Z": arr((n,)),
            "w1": arr((n,)),
            "w1b": arr((n,)),
            "A2": arr((n, n)),
            "S2": arr((n, n)),
            "V11": arr((n, n)),
            "S3": arr((n, n, n)),
            "psi": arr(()),
        }
        self.nodes = {k: self._parse(v) for k, v in self.sources.items()}

    def _parse(self, src):
        if isinstance(src, str):
            return parse_expr(src, self.dim)
        return [self._parse(s) for s in src]

    def evaluate(self, name, points, order):
        nodes = self.nodes[name]
        if name == "psi":
            return evaluate_array([nodes], points, order)[0]
        return evaluate_array(nodes, points, order)


class PointState:
    """Everything the checks need on one batch of points, computed lazily."""

    def __init__(self, spec, geometry, fields, points, order=2, offset=0):
        self.spec = spec
        self.fields = fields
        self.points = points
        self.order = order
        self.offset = offset
        self.ctx = EvalContext.from_geometry(geometry, points, order=order)
        self.model = spec.model()
        self.n = spec.dim
        self._field_cache = {}

    @property
    def N(self):
        return self.points.shape[0]

    @cached_property
    def K(self):
        return build_K(self.model, self.ctx)

    @cached_property
    def fc(self):
        return FCalculus(self.ctx, self.K)

    def field(self, name):
        if name not in self._field_cache:
            self._field_cache[name] = self.fields.evaluate(name, self.points, self.order)
        return self._field_cache[name]

    def __getattr__(self, name):
        # test fields by name: st.X, st.w1, ...
        fields = self.__dict__.get("fields")
        if fields is not None and name in fields.nodes:
            return self.field(name)
        raise AttributeError(name)

    @cached_property
    def w2(self):
        A = self.field("A2")
        return (A - A.transpose(1, 0)).scale(0.5)

    @cached_property
    def w3(self):
        return alternate_jet(self.field("S3"))

    @cached_property
    def rng(self):
        return np.random.default_rng([self.fields.seed, 104729, self.offset])

    @cached_property
    def parallel(self):
        """Random fields with vanishing nabla^g at each point: X, Y, Z, a 1-form and a (1,1) tensor."""
        rng = self.rng
        N, n, gam = self.N, self.n, self.ctx.gamma
        return {
            "X": parallel_jet(rng.standard_normal((N, n)), gam, 1),
            "Y": parallel_jet(rng.standard_normal((N, n)), gam, 1),
            "Z": parallel_jet(rng.standard_normal((N, n)), gam, 1),
            "w": parallel_jet(rng.standard_normal((N, n)), gam, 0),
            "V": parallel_jet(rng.standard_normal((N, n, n)), gam, 1),
        }

    @cached_property
    def constant_forms(self):
        n = self.n
        a = np.zeros(n)
        a[0] = 1.0
        b = np.zeros((n, n))
        b[0, 1], b[1, 0] = 1.0, -1.0
        return [JetArray.constant(a, self.N, n, self.order), JetArray.constant(b, self.N, n, self.order)]

    def laplacians(self, name):
        key = ("lap", name)
        if key not in self._field_cache:
            self._field_cache[key] = laplacians(getattr(self, name), self.fc)
        return self._field_cache[key]

    @cached_property
    def rf13_direct(self):
        return rf13_direct(self.fc)

    @cached_property
    def rf04_direct(self):
        from ..chartfield import jein

        return jein("wm,mxyz->xyzw", self.ctx.g, self.rf13_direct)

    @cached_property
    def bivectors(self):
        return BivectorOperators(self.fc)

    @cached_property
    def bivectors_direct(self):
        return BivectorOperators(self.fc, rf04=self.rf04_direct)

    @cached_property
    def density(self):
        return self.ctx.sqrt_det_g
