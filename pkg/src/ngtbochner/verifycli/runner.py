"""Evaluate the selected checks on one fixture.

Hypotheses and pointwise checks run on a deterministic strided sample of the
grid; integral checks run on the full grid in chunks.  Conclusions of checks
whose hypotheses fail are not evaluated.
"""

from __future__ import annotations

import math
import time

import numpy as np

from ..chartfield import grid_coordinates
from . import checks as C
from .report import CheckReport, RunReport, decide
from .state import FieldSet, PointState

DEFAULT_SAMPLE = 256
POINT_CHUNK = 64
GRID_CHUNK = 2592


def sample_indices(npoints, cap, resolution):
    """Evenly strided indices; the stride is made coprime to the resolution so every axis varies."""
    if cap <= 0 or cap >= npoints:
        return np.arange(npoints)
    stride = max(1, npoints // cap)
    while math.gcd(stride, resolution) != 1:
        stride += 1
    return (np.arange(cap) * stride) % npoints


def _merge_max(acc, vals):
    for k, v in vals.items():
        v = float(v)
        acc[k] = v if k not in acc else max(acc[k], v)


def run_fixture(spec, selection=None, resolution=None, seed=None, sample=DEFAULT_SAMPLE, timings=True):
    chosen = C.select(selection)
    seed = spec.seed if seed is None else seed
    chart = spec.chart(resolution)
    geometry = spec.geometry(chart.resolution)
    fields = FieldSet(spec.dim, seed)
    grid = grid_coordinates(chart)
    idx = sample_indices(len(grid), sample, chart.resolution)
    pts = grid[idx]

    for name in spec.expect:
        if name not in C.HYPOTHESES:
            raise KeyError(f"fixture expectation names unknown hypothesis {name!r}")

    states = [
        PointState(spec, geometry, fields, pts[s : s + POINT_CHUNK], order=2, offset=s)
        for s in range(0, len(pts), POINT_CHUNK)
    ]

    # hypotheses
    hyp_vals = {}
    for name in C.required_hypotheses(chosen, spec):
        h = C.HYPOTHESES[name]
        if h.fixture_level:
            hyp_vals[name] = float(h.fn(spec))
        else:
            hyp_vals[name] = max(float(h.fn(st)) for st in states)

    def hyp_tol(name):
        return spec.tolerances.get(name, C.HYPOTHESES[name].tol)

    def applicable(c):
        return all(hyp_vals[h] <= hyp_tol(h) for h in c.hypotheses)

    results = {}
    times = {}

    # pointwise checks on the sample
    for c in chosen:
        if c.kind != "point" or not applicable(c):
            continue
        t0 = time.perf_counter()
        acc = {}
        try:
            for st in states:
                _merge_max(acc, c.fn(st))
            if c.id in C.POINT_FINALIZERS:
                acc["residual"] = float(C.POINT_FINALIZERS[c.id](acc))
        except Exception as exc:  # a crash is reported as a failed check
            acc = {"residual": None, "error": f"{type(exc).__name__}: {exc}"}
        results[c.id] = acc
        times[c.id] = time.perf_counter() - t0

    # integral checks on the full grid
    integral = [c for c in chosen if c.kind == "integral" and applicable(c)]
    for order in sorted({c.order for c in integral}):
        group = [c for c in integral if c.order == order]
        partial = {c.id: {} for c in group}
        failed = {}
        for c in group:
            times[c.id] = 0.0
        for s in range(0, len(grid), GRID_CHUNK):
            st = PointState(spec, geometry, fields, grid[s : s + GRID_CHUNK], order=order, offset=s)
            for c in group:
                if c.id in failed:
                    continue
                t0 = time.perf_counter()
                try:
                    for k, dens in c.fn(st).items():
                        partial[c.id].setdefault(k, []).append(float(np.sum(dens)))
                except Exception as exc:
                    failed[c.id] = f"{type(exc).__name__}: {exc}"
                times[c.id] += time.perf_counter() - t0
        for c in group:
            if c.id in failed:
                results[c.id] = {"residual": None, "error": failed[c.id]}
                continue
            totals = {k: math.fsum(v) * chart.cell_volume for k, v in partial[c.id].items()}
            out = {f"integral:{k}": v for k, v in totals.items()}
            out.update({k: float(v) for k, v in c.finalize(totals).items()})
            results[c.id] = out

    # fixture-level checks
    for c in chosen:
        if c.kind == "fixture" and applicable(c):
            t0 = time.perf_counter()
            results[c.id] = c.fn(spec, hyp_vals)
            times[c.id] = time.perf_counter() - t0

    reports = []
    for c in chosen:
        hyps = {h: hyp_vals[h] for h in c.hypotheses}
        htols = {h: hyp_tol(h) for h in c.hypotheses}
        tol = spec.tolerances.get(c.id, c.tol)
        res = results.get(c.id)
        residual = None if res is None else res.get("residual")
        meta = {} if res is None else {k: v for k, v in res.items() if k != "residual"}
        meta["sample_points"] = len(pts) if c.kind == "point" else 0
        meta["quadrature_points"] = len(grid) if c.kind == "integral" else 0
        if c.kind == "fixture":
            meta.update({f"hypothesis:{k}": v for k, v in hyp_vals.items() if k in spec.expect})
        reports.append(
            CheckReport(
                id=c.id,
                anchor=c.anchor,
                group=c.group,
                kind=c.kind,
                hypotheses=hyps,
                hypothesis_tolerances=htols,
                residual=None if residual is None else float(residual),
                tolerance=tol,
                verdict=decide(residual, tol, hyps, htols),
                metadata=meta,
                wall_time=round(times.get(c.id, 0.0), 6) if timings else 0.0,
            )
        )
    return RunReport(spec.name, chart.resolution, seed, len(pts), len(grid), reports)
