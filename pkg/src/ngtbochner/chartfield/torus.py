"""Flat periodic charts, uniform sampling grids and quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRID_CAP = 10**6


class GridCapError(ValueError):
    """Raised when a grid would exceed the configured number of points."""


@dataclass(frozen=True)
class TorusChart:
    dim: int
    periods: tuple = None
    resolution: int = 16

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("torus dimension must be at least 2")
        periods = self.periods
        if periods is None:
            periods = (2 * math.pi,) * self.dim
        periods = tuple(float(p) for p in periods)
        if len(periods) != self.dim:
            raise ValueError(f"expected {self.dim} periods, got {len(periods)}")
        if any(p <= 0 for p in periods):
            raise ValueError("periods must be positive")
        if self.resolution < 4:
            raise ValueError("grid resolution must be at least 4")
        object.__setattr__(self, "periods", periods)

    @property
    def npoints(self):
        return self.resolution**self.dim

    @property
    def volume(self):
        return float(np.prod(self.periods))

    @property
    def cell_volume(self):
        return self.volume / self.npoints

    def with_resolution(self, resolution):
        return TorusChart(self.dim, self.periods, resolution)


@dataclass(frozen=True)
class Point:
    coords: tuple
    periods: tuple = field(default=None, compare=False)

    def __post_init__(self):
        c = tuple(float(x) for x in self.coords)
        if self.periods is not None:
            c = tuple(x % p for x, p in zip(c, self.periods))
            # x % p can round up to p for tiny negative x
            c = tuple(0.0 if x >= p else x for x, p in zip(c, self.periods))
        object.__setattr__(self, "coords", c)


def grid_coordinates(chart, cap=GRID_CAP):
    """Uniform grid as an (N, n) array, C-ordered with the last axis fastest."""
    if chart.resolution**chart.dim > cap:
        raise GridCapError(f"grid of {chart.resolution}^{chart.dim} points exceeds the cap of {cap}")
    axes = [np.arange(chart.resolution) * (p / chart.resolution) for p in chart.periods]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def sample_grid(chart, cap=GRID_CAP):
    """Grid as a list of :class:`Point` (no endpoint duplication)."""
    return [Point(tuple(row), chart.periods) for row in grid_coordinates(chart, cap)]


def iter_chunks(points, size):
    for start in range(0, len(points), size):
        yield start, points[start : start + size]


def integrate(values, chart, density=None):
    """Uniform-weight quadrature of ``values * density`` over the torus."""
    values = np.asarray(values, dtype=float).ravel()
    if values.shape[0] != chart.npoints:
        raise ValueError(f"expected {chart.npoints} samples, got {values.shape[0]}")
    if density is not None:
        density = np.asarray(density, dtype=float).ravel()
        if density.shape != values.shape:
            raise ValueError("values and density lengths differ")
        values = values * density
    return float(np.sum(values)) * chart.cell_volume
