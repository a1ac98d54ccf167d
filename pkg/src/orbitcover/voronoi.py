"""Voronoi partition of a convex region induced by an agent configuration.

Cells are built by clipping the region with perpendicular-bisector
half-planes; adjacency is derived from positive-length shared edges.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import CoincidentAgentsError, DegenerateCellError, OutOfRegionError
from .geometry import REL_TOL, ConvexPolygon, ConvexRegion, DensityField, clip_vertices, polygon_moments


@dataclasses.dataclass(frozen=True)
class Configuration:
    """Agent center positions, one 2-vector per agent."""

    centers: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float).reshape(-1, 2)
        c.setflags(write=False)
        object.__setattr__(self, "centers", c)

    @property
    def n(self) -> int:
        return len(self.centers)

    def validate_in(self, region: ConvexRegion) -> None:
        tol = REL_TOL * region.diameter
        c = self.centers
        if self.n > 1:
            diff = c[:, None, :] - c[None, :, :]
            d2 = (diff * diff).sum(axis=2)
            np.fill_diagonal(d2, np.inf)
            if d2.min() <= tol * tol:
                i, k = np.unravel_index(int(d2.argmin()), d2.shape)
                raise CoincidentAgentsError(f"agents {i} and {k} coincide")
        inside = region.min_h(c)
        if np.any(inside <= 0.0):
            k = int(np.argmin(inside))
            raise OutOfRegionError(f"agent {k} lies outside the region")

    def replace(self, k: int, center) -> "Configuration":
        c = self.centers.copy()
        c[k] = center
        return Configuration(centers=c)


@dataclasses.dataclass(frozen=True)
class VoronoiPartition:
    """Cells, shared-edge segments and the adjacency map of a configuration."""

    cells: tuple[ConvexPolygon, ...]
    shared_edges: dict
    adjacency: tuple[frozenset, ...]

    @property
    def n(self) -> int:
        return len(self.cells)

    def shared_edge(self, i: int, k: int):
        return self.shared_edges.get((min(i, k), max(i, k)))


@dataclasses.dataclass(frozen=True)
class CellMoments:
    """Density-weighted mass and centroid of every cell."""

    mass: np.ndarray      # (N,)
    centroid: np.ndarray  # (N, 2)

    def __post_init__(self):
        for name in ("mass", "centroid"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def bisector_halfplane(z_k, z_i):
    """Half-plane ``{w : b - a.w >= 0}`` of points at least as close to z_k."""
    gap = np.asarray(z_i, dtype=float) - np.asarray(z_k, dtype=float)
    dist = math.hypot(gap[0], gap[1])
    a = gap / dist
    b = float(a @ (0.5 * (np.asarray(z_k) + np.asarray(z_i))))
    return a, b


def shared_edge_of_cell(cell_vertices: np.ndarray, z_k, z_i, tol: float):
    """Segment of a cell boundary lying on the bisector of ``(z_k, z_i)``.

    Returns a (2, 2) endpoint array with lexicographically sorted endpoints,
    or ``None`` when the cell has no positive-length edge on that bisector.
    """
    if len(cell_vertices) < 2:
        return None
    a, b = bisector_halfplane(z_k, z_i)
    resid = np.abs(b - cell_vertices @ a)
    on = cell_vertices[resid <= tol]
    if len(on) < 2:
        return None
    tangent = np.array([-a[1], a[0]])
    s = on @ tangent
    lo, hi = on[int(np.argmin(s))], on[int(np.argmax(s))]
    if math.hypot(hi[0] - lo[0], hi[1] - lo[1]) <= tol:
        return None
    if (lo[0], lo[1]) > (hi[0], hi[1]):
        lo, hi = hi, lo
    return np.array([lo, hi])


def compute_partition(region: ConvexRegion, cfg: Configuration) -> VoronoiPartition:
    """Clip the region into one convex cell per agent and derive adjacency."""
    cfg.validate_in(region)
    c = cfg.centers
    n = cfg.n
    diam = region.diameter
    tol = REL_TOL * diam
    base = region.vertices

    cells = []
    cutters: list[list[int]] = []
    for k in range(n):
        poly = base
        cut_by = []
        if n > 1:
            diff = c - c[k]
            d2 = (diff * diff).sum(axis=1)
            order = np.argsort(d2, kind="stable")
            for i in order:
                if i == k:
                    continue
                # Once every current vertex is closer to z_k than half the
                # distance to z_i, no remaining (farther) bisector can cut.
                rel = poly - c[k]
                circ2 = (rel * rel).sum(axis=1).max()
                if d2[i] >= 4.0 * circ2:
                    break
                a, b = bisector_halfplane(c[k], c[i])
                new_poly = clip_vertices(poly, a, b, scale=diam)
                if new_poly is not poly:
                    cut_by.append(int(i))
                    poly = new_poly
                if len(poly) == 0:
                    raise DegenerateCellError(f"cell {k} collapsed to zero area")
        cells.append(ConvexPolygon(vertices=poly))
        cutters.append(cut_by)

    shared_edges = {}
    for k in range(n):
        for i in cutters[k]:
            key = (min(i, k), max(i, k))
            if key in shared_edges:
                continue
            seg = shared_edge_of_cell(cells[key[0]].vertices, c[key[0]], c[key[1]], tol)
            if seg is not None:
                shared_edges[key] = seg

    neighbor_sets = [set() for _ in range(n)]
    for (i, k) in shared_edges:
        neighbor_sets[i].add(k)
        neighbor_sets[k].add(i)
    adjacency = tuple(frozenset(s) for s in neighbor_sets)
    return VoronoiPartition(cells=tuple(cells), shared_edges=shared_edges, adjacency=adjacency)


def cell_moments(partition: VoronoiPartition, phi: DensityField) -> CellMoments:
    """Mass and centroid of every cell under the density field."""
    mass = np.empty(partition.n)
    centroid = np.empty((partition.n, 2))
    for k, cell in enumerate(partition.cells):
        mass[k], centroid[k] = polygon_moments(cell, phi)
    return CellMoments(mass=mass, centroid=centroid)


def is_loc(cfg: Configuration, moments: CellMoments, tol: float) -> bool:
    """True when every agent center sits on its cell centroid within ``tol``."""
    gap = cfg.centers - moments.centroid
    return bool(np.hypot(gap[:, 0], gap[:, 1]).max() <= tol)
