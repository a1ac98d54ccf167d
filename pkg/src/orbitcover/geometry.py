"""Convex-polygon primitives.

Half-plane clipping, density-weighted area/centroid/second moments, and the
bisector-edge line integrals that feed the centroid Jacobians.  All functions
are pure; polygons and regions are immutable.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import (
    CoincidentAgentsError,
    DegenerateCellError,
    EmptyRegionError,
    NonConvexError,
    ParameterError,
)

# Scale-relative tolerance used for vertex dedup, on-bisector checks and
# shared-edge detection throughout the geometry layer.
REL_TOL = 1e-9

_EMPTY = np.zeros((0, 2))

# 16-node Gauss-Legendre rule on [-1, 1] for segment line integrals.
_SEG_X, _SEG_W = (a.copy() for a in roots_legendre(16))

# Degree-7-exact positive rule on the reference triangle {x,y>=0, x+y<=1},
# built as a collapsed product of 4-node Gauss-Jacobi (weight 1-u) and
# 4-node Gauss-Legendre rules.
_ju, _jw = roots_jacobi(4, 1, 0)
_lu, _lw = roots_legendre(4)
_ju = 0.5 * (_ju + 1.0)
_lu = 0.5 * (_lu + 1.0)
_TRI_X = np.repeat(_ju, 4)
_TRI_Y = np.tile(_lu, 4) * (1.0 - _TRI_X)
# 1/4 from the Jacobi interval map, 1/2 from the Legendre one; weights sum
# to the reference-triangle area 1/2.
_TRI_W = np.repeat(_jw, 4) * np.tile(_lw, 4) * 0.125


@dataclasses.dataclass(frozen=True)
class DensityField:
    """Strictly positive event-density over the plane.

    ``uniform`` evaluates to 1 everywhere; ``gaussian-bump`` is
    ``floor + exp(-|w - center|^2 / (2 width^2))`` with ``floor > 0``.
    """

    kind: str = "uniform"
    center: tuple[float, float] | None = None
    width: float | None = None
    floor: float | None = None

    def __post_init__(self):
        if self.kind == "uniform":
            return
        if self.kind != "gaussian-bump":
            raise ParameterError(f"unknown density kind {self.kind!r}")
        if self.center is None or self.width is None or self.floor is None:
            raise ParameterError("gaussian-bump density needs center, width, floor")
        if self.width <= 0.0:
            raise ParameterError("density width must be positive")
        if self.floor <= 0.0:
            raise ParameterError("density floor must be positive")

    @classmethod
    def uniform(cls) -> "DensityField":
        return cls(kind="uniform")

    @classmethod
    def gaussian_bump(cls, center, width, floor=0.1) -> "DensityField":
        return cls(kind="gaussian-bump", center=(float(center[0]), float(center[1])),
                   width=float(width), floor=float(floor))

    @property
    def is_uniform(self) -> bool:
        return self.kind == "uniform"

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.is_uniform:
            return np.ones(pts.shape[:-1])
        d2 = np.sum((pts - np.asarray(self.center)) ** 2, axis=-1)
        return self.floor + np.exp(-0.5 * d2 / (self.width * self.width))


@dataclasses.dataclass(frozen=True)
class EdgeKernel:
    """Line-integral pair over a shared cell edge: D is 2x2, P is a 2-vector."""

    D: np.ndarray
    P: np.ndarray

    @classmethod
    def zero(cls) -> "EdgeKernel":
        return cls(D=np.zeros((2, 2)), P=np.zeros(2))


def _signed_area(vertices: np.ndarray) -> float:
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _diameter(vertices: np.ndarray) -> float:
    if len(vertices) == 0:
        return 0.0
    diff = vertices[:, None, :] - vertices[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2).max()))


def _dedup_ring(vertices: np.ndarray, tol: float) -> np.ndarray:
    if len(vertices) == 0:
        return _EMPTY
    keep = [vertices[0]]
    for v in vertices[1:]:
        if max(abs(v[0] - keep[-1][0]), abs(v[1] - keep[-1][1])) > tol:
            keep.append(v)
    while len(keep) > 1 and max(abs(keep[0][0] - keep[-1][0]),
                                abs(keep[0][1] - keep[-1][1])) <= tol:
        keep.pop()
    if len(keep) < 3:
        return _EMPTY
    return np.asarray(keep)


@dataclasses.dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon with counterclockwise vertices; may be empty."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def empty(cls) -> "ConvexPolygon":
        return cls(vertices=_EMPTY)

    @classmethod
    def from_vertices(cls, points) -> "ConvexPolygon":
        """Validating constructor: orients CCW, drops duplicate and collinear
        vertices, and rejects reflex corners."""
        v = np.asarray(points, dtype=float).reshape(-1, 2)
        if len(v) == 0:
            return cls.empty()
        scale = max(_diameter(v), 1e-300)
        v = _dedup_ring(v, 1e-12 * scale)
        if len(v) < 3:
            return cls.empty()
        if _signed_area(v) < 0.0:
            v = v[::-1].copy()
        cross_tol = REL_TOL * scale * scale
        kept = []
        n = len(v)
        for i in range(n):
            prev, cur, nxt = v[i - 1], v[i], v[(i + 1) % n]
            cross = (cur[0] - prev[0]) * (nxt[1] - cur[1]) - (cur[1] - prev[1]) * (nxt[0] - cur[0])
            if cross < -cross_tol:
                raise NonConvexError(f"reflex corner at vertex {i}", vertex_index=i)
            if cross > cross_tol:
                kept.append(cur)
        if len(kept) < 3:
            return cls.empty()
        return cls(vertices=np.asarray(kept))

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) < 3

    @property
    def area(self) -> float:
        if self.is_empty:
            return 0.0
        return _signed_area(self.vertices)

    @property
    def diameter(self) -> float:
        return _diameter(self.vertices)

    def contains(self, point, tol: float = 0.0) -> bool:
        if self.is_empty:
            return False
        p = np.asarray(point, dtype=float)
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        cross = (nxt[:, 0] - v[:, 0]) * (p[1] - v[:, 1]) - (nxt[:, 1] - v[:, 1]) * (p[0] - v[:, 0])
        return bool(np.all(cross >= -tol))


def clip_vertices(vertices: np.ndarray, a, b: float, scale: float | None = None) -> np.ndarray:
    """Clip a CCW vertex ring with the half-plane ``{w : b - a.w >= 0}``.

    Returns the input array object unchanged when no vertex is cut, so
    callers can detect no-ops with an identity check.  ``scale`` sets the
    vertex-dedup length scale; it defaults to the ring diameter.
    """
    n = len(vertices)
    if n == 0:
        return vertices
    h = b - vertices[:, 0] * a[0] - vertices[:, 1] * a[1]
    hmax = h.max()
    if h.min() >= 0.0:
        return vertices
    if hmax < 0.0:
        return _EMPTY
    out = []
    for i in range(n):
        hs, he = h[i - 1], h[i]
        if he >= 0.0:
            if hs < 0.0:
                s, e = vertices[i - 1], vertices[i]
                t = hs / (hs - he)
                out.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
            out.append((vertices[i][0], vertices[i][1]))
        elif hs > 0.0:
            s, e = vertices[i - 1], vertices[i]
            t = hs / (hs - he)
            out.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
    result = np.asarray(out) if out else _EMPTY
    if scale is None:
        scale = max(_diameter(vertices), 1e-300)
    return _dedup_ring(result, 1e-12 * scale)


def halfplane_intersect(poly: ConvexPolygon, a, b: float) -> ConvexPolygon:
    """Intersect a convex polygon with the half-plane ``{w : b - a.w >= 0}``."""
    a = np.asarray(a, dtype=float)
    clipped = clip_vertices(poly.vertices, a, float(b))
    if clipped is poly.vertices:
        return poly
    return ConvexPolygon(vertices=clipped)


def _linear_moments(v: np.ndarray):
    """Shoelace area and first moments (integral of 1, x, y)."""
    x, y = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x, -1), np.roll(y, -1)
    cross = x * y1 - x1 * y
    area = 0.5 * cross.sum()
    sx = ((x + x1) * cross).sum() / 6.0
    sy = ((y + y1) * cross).sum() / 6.0
    return area, sx, sy


def _quadratic_moments(v: np.ndarray):
    """Shoelace integrals of x^2, x*y, y^2 over the polygon."""
    x, y = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x, -1), np.roll(y, -1)
    cross = x * y1 - x1 * y
    ixx = ((x * x + x * x1 + x1 * x1) * cross).sum() / 12.0
    iyy = ((y * y + y * y1 + y1 * y1) * cross).sum() / 12.0
    ixy = ((2.0 * x * y + x * y1 + x1 * y + 2.0 * x1 * y1) * cross).sum() / 24.0
    return ixx, ixy, iyy


def _triangle_fan_nodes(v: np.ndarray):
    """Gauss nodes/weights for the fan triangulation about the vertex mean."""
    apex = v.mean(axis=0)
    p1 = v
    p2 = np.roll(v, -1, axis=0)
    e1 = p1 - apex
    e2 = p2 - apex
    # (n_tri, n_nodes, 2) nodes; weights carry the affine-map Jacobian,
    # which equals twice the triangle area.
    nodes = (apex[None, None, :]
             + _TRI_X[None, :, None] * e1[:, None, :]
             + _TRI_Y[None, :, None] * e2[:, None, :])
    twice_area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    weights = _TRI_W[None, :] * twice_area[:, None]
    return nodes.reshape(-1, 2), weights.reshape(-1)


def polygon_moments(poly: ConvexPolygon, phi: DensityField):
    """Density-weighted mass and centroid of a nonempty convex polygon."""
    if poly.is_empty:
        raise DegenerateCellError("cannot take moments of an empty polygon")
    v = poly.vertices
    if phi.is_uniform:
        area, sx, sy = _linear_moments(v)
        if area <= 0.0:
            raise DegenerateCellError("polygon has zero area")
        return area, np.array([sx / area, sy / area])
    nodes, weights = _triangle_fan_nodes(v)
    vals = weights * phi(nodes)
    mass = vals.sum()
    if mass <= 0.0:
        raise DegenerateCellError("polygon has zero mass")
    first = vals @ nodes
    return float(mass), first / mass


def polygon_second_moment(poly: ConvexPolygon, phi: DensityField, about) -> float:
    """Integral of ``|w - about|^2 * phi(w)`` over the polygon."""
    if poly.is_empty:
        raise DegenerateCellError("cannot take moments of an empty polygon")
    p = np.asarray(about, dtype=float)
    v = poly.vertices
    if phi.is_uniform:
        area, sx, sy = _linear_moments(v)
        ixx, _, iyy = _quadratic_moments(v)
        return float(ixx + iyy - 2.0 * (p[0] * sx + p[1] * sy) + (p @ p) * area)
    nodes, weights = _triangle_fan_nodes(v)
    d2 = np.sum((nodes - p) ** 2, axis=1)
    return float(np.sum(weights * phi(nodes) * d2))


def edge_kernel(segment, z_k, z_i, phi: DensityField) -> EdgeKernel:
    """Line integrals over a bisector segment shared by the cells of two agents.

    ``D = int (w - z_k) w^T / |z_k - z_i| phi(w) dl`` and
    ``P = int (w - z_k)   / |z_k - z_i| phi(w) dl`` with arclength measure.
    The segment must lie on the perpendicular bisector of ``(z_k, z_i)``.
    """
    z_k = np.asarray(z_k, dtype=float)
    z_i = np.asarray(z_i, dtype=float)
    seg = np.asarray(segment, dtype=float).reshape(2, 2)
    gx = z_k[0] - z_i[0]
    gy = z_k[1] - z_i[1]
    dist = math.hypot(gx, gy)
    scale = max(1.0, dist, float(np.abs(seg).max()), abs(z_k[0]), abs(z_k[1]))
    if dist <= REL_TOL * scale:
        raise CoincidentAgentsError("edge kernel of coincident agents")
    cx = seg[1, 0] - seg[0, 0]
    cy = seg[1, 1] - seg[0, 1]
    length = math.hypot(cx, cy)
    if length <= REL_TOL * scale:
        return EdgeKernel.zero()
    # Signed distance of both endpoints from the bisector line.
    half_gap = 0.5 * (z_k[0] * z_k[0] + z_k[1] * z_k[1] - z_i[0] * z_i[0] - z_i[1] * z_i[1])
    for end in seg:
        resid = abs(end[0] * gx + end[1] * gy - half_gap) / dist
        if resid > REL_TOL * scale:
            raise ParameterError("segment does not lie on the agent bisector")
    mid = 0.5 * (seg[0] + seg[1])
    nodes = mid + 0.5 * _SEG_X[:, None] * np.array([cx, cy])
    w = (0.5 * length / dist) * _SEG_W
    if not phi.is_uniform:
        w = w * phi(nodes)
    offs = nodes - z_k
    p_vec = w @ offs
    d_mat = (offs * w[:, None]).T @ nodes
    return EdgeKernel(D=d_mat, P=p_vec)


@dataclasses.dataclass(frozen=True)
class ConvexRegion:
    """Convex polygonal region stored as matching vertex and half-plane lists.

    The representation is kept in a frame whose origin is strictly interior,
    so every half-plane offset is positive; ``origin_shift`` maps frame
    coordinates back to the coordinates the region was built from
    (``world = frame + origin_shift``).
    """

    vertices: np.ndarray      # (M, 2) CCW
    normals: np.ndarray       # (M, 2) outward unit normals a_j
    offsets: np.ndarray       # (M,) b_j > 0
    origin_shift: np.ndarray  # (2,)

    def __post_init__(self):
        for name in ("vertices", "normals", "offsets", "origin_shift"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_vertices(cls, points) -> "ConvexRegion":
        poly = ConvexPolygon.from_vertices(points)
        if poly.is_empty:
            raise EmptyRegionError("region polygon is empty or degenerate")
        v = poly.vertices.copy()
        edges = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        normals = np.column_stack((edges[:, 1], -edges[:, 0])) / lengths[:, None]
        offsets = np.sum(normals * v, axis=1)
        shift = np.zeros(2)
        if offsets.min() <= REL_TOL * poly.diameter:
            shift = v.mean(axis=0)
            v = v - shift
            offsets = offsets - normals @ shift
        if offsets.min() <= 0.0:
            raise EmptyRegionError("region has no strict interior")
        return cls(vertices=v, normals=normals, offsets=offsets, origin_shift=shift)

    @property
    def n_edges(self) -> int:
        return len(self.offsets)

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def diameter(self) -> float:
        return _diameter(self.vertices)

    def polygon(self) -> ConvexPolygon:
        return ConvexPolygon(vertices=self.vertices)

    def world_vertices(self) -> np.ndarray:
        return self.vertices + self.origin_shift

    def to_world(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) + self.origin_shift

    def to_frame(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) - self.origin_shift

    def h_values(self, points) -> np.ndarray:
        """Inward distance to every boundary edge: ``h_j(w) = b_j - a_j.w``."""
        pts = np.asarray(points, dtype=float)
        return self.offsets - pts @ self.normals.T

    def min_h(self, points) -> np.ndarray:
        return self.h_values(points).min(axis=-1)

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        return self.min_h(points) > margin

    def density_mass(self, phi: DensityField) -> float:
        mass, _ = polygon_moments(self.polygon(), phi)
        return mass

    def shrink(self, eps: float) -> "ConvexRegion":
        """Region with every half-plane offset reduced by ``eps``."""
        if eps < 0.0:
            raise ParameterError("shrink distance must be nonnegative")
        v = self.vertices
        for a, b in zip(self.normals, self.offsets):
            v = clip_vertices(v, a, b - eps)
            if len(v) == 0:
                raise EmptyRegionError(f"shrinking by {eps} empties the region")
        poly = ConvexPolygon.from_vertices(v)
        if poly.is_empty or poly.area <= (REL_TOL * self.diameter) ** 2:
            raise EmptyRegionError(f"shrinking by {eps} empties the region")
        return ConvexRegion.from_vertices(poly.vertices + self.origin_shift)


def shrink_region(region: ConvexRegion, eps: float) -> ConvexRegion:
    """Region with every half-plane offset reduced by ``eps``; see
    :meth:`ConvexRegion.shrink`."""
    return region.shrink(eps)
