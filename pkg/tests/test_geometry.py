import numpy as np
import pytest

from orbitcover.errors import (
    CoincidentAgentsError,
    DegenerateCellError,
    EmptyRegionError,
    NonConvexError,
    ParameterError,
)
from orbitcover.geometry import (
    ConvexPolygon,
    ConvexRegion,
    DensityField,
    clip_vertices,
    edge_kernel,
    halfplane_intersect,
    polygon_moments,
    polygon_second_moment,
)

UNIT_SQUARE = ConvexPolygon.from_vertices([(0, 0), (1, 0), (1, 1), (0, 1)])
RECT = ConvexPolygon.from_vertices([(0, 0), (4, 0), (4, 2.8), (0, 2.8)])


def sorted_ring(vertices):
    v = np.asarray(vertices)
    start = np.lexsort((v[:, 1], v[:, 0]))[0]
    return np.roll(v, -start, axis=0)


class TestHalfplaneIntersect:
    def test_axis_aligned_cut(self):
        out = halfplane_intersect(UNIT_SQUARE, (1.0, 0.0), 0.5)
        expected = [(0, 0), (0.5, 0), (0.5, 1), (0, 1)]
        assert np.allclose(sorted_ring(out.vertices), sorted_ring(expected))
        assert out.area == pytest.approx(0.5, abs=1e-15)

    def test_halfplane_contains_polygon(self):
        out = halfplane_intersect(UNIT_SQUARE, (1.0, 0.0), 2.0)
        assert np.array_equal(out.vertices, UNIT_SQUARE.vertices)

    def test_halfplane_excludes_polygon(self):
        out = halfplane_intersect(UNIT_SQUARE, (-1.0, 0.0), -2.0)
        assert out.is_empty

    def test_idempotent(self, rng):
        for _ in range(25):
            pts = rng.random((8, 2)) * 4
            hull = ConvexPolygon.from_vertices(_hull(pts))
            a = rng.normal(size=2)
            a /= np.hypot(*a)
            b = float(rng.normal())
            once = halfplane_intersect(hull, a, b)
            twice = halfplane_intersect(once, a, b)
            if once.is_empty:
                assert twice.is_empty
                continue
            assert len(once.vertices) == len(twice.vertices)
            assert np.allclose(once.vertices, twice.vertices, atol=1e-12 * once.diameter)


def _hull(pts):
    from scipy.spatial import ConvexHull

    return pts[ConvexHull(pts).vertices]


class TestPolygonMoments:
    def test_unit_square_uniform(self, uniform):
        mass, centroid = polygon_moments(UNIT_SQUARE, uniform)
        assert mass == pytest.approx(1.0, abs=1e-15)
        assert np.allclose(centroid, (0.5, 0.5), atol=1e-15)

    def test_room_rectangle(self, uniform):
        mass, centroid = polygon_moments(RECT, uniform)
        assert mass == pytest.approx(11.2, rel=1e-12)
        assert np.allclose(centroid, (2.0, 1.4), atol=1e-12)

    def test_triangle(self, uniform):
        tri = ConvexPolygon.from_vertices([(0, 0), (1, 0), (0, 1)])
        mass, centroid = polygon_moments(tri, uniform)
        assert mass == pytest.approx(0.5, abs=1e-15)
        assert np.allclose(centroid, (1 / 3, 1 / 3), atol=1e-15)

    def test_empty_polygon_raises(self, uniform):
        with pytest.raises(DegenerateCellError):
            polygon_moments(ConvexPolygon.empty(), uniform)

    def test_additivity_under_chord_split(self, rng, uniform, bump):
        # The uniform path is closed-form and additively exact; the gaussian
        # path is limited by the per-piece triangle quadrature error.
        for phi, tol in ((uniform, 1e-10), (bump, 1e-5)):
            for _ in range(10):
                poly = ConvexPolygon.from_vertices(_hull(rng.random((9, 2)) * 3))
                a = rng.normal(size=2)
                a /= np.hypot(*a)
                b = float(a @ poly.vertices.mean(axis=0))
                left = halfplane_intersect(poly, a, b)
                right = halfplane_intersect(poly, -a, -b)
                total, _ = polygon_moments(poly, phi)
                m_l, _ = polygon_moments(left, phi)
                m_r, _ = polygon_moments(right, phi)
                assert m_l + m_r == pytest.approx(total, rel=tol)

    def test_monte_carlo_uniform(self, rng, uniform):
        poly = ConvexPolygon.from_vertices(_hull(rng.random((10, 2)) * 5))
        mass, centroid = polygon_moments(poly, uniform)
        lo, hi = poly.vertices.min(axis=0), poly.vertices.max(axis=0)
        pts = lo + rng.random((1_000_000, 2)) * (hi - lo)
        nxt = np.roll(poly.vertices, -1, axis=0)
        inside = np.ones(len(pts), dtype=bool)
        for (vx, vy), (wx, wy) in zip(poly.vertices, nxt):
            inside &= (wx - vx) * (pts[:, 1] - vy) - (wy - vy) * (pts[:, 0] - vx) >= 0
        mc_mass = np.prod(hi - lo) * inside.mean()
        assert mass == pytest.approx(mc_mass, rel=1e-2)
        assert np.allclose(centroid, pts[inside].mean(axis=0), atol=1e-2 * poly.diameter)

    def test_gaussian_mass_positive_and_sane(self, bump):
        mass, centroid = polygon_moments(RECT, bump)
        # floor alone contributes 0.3 * 11.2; the bump adds at most 2*pi*width^2.
        assert mass > 0.3 * 11.2
        assert mass < 0.3 * 11.2 + 2 * np.pi * 1.2 ** 2 + 1e-9
        assert RECT.contains(centroid)

    def test_second_moment_square_about_center(self, uniform):
        val = polygon_second_moment(UNIT_SQUARE, uniform, (0.5, 0.5))
        assert val == pytest.approx(1 / 6, rel=1e-12)


class TestEdgeKernel:
    def test_zero_length_segment(self, uniform):
        ker = edge_kernel([(2.0, 1.0), (2.0, 1.0)], (1.0, 1.0), (3.0, 1.0), uniform)
        assert not ker.D.any() and not ker.P.any()

    def test_analytic_line_integral(self, uniform):
        ker = edge_kernel([(2.0, 0.0), (2.0, 2.8)], (1.0, 1.0), (3.0, 1.0), uniform)
        assert np.allclose(ker.P, (1.4, 0.56), rtol=1e-12)

    def test_matches_independent_quadrature(self, uniform, bump):
        from scipy.integrate import simpson

        seg = np.array([(2.0, 0.0), (2.0, 2.8)])
        z_k = np.array([1.0, 1.0])
        z_i = np.array([3.0, 1.0])
        ts = np.linspace(0.0, 1.0, 10_001)
        pts = seg[0] + ts[:, None] * (seg[1] - seg[0])
        for phi in (uniform, bump):
            ker = edge_kernel(seg, z_k, z_i, phi)
            dens = phi(pts) * 2.8 / 2.0
            offs = pts - z_k
            p_ref = np.array([simpson(dens * offs[:, a], x=ts) for a in range(2)])
            d_ref = np.array([[simpson(dens * offs[:, a] * pts[:, b], x=ts)
                               for b in range(2)] for a in range(2)])
            assert np.allclose(ker.P, p_ref, rtol=1e-10, atol=1e-12)
            assert np.allclose(ker.D, d_ref, rtol=1e-10, atol=1e-12)

    def test_gl_precision_against_fine_subdivision(self, bump):
        # Split the segment in half; both GL evaluations must agree closely.
        seg = np.array([(2.0, 0.0), (2.0, 2.8)])
        mid = np.array([2.0, 1.4])
        z_k, z_i = np.array([1.0, 1.0]), np.array([3.0, 1.0])
        whole = edge_kernel(seg, z_k, z_i, bump)
        lower = edge_kernel([seg[0], mid], z_k, z_i, bump)
        upper = edge_kernel([mid, seg[1]], z_k, z_i, bump)
        assert np.allclose(whole.D, lower.D + upper.D, rtol=1e-10)
        assert np.allclose(whole.P, lower.P + upper.P, rtol=1e-10)

    def test_density_scaling_is_linear(self, bump):
        class Scaled:
            is_uniform = False

            def __init__(self, base, c):
                self.base, self.c = base, c

            def __call__(self, pts):
                return self.c * self.base(pts)

        seg = [(2.0, 0.0), (2.0, 2.8)]
        base = edge_kernel(seg, (1.0, 1.0), (3.0, 1.0), bump)
        scaled = edge_kernel(seg, (1.0, 1.0), (3.0, 1.0), Scaled(bump, 4.0))
        assert np.array_equal(scaled.D, 4.0 * base.D)
        assert np.array_equal(scaled.P, 4.0 * base.P)

    def test_coincident_agents_raise(self, uniform):
        with pytest.raises(CoincidentAgentsError):
            edge_kernel([(2.0, 0.0), (2.0, 2.8)], (1.0, 1.0), (1.0, 1.0), uniform)

    def test_off_bisector_segment_raises(self, uniform):
        with pytest.raises(ParameterError):
            edge_kernel([(2.5, 0.0), (2.5, 2.8)], (1.0, 1.0), (3.0, 1.0), uniform)


class TestConvexRegion:
    def test_normalized_edges(self, room):
        assert np.allclose(np.hypot(*room.normals.T), 1.0, atol=1e-12)
        assert np.all(room.offsets > 0)
        assert np.allclose(room.origin_shift, (2.0, 1.4))
        assert np.allclose(sorted_ring(room.world_vertices()),
                           sorted_ring([(0, 0), (4, 0), (4, 2.8), (0, 2.8)]))

    def test_h_values_room_point(self, room):
        h = room.h_values(room.to_frame((1.0, 1.0)))
        assert sorted(np.round(h, 12)) == pytest.approx([1.0, 1.0, 1.8, 3.0])

    def test_centered_region_keeps_frame(self):
        region = ConvexRegion.from_vertices([(-1, -1), (1, -1), (1, 1), (-1, 1)])
        assert np.allclose(region.origin_shift, (0.0, 0.0))
        assert np.allclose(region.offsets, 1.0)

    def test_non_convex_raises_with_index(self):
        with pytest.raises(NonConvexError) as err:
            ConvexRegion.from_vertices([(0, 0), (4, 0), (2, 1.0), (4, 2.8), (0, 2.8)])
        assert err.value.vertex_index is not None

    def test_shrink_uniform_offset(self, room):
        inner = room.shrink(0.1)
        assert np.allclose(sorted_ring(inner.world_vertices()),
                           sorted_ring([(0.1, 0.1), (3.9, 0.1), (3.9, 2.7), (0.1, 2.7)]),
                           atol=1e-12)

    def test_shrink_zero_is_identity(self, room):
        same = room.shrink(0.0)
        assert np.allclose(sorted_ring(same.world_vertices()),
                           sorted_ring(room.world_vertices()), atol=1e-12)

    def test_shrink_past_inradius_raises(self):
        square = ConvexRegion.from_vertices([(0, 0), (1, 0), (1, 1), (0, 1)])
        with pytest.raises(EmptyRegionError):
            square.shrink(0.6)


class TestDensityField:
    def test_uniform_is_one(self, uniform, rng):
        pts = rng.random((50, 2))
        assert np.array_equal(uniform(pts), np.ones(50))

    def test_bump_positive(self, bump, rng):
        pts = rng.random((100, 2)) * 10 - 5
        assert np.all(bump(pts) > 0)

    def test_bad_parameters(self):
        with pytest.raises(ParameterError):
            DensityField.gaussian_bump(center=(0, 0), width=0.0)
        with pytest.raises(ParameterError):
            DensityField.gaussian_bump(center=(0, 0), width=1.0, floor=0.0)
        with pytest.raises(ParameterError):
            DensityField(kind="perlin")


def test_clip_vertices_preserves_object_when_inside():
    v = UNIT_SQUARE.vertices
    out = clip_vertices(v, np.array([1.0, 0.0]), 5.0)
    assert out is v
