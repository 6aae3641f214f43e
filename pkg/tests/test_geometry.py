import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from iterfilter.errors import InvalidInput
from iterfilter.geometry import (KDTree, TriangleMesh, farthest_point_sample, knn,
                                 normalize_to_unit_sphere, point_mesh_sq_dists,
                                 point_to_triangle_distance, sample_mesh_uniform)

from oracles import barycentric_grid, brute_knn, dense_triangle_min_dist, quadratic_fps


class TestNormalize:
    def test_single_point_clamps_radius(self):
        out, tf = normalize_to_unit_sphere([[5.0, 5.0, 5.0]])
        np.testing.assert_array_equal(out, [[0.0, 0.0, 0.0]])
        np.testing.assert_array_equal(tf.center, [5.0, 5.0, 5.0])
        assert tf.radius == 1.0

    def test_symmetric_pair(self):
        pts = np.array([[-1.0, 0, 0], [1.0, 0, 0]])
        out, tf = normalize_to_unit_sphere(pts)
        np.testing.assert_array_equal(tf.center, [0, 0, 0])
        assert tf.radius == 1.0
        np.testing.assert_array_equal(out, pts)

    def test_random_box_max_norm_and_roundtrip(self, rng):
        pts = rng.uniform([-3, 0, 10], [5, 2, 11], size=(100, 3))
        out, tf = normalize_to_unit_sphere(pts)
        # exhaustive max-distance check against the reported center
        exhaustive = max(np.sqrt(((p - tf.center) ** 2).sum()) for p in pts)
        assert tf.radius == pytest.approx(exhaustive, rel=1e-15)
        assert abs(np.linalg.norm(out, axis=1).max() - 1.0) < 1e-9
        back = tf.invert(out)
        assert np.all(np.abs(back - pts) <= 1e-12 * np.maximum(np.abs(pts), 1.0))

    @pytest.mark.parametrize("bad", [np.empty((0, 3)), [[0.0, np.nan, 1.0]], [[np.inf, 0, 0]]])
    def test_invalid(self, bad):
        with pytest.raises(InvalidInput):
            normalize_to_unit_sphere(bad)

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 40), st.just(3)),
                  elements=st.floats(-1e3, 1e3, allow_nan=False, width=64)))
    def test_roundtrip_property(self, pts):
        out, tf = normalize_to_unit_sphere(pts)
        back = tf.invert(out)
        scale = max(float(np.abs(pts).max()), tf.radius, 1.0)
        assert np.all(np.abs(back - pts) <= 1e-12 * scale)


class TestKnn:
    def test_collinear(self):
        cloud = [[1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0]]
        assert knn([0, 0, 0], cloud, 2).tolist() == [0, 1]

    def test_tie_prefers_lower_index(self):
        cloud = np.zeros((10, 3)) + 5.0
        cloud[3] = [1.0, 0, 0]
        cloud[7] = [-1.0, 0, 0]
        assert knn([0, 0, 0], cloud, 2).tolist() == [3, 7]
        assert knn([0, 0, 0], cloud, 1).tolist() == [3]

    def test_too_many(self):
        with pytest.raises(InvalidInput):
            knn([0, 0, 0], [[1.0, 0, 0]], 2)

    def test_kdtree_matches_brute_force(self, rng):
        cloud = rng.random((1000, 3))
        tree = KDTree(cloud)
        queries = rng.random((50, 3))
        got = tree.query(queries, 32)
        for q, row in zip(queries, got):
            assert row.tolist() == brute_knn(q, cloud, 32)

    def test_ties_on_lattice(self):
        # integer lattice: many exact distance ties across the candidate boundary
        g = np.arange(6, dtype=np.float64)
        cloud = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
        tree = KDTree(cloud)
        for q in ([2.0, 2.0, 2.0], [0.0, 0.0, 0.0], [2.5, 2.5, 2.5]):
            for m in (1, 7, 19, 27):
                assert tree.query(np.array(q), m)[0].tolist() == brute_knn(q, cloud, m)


class TestFPS:
    def test_square_diagonal(self):
        sq = [[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0], [1.0, 1, 0]]
        assert farthest_point_sample(sq, 2, start=0).tolist() == [0, 3]

    def test_full_permutation(self, rng):
        pts = rng.random((30, 3))
        out = farthest_point_sample(pts, 30, seed=4)
        assert sorted(out.tolist()) == list(range(30))

    def test_permutation_with_duplicates(self):
        pts = np.zeros((5, 3))
        assert sorted(farthest_point_sample(pts, 5, seed=0).tolist()) == list(range(5))

    def test_matches_quadratic_oracle(self, rng):
        pts = rng.random((200, 3))
        got = farthest_point_sample(pts, 10, seed=11)
        assert got.tolist() == quadratic_fps(pts, 10, int(got[0]))

    def test_first_index_is_seeded(self, rng):
        pts = rng.random((100, 3))
        first = int(np.random.default_rng(5).integers(100))
        assert farthest_point_sample(pts, 3, seed=5)[0] == first

    def test_prefix_consistent(self, rng):
        pts = rng.random((80, 3))
        for k in range(2, 12):
            a = farthest_point_sample(pts, k, seed=2)
            b = farthest_point_sample(pts, k - 1, seed=2)
            assert a[:-1].tolist() == b.tolist()

    def test_too_many(self):
        with pytest.raises(InvalidInput):
            farthest_point_sample([[0.0, 0, 0]], 2)


class TestMeshSampling:
    def test_single_triangle_centroid(self, unit_triangle):
        mesh = TriangleMesh(unit_triangle, [[0, 1, 2]])
        pts = sample_mesh_uniform(mesh, 1000, seed=0)
        assert np.linalg.norm(pts.mean(axis=0) - unit_triangle.mean(axis=0)) < 0.05
        assert point_mesh_sq_dists(pts, mesh).max() < 1e-18

    def test_area_weighting(self):
        # areas 1 and 3 (right triangles with legs sqrt(2) and sqrt(6))
        a = np.sqrt(2.0)
        b = np.sqrt(6.0)
        verts = [[0, 0, 0], [a, 0, 0], [0, a, 0], [10, 0, 0], [10 + b, 0, 0], [10, b, 0]]
        mesh = TriangleMesh(verts, [[0, 1, 2], [3, 4, 5]])
        np.testing.assert_allclose(mesh.face_areas(), [1.0, 3.0])
        pts = sample_mesh_uniform(mesh, 10000, seed=3)
        frac = np.mean(pts[:, 0] >= 10)
        # binomial std = sqrt(.75*.25/1e4) ~ 0.0043; 0.03 is ~7 sigma
        assert abs(frac - 0.75) <= 0.03

    def test_empty_request(self, unit_triangle):
        mesh = TriangleMesh(unit_triangle, [[0, 1, 2]])
        assert sample_mesh_uniform(mesh, 0).shape == (0, 3)

    def test_all_degenerate(self):
        mesh = TriangleMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])
        with pytest.raises(InvalidInput):
            sample_mesh_uniform(mesh, 10)

    def test_deterministic(self, unit_triangle):
        mesh = TriangleMesh(unit_triangle, [[0, 1, 2]])
        np.testing.assert_array_equal(sample_mesh_uniform(mesh, 50, 9), sample_mesh_uniform(mesh, 50, 9))

    def test_bad_face_index(self):
        with pytest.raises(InvalidInput):
            TriangleMesh([[0, 0, 0]], [[0, 1, 2]])


class TestPointTriangle:
    def test_above_interior(self, unit_triangle):
        assert point_to_triangle_distance([0, 0, 1], unit_triangle) == pytest.approx(1.0, abs=1e-15)

    def test_on_vertex(self, unit_triangle):
        for v in unit_triangle:
            assert point_to_triangle_distance(v, unit_triangle) == 0.0

    def test_edge_and_vertex_regions(self, unit_triangle):
        # beyond the bottom edge: closest point (0,-1,0)
        assert point_to_triangle_distance([0, -3, 0], unit_triangle) == pytest.approx(2.0)
        # beyond vertex a along the outward diagonal
        assert point_to_triangle_distance([-2, -2, 0], unit_triangle) == pytest.approx(np.sqrt(2))

    def test_degenerate_triangle_is_segment(self):
        tri = [[0, 0, 0], [1, 0, 0], [2, 0, 0]]
        assert point_to_triangle_distance([1, 1, 0], tri) == pytest.approx(1.0)
        assert point_to_triangle_distance([3, 0, 0], tri) == pytest.approx(1.0)
        point_tri = [[1, 1, 1]] * 3
        assert point_to_triangle_distance([1, 1, 3], point_tri) == pytest.approx(2.0)

    def test_random_pairs_against_dense_sampling(self, rng):
        grid = barycentric_grid()
        for _ in range(500):
            tri = rng.uniform(-1, 1, (3, 3))
            p = rng.uniform(-1.5, 1.5, 3)
            exact = point_to_triangle_distance(p, tri)
            sampled = dense_triangle_min_dist(p, tri, grid)
            assert exact <= sampled + 1e-12
            assert sampled - exact <= 1e-3

    def test_zero_iff_inside(self, rng, unit_triangle):
        for _ in range(200):
            u, v = rng.random(2)
            if u + v > 1:
                u, v = 1 - u, 1 - v
            a, b, c = unit_triangle
            p = a + u * (b - a) + v * (c - a)
            assert point_to_triangle_distance(p, unit_triangle) < 1e-9
            off = p + np.array([0, 0, 1e-3])
            assert point_to_triangle_distance(off, unit_triangle) > 1e-9
