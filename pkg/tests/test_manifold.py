import numpy as np
import pytest

from posemime.errors import AntipodalPoint, SpecMismatch
from posemime.manifold import (
    Euclidean,
    ManifoldPoint,
    Product,
    Sphere,
    TangentVector,
    _kernels_py,
    distance,
    exp_map,
    frechet_mean,
    frechet_mean_coords,
    log_map,
    manifold_from_tree,
    parallel_transport,
    tangent_covariance,
)

JOINT = Product([Euclidean(1), Product([Sphere(1)] * 13)])
CASES = [Euclidean(3), Sphere(1), Sphere(2), JOINT]


def pt(m, coords):
    return ManifoldPoint(m, np.asarray(coords, dtype=float))


def random_pairs(m, n, seed, max_norm=np.pi - 0.1):
    rng = np.random.default_rng(seed)
    for _ in range(n):
        p = m.random_point(rng)
        v = m.random_tangent(rng)
        nv = np.linalg.norm(v)
        if nv > max_norm:
            v *= (max_norm * rng.uniform(0.05, 1.0)) / nv
        yield p, v


class TestExpLog:
    def test_euclidean_exp_is_addition(self):
        e2 = Euclidean(2)
        base = pt(e2, [1.0, 2.0])
        v = TangentVector(base, np.array([0.5, -1.0]))
        assert np.allclose(exp_map(base, v).coords, [1.5, 1.0])

    def test_sphere_quarter_circle(self):
        s2 = Sphere(2)
        north = pt(s2, [0.0, 0.0, 1.0])
        # at the north pole the intrinsic basis is the first two axes
        v = TangentVector(north, np.array([np.pi / 2, 0.0]))
        assert np.allclose(exp_map(north, v).coords, [1.0, 0.0, 0.0], atol=1e-12)
        back = log_map(north, pt(s2, [1.0, 0.0, 0.0]))
        assert np.allclose(back.components, [np.pi / 2, 0.0], atol=1e-12)
        assert np.allclose(back.embedded(), [np.pi / 2, 0.0, 0.0], atol=1e-12)

    @pytest.mark.parametrize("m", CASES, ids=repr)
    def test_exp_of_zero_is_identity(self, m):
        rng = np.random.default_rng(7)
        p = m.random_point(rng)
        assert np.allclose(m.exp(p, np.zeros(m.tangent_dim)), p, atol=1e-15)
        assert np.allclose(m.log(p, p), 0.0, atol=1e-15)

    @pytest.mark.parametrize("m", CASES, ids=repr)
    def test_roundtrip_1000_random_pairs(self, m):
        worst = 0.0
        for p, v in random_pairs(m, 1000, seed=11):
            back = m.log(p, m.exp(p, v))
            worst = max(worst, float(np.abs(back - v).max()))
        assert worst <= 1e-9

    def test_log_rejects_antipodal(self):
        s1 = Sphere(1)
        with pytest.raises(AntipodalPoint) as exc:
            s1.log(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))
        assert exc.value.factor_index == 0

    def test_spec_mismatch(self):
        a = pt(Euclidean(2), [0.0, 0.0])
        b = pt(Euclidean(3), [0.0, 0.0, 0.0])
        with pytest.raises(SpecMismatch):
            log_map(a, b)
        v = TangentVector(b, np.zeros(3))
        with pytest.raises(SpecMismatch):
            exp_map(b, TangentVector(a, np.zeros(2)))
        assert exp_map(b, v).spec == Euclidean(3)

    def test_tangent_orthogonal_to_sphere_base(self):
        m = Sphere(2)
        for p, v in random_pairs(m, 200, seed=3):
            emb = m.embedded_tangent(p, v)
            assert abs(float(emb @ p)) <= 1e-9
            assert np.allclose(m.intrinsic_tangent(p, emb), v, atol=1e-12)


class TestDistance:
    def test_quarter_circle(self):
        s2 = Sphere(2)
        d = distance(pt(s2, [0, 0, 1]), pt(s2, [1, 0, 0]))
        assert abs(d - np.pi / 2) <= 1e-12

    @pytest.mark.parametrize("m", CASES, ids=repr)
    def test_symmetry_and_identity(self, m):
        rng = np.random.default_rng(5)
        for _ in range(200):
            a, b = m.random_point(rng), m.random_point(rng)
            ab, ba = m.dist(a, b), m.dist(b, a)
            assert abs(ab - ba) <= 1e-12
            assert m.dist(a, a) <= 1e-12

    @pytest.mark.parametrize("m", CASES, ids=repr)
    def test_triangle_inequality(self, m):
        rng = np.random.default_rng(17)
        skipped = 0
        for _ in range(1000):
            a, b, c = (m.random_point(rng) for _ in range(3))
            try:
                assert m.dist(a, c) <= m.dist(a, b) + m.dist(b, c) + 1e-9
            except AntipodalPoint:
                # uniform sampling occasionally lands inside the antipodal
                # exclusion band of an S^1 factor; that is a documented error
                skipped += 1
        assert skipped <= 5

    def test_distance_equals_log_norm(self):
        for p, v in random_pairs(JOINT, 300, seed=23):
            q = JOINT.exp(p, v)
            assert abs(JOINT.dist(p, q) - np.linalg.norm(JOINT.log(p, q))) <= 1e-12


class TestParallelTransport:
    def test_euclidean_identity(self):
        e3 = Euclidean(3)
        rng = np.random.default_rng(0)
        src, dst = e3.random_point(rng), e3.random_point(rng)
        v = e3.random_tangent(rng)
        assert np.array_equal(e3.transport(src, dst, v), v)

    def test_sphere_great_circle_cases(self):
        s2 = Sphere(2)
        north = np.array([0.0, 0.0, 1.0])
        east = np.array([1.0, 0.0, 0.0])
        # intrinsic basis at north pole is the x/y axes; at (1,0,0) it is
        # derived from the Householder frame, so compare embedded vectors
        travel = s2.embedded_tangent(north, s2.intrinsic_tangent(north, np.array([1.0, 0, 0])))
        moved = s2.transport(north, east, s2.intrinsic_tangent(north, travel))
        assert np.allclose(s2.embedded_tangent(east, moved), [0.0, 0.0, -1.0], atol=1e-12)
        ortho = s2.transport(north, east, s2.intrinsic_tangent(north, np.array([0.0, 1.0, 0.0])))
        assert np.allclose(s2.embedded_tangent(east, ortho), [0.0, 1.0, 0.0], atol=1e-12)

    @pytest.mark.parametrize("m", CASES, ids=repr)
    def test_preserves_inner_products(self, m):
        rng = np.random.default_rng(29)
        for _ in range(1000):
            src, dst = m.random_point(rng), m.random_point(rng)
            u, v = m.random_tangent(rng), m.random_tangent(rng)
            pu, pv = m.transport_many(src, dst, np.stack([u, v]))
            assert abs(float(pu @ pv) - float(u @ v)) <= 1e-9

    @pytest.mark.parametrize("m", CASES, ids=repr)
    def test_transport_to_self_is_identity(self, m):
        rng = np.random.default_rng(31)
        p = m.random_point(rng)
        v = m.random_tangent(rng)
        assert np.allclose(m.transport(p, p, v), v, atol=1e-12)

    def test_typed_api(self):
        s2 = Sphere(2)
        a, b = pt(s2, [0, 0, 1]), pt(s2, [1, 0, 0])
        v = log_map(a, b)
        w = parallel_transport(v, b)
        assert w.base == b
        assert abs(w.norm() - v.norm()) <= 1e-12


class TestFrechetMean:
    def test_identical_points(self):
        s2 = Sphere(2)
        p = pt(s2, [0, 0, 1])
        mean = frechet_mean([p, p, p], [1.0, 2.0, 3.0])
        assert np.allclose(mean.coords, p.coords, atol=1e-12)

    def test_sphere_midpoint(self):
        s2 = Sphere(2)
        mean = frechet_mean([pt(s2, [1, 0, 0]), pt(s2, [0, 1, 0])], [1.0, 1.0])
        expected = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        assert np.allclose(mean.coords, expected, atol=1e-9)

    def test_euclidean_equals_weighted_mean(self):
        rng = np.random.default_rng(13)
        e4 = Euclidean(4)
        for _ in range(50):
            pts = rng.standard_normal((20, 4))
            w = rng.uniform(0.1, 2.0, size=20)
            mean = frechet_mean_coords(e4, pts, w)
            oracle = (pts * (w / w.sum())[:, None]).sum(axis=0)
            assert np.allclose(mean, oracle, atol=1e-9)

    @pytest.mark.parametrize("m", CASES, ids=repr)
    def test_gradient_condition(self, m):
        rng = np.random.default_rng(37)
        for _ in range(50):
            center = m.random_point(rng)
            pts = m.exp_many(center, rng.standard_normal((15, m.tangent_dim)) * 0.4)
            w = rng.uniform(0.0, 1.0, size=15)
            w[rng.integers(0, 15)] = 2.0
            mean = frechet_mean_coords(m, pts, w)
            grad = (w / w.sum()) @ m.log_many(mean, pts)
            assert np.linalg.norm(grad) <= 1e-8

    def test_permutation_and_rescale_invariance(self):
        rng = np.random.default_rng(41)
        m = Sphere(2)
        center = m.random_point(rng)
        pts = m.exp_many(center, rng.standard_normal((10, 2)) * 0.3)
        w = rng.uniform(0.2, 1.0, size=10)
        ref = frechet_mean_coords(m, pts, w)
        perm = rng.permutation(10)
        assert np.allclose(frechet_mean_coords(m, pts[perm], w[perm]), ref, atol=1e-9)
        assert np.allclose(frechet_mean_coords(m, pts, w * 7.5), ref, atol=1e-9)

    def test_rejects_bad_weights(self):
        e1 = Euclidean(1)
        with pytest.raises(ValueError):
            frechet_mean_coords(e1, np.zeros((2, 1)), [0.0, 0.0])
        with pytest.raises(ValueError):
            frechet_mean_coords(e1, np.zeros((2, 1)), [1.0, -0.5])


class TestTangentCovariance:
    def test_single_point_zero(self):
        s2 = Sphere(2)
        p = pt(s2, [0, 0, 1])
        cov = tangent_covariance([p], [1.0], p)
        assert np.allclose(cov, 0.0, atol=1e-15)

    def test_euclidean_matches_sample_covariance(self):
        rng = np.random.default_rng(43)
        e3 = Euclidean(3)
        pts = rng.standard_normal((60, 3))
        w = rng.uniform(0.5, 1.5, size=60)
        wn = w / w.sum()
        mean = (pts * wn[:, None]).sum(axis=0)
        d = pts - mean
        oracle = (d * wn[:, None]).T @ d
        points = [pt(e3, row) for row in pts]
        cov = tangent_covariance(points, w, pt(e3, mean))
        assert np.allclose(cov, oracle, atol=1e-9)

    def test_symmetry_and_psd(self):
        rng = np.random.default_rng(47)
        m = JOINT
        center = m.random_point(rng)
        pts = m.exp_many(center, rng.standard_normal((40, m.tangent_dim)) * 0.3)
        mean = frechet_mean_coords(m, pts, np.ones(40))
        from posemime.manifold import tangent_covariance_coords

        cov = tangent_covariance_coords(m, pts, np.ones(40), mean)
        assert np.abs(cov - cov.T).max() <= 1e-12
        assert np.linalg.eigvalsh(cov).min() >= -1e-12


class TestProductStructure:
    def test_product_equals_factorwise_concatenation(self):
        rng = np.random.default_rng(53)
        e, s = Euclidean(2), Sphere(2)
        m = Product([e, s])
        pe, ps = e.random_point(rng), s.random_point(rng)
        ve, vs = e.random_tangent(rng), s.random_tangent(rng) * 0.5
        p = np.concatenate([pe, ps])
        v = np.concatenate([ve, vs])
        assert np.array_equal(m.exp(p, v), np.concatenate([e.exp(pe, ve), s.exp(ps, vs)]))
        q = m.exp(p, v)
        qe, qs = q[:2], q[2:]
        assert np.array_equal(m.log(p, q), np.concatenate([e.log(pe, qe), s.log(ps, qs)]))

    def test_tree_roundtrip(self):
        tree = JOINT.to_tree()
        assert manifold_from_tree(tree) == JOINT

    def test_tangent_and_embed_dims(self):
        assert JOINT.tangent_dim == 1 + 13
        assert JOINT.embed_dim == 1 + 26
        assert Sphere(2).tangent_dim == 2
        assert Sphere(2).embed_dim == 3

    def test_contains(self):
        assert JOINT.contains(JOINT.random_point(np.random.default_rng(1)))
        bad = np.zeros(27)
        assert not JOINT.contains(bad)


class TestBackendParity:
    """The compiled kernels and the NumPy fallback must agree bit-tightly."""

    @pytest.mark.parametrize("m", CASES, ids=repr)
    def test_all_ops_agree(self, m):
        try:
            from posemime.manifold import _kernels
        except ImportError:
            pytest.skip("compiled kernels unavailable")
        table = m._table
        rng = np.random.default_rng(59)
        base = m.random_point(rng)
        dst = m.random_point(rng)
        pts = np.stack([m.random_point(rng) for _ in range(64)])
        tans = np.stack([m.random_tangent(rng, 0.6) for _ in range(64)])
        args = table.args

        a = np.empty((64, m.tangent_dim))
        b = np.empty_like(a)
        assert _kernels.log_many(*args, base, pts, a) == _kernels_py.log_many(*args, base, pts, b)
        np.testing.assert_allclose(a, b, atol=1e-14)

        ea = np.empty((64, m.embed_dim))
        eb = np.empty_like(ea)
        _kernels.exp_many(*args, base, tans, ea)
        _kernels_py.exp_many(*args, base, tans, eb)
        np.testing.assert_allclose(ea, eb, atol=1e-14)

        da = np.empty(64)
        db = np.empty(64)
        assert _kernels.dist2_many(*args, base, pts, da) == _kernels_py.dist2_many(*args, base, pts, db)
        np.testing.assert_allclose(da, db, atol=1e-13)

        ta = np.empty_like(tans)
        tb = np.empty_like(tans)
        assert _kernels.transport_many(*args, base, dst, tans, ta) == _kernels_py.transport_many(
            *args, base, dst, tans, tb
        )
        np.testing.assert_allclose(ta, tb, atol=1e-14)
