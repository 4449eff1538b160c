import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from testdrive.errors import ConfigError, DataError
from testdrive.features import FeatureMatrix
from testdrive.homogenize import (MetricConfig, ProxySets, Transform,
                                  apply_transform, build_proxy_sets,
                                  learn_transform)


def two_clusters(rng, n=40, gap=10.0, d=2, spread=0.5):
    """Linearly separable object/background clouds along axis 0."""
    a = rng.normal(size=(n, d)) * spread
    b = rng.normal(size=(n, d)) * spread
    b[:, 0] += gap
    X = np.vstack([a, b])
    return X, ProxySets(tuple(range(n)), tuple(range(n, 2 * n)))


class TestProxySets:
    def test_validation(self):
        with pytest.raises(DataError):
            ProxySets((), (1,))
        with pytest.raises(DataError):
            ProxySets((1, 2), (2, 3))

    def test_build_from_scores(self):
        det = FeatureMatrix(np.arange(6, dtype=float).reshape(3, 2))
        comp = FeatureMatrix(np.ones((4, 2)))
        X, proxy = build_proxy_sets(det, np.array([0.9, 0.9, 0.2]), 0.8, comp)
        assert proxy.o_t == (0, 1)
        assert len(proxy.o_f) == 4
        assert X.shape == (6, 2)

    def test_complement_cap(self):
        det = FeatureMatrix(np.ones((2, 2)))
        comp = FeatureMatrix(np.random.default_rng(0).uniform(size=(50, 2)))
        X, proxy = build_proxy_sets(det, np.array([0.9, 0.9]), 0.5, comp, cap=10)
        assert len(proxy.o_f) == 10

    def test_gamma_h_below_all_scores_allowed(self, caplog):
        det = FeatureMatrix(np.ones((3, 2)))
        comp = FeatureMatrix(np.zeros((2, 2)))
        with caplog.at_level("WARNING"):
            _, proxy = build_proxy_sets(det, np.array([0.5, 0.6, 0.7]), 0.1, comp)
        assert len(proxy.o_t) == 3
        assert any("entire detection set" in r.message for r in caplog.records)

    def test_empty_o_t_rejected(self):
        det = FeatureMatrix(np.ones((2, 2)))
        comp = FeatureMatrix(np.ones((2, 2)))
        with pytest.raises(DataError, match="gamma_H"):
            build_proxy_sets(det, np.array([0.1, 0.2]), 0.9, comp)


class TestLearnTransform:
    def test_lambda_zero_gives_identity(self):
        rng = np.random.default_rng(0)
        X, proxy = two_clusters(rng)
        t = learn_transform(X, proxy, MetricConfig(lam=0.0))
        assert np.array_equal(t.M, np.eye(X.shape[1]))

    def test_separable_constraints_satisfied(self):
        rng = np.random.default_rng(1)
        X, proxy = two_clusters(rng, n=30, gap=12.0)
        # Intra distances ~<3, inter ~12: thresholds sit between.
        cfg = MetricConfig(u=4.0, ell=8.0, max_iter=100, seed=0)
        t = learn_transform(X, proxy, cfg)
        Z = t.apply(X)
        o_t, o_f = np.array(proxy.o_t), np.array(proxy.o_f)
        sim = [np.linalg.norm(Z[i] - Z[j]) for k, i in enumerate(o_t)
               for j in o_t[k + 1:]]
        dis = [np.linalg.norm(Z[i] - Z[j]) for i in o_t for j in o_f]
        sat = (sum(d <= cfg.u + 1e-9 for d in sim) + sum(d >= cfg.ell - 1e-9 for d in dis))
        assert sat / (len(sim) + len(dis)) >= 0.95

    def test_upweights_separating_axis(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(40, 2)) * np.array([0.5, 2.0])
        b = rng.normal(size=(40, 2)) * np.array([0.5, 2.0])
        b[:, 0] += 6.0  # separated on axis 0, overlapping on axis 1
        X = np.vstack([a, b])
        proxy = ProxySets(tuple(range(40)), tuple(range(40, 80)))
        t = learn_transform(X, proxy, MetricConfig(u=2.0, ell=12.0, max_iter=150, seed=0))
        assert t.M[0, 0] > t.M[1, 1]

    def test_psd_and_monotone_objective(self):
        rng = np.random.default_rng(3)
        X, proxy = two_clusters(rng, n=25, gap=4.0)
        t = learn_transform(X, proxy, MetricConfig(max_iter=60, seed=1))
        assert np.linalg.eigvalsh(t.M).min() >= -1e-10
        diffs = np.diff(t.objective_history)
        assert np.all(diffs <= 1e-12)

    def test_pca_stage_engages(self):
        rng = np.random.default_rng(4)
        X, proxy = two_clusters(rng, n=20, d=40)
        t = learn_transform(X, proxy, MetricConfig(pca_dim=5, max_iter=20))
        assert t.pca_basis is not None
        assert t.M.shape == (5, 5)
        assert t.apply(X).shape == (40, 5)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            MetricConfig(lam=-1.0)
        with pytest.raises(ConfigError):
            MetricConfig(u=5.0, ell=2.0)


class TestTransformApply:
    def test_identity_passthrough(self):
        X = np.random.default_rng(5).uniform(size=(4, 3))
        t = Transform(np.eye(3))
        assert np.allclose(t.apply(X), X)

    def test_diagonal_hand_value(self):
        # M = diag(4, 1): distance between e1 and e2 is sqrt(4 + 1).
        t = Transform(np.diag([4.0, 1.0]))
        Z = t.apply(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert np.linalg.norm(Z[0] - Z[1]) == pytest.approx(np.sqrt(5.0))

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_distance_equals_mahalanobis(self, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(3, 3))
        M = A.T @ A
        x, y = rng.normal(size=3), rng.normal(size=3)
        t = Transform(M)
        d_t = np.linalg.norm(t.apply(x) - t.apply(y))
        d_m = np.sqrt((x - y) @ M @ (x - y))
        assert d_t == pytest.approx(d_m, rel=1e-8, abs=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(DataError, match="dimension"):
            Transform(np.eye(3)).apply(np.ones((2, 5)))

    def test_asymmetric_rejected(self):
        with pytest.raises(DataError):
            Transform(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_apply_transform_wrapper(self):
        fm = FeatureMatrix(np.eye(2), provenance=[("a", 1), ("b", 2)])
        out = apply_transform(Transform(np.diag([9.0, 1.0])), fm)
        assert np.allclose(out.X, np.diag([3.0, 1.0]))
        assert out.provenance == [("a", 1), ("b", 2)]


class TestPersistence:
    def test_roundtrip_plain(self, tmp_path):
        M = np.array([[2.0, 0.5], [0.5, 1.0]])
        t = Transform(M, converged=False)
        p = tmp_path / "t.bin"
        t.save(p)
        t2 = Transform.load(p)
        assert np.array_equal(t2.M, t.M)
        assert t2.converged is False
        assert t2.pca_basis is None

    def test_roundtrip_with_pca(self, tmp_path):
        rng = np.random.default_rng(6)
        X, proxy = two_clusters(rng, n=15, d=20)
        t = learn_transform(X, proxy, MetricConfig(pca_dim=4, max_iter=10))
        p = tmp_path / "t.bin"
        t.save(p)
        t2 = Transform.load(p)
        assert np.array_equal(t2.M, t.M)
        assert np.array_equal(t2.pca_basis, t.pca_basis)
        assert np.allclose(t2.apply(X), t.apply(X))

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "t.bin"
        p.write_bytes(b"garbage file contents")
        with pytest.raises(DataError, match="not a transform"):
            Transform.load(p)
