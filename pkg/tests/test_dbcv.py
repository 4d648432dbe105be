import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardbind.clustering import dbcv_score


class TestConventions:
    def test_single_cluster_scores_zero(self):
        pts = np.random.default_rng(0).normal(size=(20, 2))
        assert dbcv_score(pts, np.ones(20, dtype=int)) == 0.0

    def test_all_noise_scores_zero(self):
        pts = np.random.default_rng(0).normal(size=(20, 2))
        assert dbcv_score(pts, np.zeros(20, dtype=int)) == 0.0

    def test_two_tiny_tight_clusters_approach_one(self):
        eps = 1e-6
        pts = np.array(
            [[0, 0], [eps, 0], [100, 0], [100 + eps, 0]], dtype=float
        )
        labels = np.array([1, 1, 2, 2])
        assert dbcv_score(pts, labels) > 0.999

    def test_random_uniform_arbitrary_split_scores_low(self):
        rng = np.random.default_rng(123)
        pts = rng.uniform(size=(80, 2))
        labels = np.array([1] * 40 + [2] * 40)
        assert dbcv_score(pts, labels) < 0.2

    def test_well_separated_blobs_score_high(self):
        rng = np.random.default_rng(5)
        pts = np.concatenate(
            [rng.normal(loc=c, scale=0.05, size=(30, 2)) for c in ([0, 0], [5, 5])]
        )
        labels = np.array([1] * 30 + [2] * 30)
        assert dbcv_score(pts, labels) > 0.8

    def test_noise_counts_in_denominator(self):
        rng = np.random.default_rng(6)
        pts = np.concatenate(
            [
                rng.normal(loc=[0, 0], scale=0.05, size=(20, 2)),
                rng.normal(loc=[5, 5], scale=0.05, size=(20, 2)),
                rng.uniform(-10, 10, size=(40, 2)),
            ]
        )
        dense = dbcv_score(pts[:40], np.array([1] * 20 + [2] * 20))
        with_noise = dbcv_score(pts, np.array([1] * 20 + [2] * 20 + [0] * 40))
        assert with_noise == pytest.approx(dense / 2, abs=1e-9)

    def test_identical_point_clusters_score_one(self):
        pts = np.concatenate([np.zeros((10, 3)), np.ones((10, 3)) * 7])
        labels = np.array([1] * 10 + [2] * 10)
        assert dbcv_score(pts, labels) == pytest.approx(1.0)

    def test_bounded_in_unit_interval(self):
        rng = np.random.default_rng(8)
        for seed in range(10):
            r = np.random.default_rng(seed)
            pts = r.normal(size=(30, 2))
            labels = r.integers(0, 3, size=30)
            s = dbcv_score(pts, labels)
            assert -1.0 <= s <= 1.0


class TestInvariances:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_translation_and_rotation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        pts = np.concatenate(
            [rng.normal(loc=c, scale=0.3, size=(15, 3)) for c in ([0, 0, 0], [4, 0, 0])]
        )
        labels = np.array([1] * 15 + [2] * 15)
        base = dbcv_score(pts, labels)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        moved = pts @ q + rng.normal(size=3) * 10
        assert dbcv_score(moved, labels) == pytest.approx(base, abs=1e-8)
