import numpy as np
import pytest

from pvnext import instrument
from pvnext.errors import ConfigError
from pvnext.geometry import ball_query, chamfer_distance, farthest_point_sample, gather_group, knn


def _start_index(seed: int, n: int) -> int:
    return int(np.random.default_rng(seed).integers(n))


def _seed_for_start(start: int, n: int) -> int:
    return next(s for s in range(10_000) if _start_index(s, n) == start)


class TestFarthestPointSample:
    def test_full_selection_is_a_permutation(self, rng):
        points = rng.random((20, 3))
        assert sorted(farthest_point_sample(points, 20, seed=3).tolist()) == list(range(20))

    def test_picks_the_outlier(self):
        points = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [10, 10, 10]], dtype=float)
        selected = farthest_point_sample(points, 2, seed=_seed_for_start(0, 4))
        assert selected.tolist() == [0, 3]

    def test_single_sample_is_the_seeded_start(self, rng):
        points = rng.random((50, 3))
        assert farthest_point_sample(points, 1, seed=11).tolist() == [_start_index(11, 50)]

    def test_too_many_samples(self, rng):
        with pytest.raises(ConfigError):
            farthest_point_sample(rng.random((4, 3)), 5, seed=0)

    def test_greedy_property_on_random_instances(self):
        for trial in range(100):
            rng = np.random.default_rng(trial)
            n = int(rng.integers(2, 257))
            m = int(rng.integers(1, min(n, 24) + 1))
            points = rng.random((n, 3))
            selected = farthest_point_sample(points, m, seed=trial)
            assert selected[0] == _start_index(trial, n)
            d = ((points[:, None] - points[None]) ** 2).sum(axis=-1)
            for j in range(1, m):
                min_d = d[:, selected[:j]].min(axis=1)
                min_d[selected[:j]] = -1.0
                assert min_d[selected[j]] == pytest.approx(min_d.max(), abs=1e-12)


class TestBallQuery:
    def test_exhaustive_filter_on_random_instances(self):
        for trial in range(100):
            rng = np.random.default_rng(1000 + trial)
            n = int(rng.integers(1, 257))
            c = int(rng.integers(1, 17))
            k = int(rng.integers(1, 9))
            radius = float(rng.uniform(0.05, 0.5))
            targets = rng.random((n, 3))
            centers = rng.random((c, 3))
            groups = ball_query(centers, targets, radius, k)
            for i in range(c):
                dist2 = ((targets - centers[i]) ** 2).sum(axis=1)
                inside = [j for j in range(n) if dist2[j] <= radius * radius]
                if not inside:
                    expected = [int(np.argmin(dist2))] * k
                    assert groups.fallback[i]
                else:
                    first = inside[:k]
                    expected = first + [first[0]] * (k - len(first))
                assert groups.indices[i].tolist() == expected
                assert groups.padded[i] == (len(inside) < k)

    def test_distance_order_keeps_nearest(self):
        targets = np.array([[0.3, 0, 0], [0.1, 0, 0], [0.2, 0, 0], [5, 5, 5]])
        groups = ball_query(np.zeros((1, 3)), targets, radius=0.5, k=2, order="distance")
        assert groups.indices[0].tolist() == [1, 2]

    def test_unpadded_groups_lie_inside_radius(self, rng):
        targets = rng.random((100, 3))
        centers = rng.random((10, 3))
        groups = ball_query(centers, targets, 0.3, 4)
        for i in np.flatnonzero(~groups.padded):
            assert np.all(np.linalg.norm(targets[groups.indices[i]] - centers[i], axis=1) <= 0.3)

    def test_batched_matches_per_slice(self, rng):
        targets = rng.random((3, 40, 3))
        centers = rng.random((3, 5, 3))
        batched = ball_query(centers, targets, 0.25, 6)
        for t in range(3):
            single = ball_query(centers[t], targets[t], 0.25, 6)
            np.testing.assert_array_equal(batched.indices[t], single.indices)

    def test_counts_one_query_per_center(self, rng):
        with instrument.counting() as counters:
            ball_query(rng.random((4, 7, 3)), rng.random((4, 30, 3)), 0.2, 3)
        assert counters.ball_queries == 28

    def test_group_view(self):
        groups = ball_query(np.zeros((1, 3)), np.array([[0.1, 0, 0], [3, 3, 3]]), 0.5, 3)
        group = groups.group(0)
        assert group.neighbor_indices == [0, 0, 0]
        assert group.padded and not group.fallback

    @pytest.mark.parametrize("order", ["index", "distance"])
    def test_translation_equivariant(self, rng, order):
        centers, targets = rng.random((12, 3)), rng.random((60, 3))
        shift = np.array([3.25, -1.5, 0.75])
        moved = ball_query(centers + shift, targets + shift, 0.25, 4, order=order)
        still = ball_query(centers, targets, 0.25, 4, order=order)
        np.testing.assert_array_equal(moved.indices, still.indices)
        np.testing.assert_array_equal(moved.padded, still.padded)
        assert chamfer_distance(centers + shift, targets + shift) == pytest.approx(
            chamfer_distance(centers, targets), abs=1e-9
        )

    @pytest.mark.parametrize("radius,k", [(0.0, 3), (0.1, 0)])
    def test_rejects_bad_arguments(self, radius, k):
        with pytest.raises(ConfigError):
            ball_query(np.zeros((1, 3)), np.ones((2, 3)), radius, k)


class TestKnn:
    def test_full_sort_on_random_instances(self):
        for trial in range(100):
            rng = np.random.default_rng(2000 + trial)
            n = int(rng.integers(1, 257))
            k = int(rng.integers(1, n + 1))
            targets = rng.random((n, 3))
            centers = rng.random((3, 3))
            result = knn(centers, targets, k)
            for i in range(3):
                dist2 = ((targets - centers[i]) ** 2).sum(axis=1)
                expected = sorted(range(n), key=lambda j: (dist2[j], j))[:k]
                assert result[i].tolist() == expected

    def test_k_larger_than_targets(self, rng):
        with pytest.raises(ConfigError):
            knn(rng.random((1, 3)), rng.random((3, 3)), 4)


class TestChamfer:
    def test_identical_sets(self, rng):
        points = rng.random((30, 3))
        assert chamfer_distance(points, points) == 0.0

    def test_double_loop_on_random_instances(self):
        for trial in range(100):
            rng = np.random.default_rng(3000 + trial)
            a = rng.random((int(rng.integers(1, 40)), 3))
            b = rng.random((int(rng.integers(1, 40)), 3))
            ab = np.mean([min(((p - q) ** 2).sum() for q in b) for p in a])
            ba = np.mean([min(((q - p) ** 2).sum() for p in a) for q in b])
            assert chamfer_distance(a, b) == pytest.approx(ab + ba, abs=1e-9)

    def test_symmetric(self, rng):
        a, b = rng.random((10, 3)), rng.random((17, 3))
        assert chamfer_distance(a, b) == pytest.approx(chamfer_distance(b, a), abs=1e-12)


def test_gather_group_is_center_relative(rng):
    targets = rng.random((10, 3))
    centers = targets[[2, 5]]
    rel = gather_group(targets, np.array([[2, 3], [5, 5]]), centers)
    np.testing.assert_array_equal(rel[0, 0], np.zeros(3))
    np.testing.assert_allclose(rel[0, 1], targets[3] - targets[2])
    assert rel.shape == (2, 2, 3)


def test_non_finite_points_rejected():
    with pytest.raises(ConfigError):
        knn(np.array([[np.nan, 0, 0]]), np.zeros((2, 3)), 1)
