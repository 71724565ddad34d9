import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import adjusted_rand_score

from softdtw.barycenter import BarycenterProblem, OptimizerConfig, barycenter_objective, soft_barycenter
from softdtw.clustering import (
    CentroidModel,
    adjusted_rand_index,
    assign_step,
    center_step,
    distance_matrix,
    gamma_grid,
    kmeans_objective,
    lloyd_kmeans,
    nearest_centroid_accuracy,
    nearest_centroid_fit,
    nearest_centroid_predict,
    select_gamma,
)
from softdtw.core import sdtw
from softdtw.synthetic import bump, planted_clusters


@pytest.fixture
def small_set(rng):
    return [rng.standard_normal((1, int(m))) for m in rng.integers(5, 9, size=8)]


class TestObjective:
    def test_centroids_are_the_data(self, rng):
        series = [rng.standard_normal((1, 6)) for _ in range(4)]
        assert kmeans_objective(series, series, 0.0) == 0.0

    def test_single_centroid_reduces_to_barycenter(self, small_set, rng):
        x = rng.standard_normal((1, 7))
        prob = BarycenterProblem(small_set, target_length=7)
        assert kmeans_objective([x], small_set, 0.5) == pytest.approx(len(small_set) * barycenter_objective(x, prob, 0.5), rel=1e-12)

    def test_matches_distance_matrix(self, small_set, rng):
        cents = [rng.standard_normal((1, 6)) for _ in range(3)]
        d = np.array([[sdtw(c, y, 0.3) for c in cents] for y in small_set])
        lengths = np.array([y.shape[1] for y in small_set])
        assert kmeans_objective(cents, small_set, 0.3) == pytest.approx(np.sum(d.min(axis=1) / lengths), rel=1e-14)

    def test_empty_dataset(self):
        with pytest.raises(ValueError):
            kmeans_objective([np.zeros((1, 3))], [], 1.0)


class TestAssign:
    def test_series_goes_to_its_copy(self, small_set):
        cents = [small_set[3], small_set[5]]
        a = assign_step(cents, small_set, 0.0)
        assert a[3] == 0 and a[5] == 1

    def test_single_centroid(self, small_set):
        np.testing.assert_array_equal(assign_step([small_set[0]], small_set, 1.0), 0)

    def test_argmin_of_distance_matrix(self, small_set, rng):
        cents = [rng.standard_normal((1, 6)) for _ in range(3)]
        np.testing.assert_array_equal(assign_step(cents, small_set, 0.2), distance_matrix(cents, small_set, 0.2).argmin(axis=1))

    def test_ties_go_to_lowest_index(self, small_set):
        c = small_set[0]
        np.testing.assert_array_equal(assign_step([c, c.copy()], small_set, 1.0), 0)

    def test_idempotent(self, small_set, rng):
        cents = [rng.standard_normal((1, 6)) for _ in range(3)]
        first = assign_step(cents, small_set, 0.5)
        np.testing.assert_array_equal(first, assign_step(cents, small_set, 0.5))

    @settings(max_examples=25, deadline=None)
    @given(scale=st.floats(0.1, 10.0), seed=st.integers(0, 2**16))
    def test_scaling_invariance_at_gamma_zero(self, scale, seed):
        rng = np.random.default_rng(seed)
        series = [rng.standard_normal((1, 6)) for _ in range(6)]
        cents = [rng.standard_normal((1, 5)) for _ in range(3)]
        d = distance_matrix(cents, series, 0.0)
        if np.any(np.abs(np.diff(np.sort(d, axis=1)[:, :2])) < 1e-9 * (1 + d.max())):
            return  # near-tie: argmin is not stable under rounding
        np.testing.assert_array_equal(
            assign_step(cents, series, 0.0),
            assign_step([scale * c for c in cents], [scale * y for y in series], 0.0),
        )


class TestCenterStep:
    def test_singleton_cluster_with_its_centroid(self, rng):
        y = rng.standard_normal((1, 6))
        out = center_step([y], [0], [y], 0.0, method="dba")
        np.testing.assert_array_equal(out[0], y)

    def test_identical_members(self, rng):
        y = np.cumsum(rng.standard_normal((1, 8)), axis=1)
        out = center_step([y, y.copy(), y.copy()], [0, 0, 0], [y.copy()], 0.0, method="dba")
        np.testing.assert_array_equal(out[0], y)

    def test_never_increases_cluster_cost(self, small_set, rng):
        assignments = np.arange(len(small_set)) % 2
        cents = [rng.standard_normal((1, 6)) for _ in range(2)]
        new = center_step(small_set, assignments, cents, 0.5)
        for j in range(2):
            members = [y for y, a in zip(small_set, assignments) if a == j]
            before = sum(sdtw(cents[j], y, 0.5) / y.shape[1] for y in members)
            after = sum(sdtw(new[j], y, 0.5) / y.shape[1] for y in members)
            assert after <= before

    def test_empty_cluster_kept(self, small_set, rng):
        cents = [rng.standard_normal((1, 6)) for _ in range(2)]
        out = center_step(small_set, np.zeros(len(small_set), dtype=int), cents, 1.0)
        assert out[1] is cents[1]


class TestLloyd:
    def test_k_equals_n(self, rng):
        series = [rng.standard_normal((1, 6)) for _ in range(4)]
        res = lloyd_kmeans(series, 4, method="dba", gamma=0.0, seed=1)
        assert res.objective_trace[0] == 0.0 and res.n_iter == 1
        assert sorted(res.assignments.tolist()) == [0, 1, 2, 3]

    def test_single_cluster_matches_barycenter(self, small_set):
        cfg = OptimizerConfig()
        res = lloyd_kmeans(small_set, 1, gamma=1.0, config=cfg, seed=0)
        prob = BarycenterProblem(small_set, target_length=res.centroids[0].shape[1])
        one_run = soft_barycenter(prob, 1.0, res.centroids[0], cfg)
        # the centroid is already a stationary point of one barycenter run
        assert barycenter_objective(one_run.barycenter, prob, 1.0) == pytest.approx(
            barycenter_objective(res.centroids[0], prob, 1.0), abs=1e-6
        )
        np.testing.assert_array_equal(res.assignments, 0)

    def test_two_separated_bumps(self, rng):
        early = [bump(24, 6 + rng.uniform(-1, 1), 1.5)[np.newaxis] + 0.02 * rng.standard_normal((1, 24)) for _ in range(6)]
        late = [-bump(24, 17 + rng.uniform(-1, 1), 1.5)[np.newaxis] + 0.02 * rng.standard_normal((1, 24)) for _ in range(6)]
        res = lloyd_kmeans(early + late, 2, gamma=1.0, init="euclidean", seed=3)
        assert adjusted_rand_index([0] * 6 + [1] * 6, res.assignments) == 1.0

    def test_planted_and_monotone(self):
        rng = np.random.default_rng(4)
        series, labels = planted_clusters(rng, n_clusters=3, per_cluster=10)
        res = lloyd_kmeans(series, 3, gamma=1.0, seed=4)
        trace = res.objective_trace
        assert all(b <= a for a, b in zip(trace, trace[1:]))
        assert adjusted_rand_index(labels, res.assignments) >= 0.9

    def test_deterministic(self, small_set):
        a = lloyd_kmeans(small_set, 3, gamma=0.5, seed=9)
        b = lloyd_kmeans(small_set, 3, gamma=0.5, seed=9)
        np.testing.assert_array_equal(a.assignments, b.assignments)
        assert a.objective_trace == b.objective_trace

    @pytest.mark.parametrize("method", ["dba", "subgradient"])
    def test_baseline_methods_monotone(self, small_set, method):
        res = lloyd_kmeans(small_set, 2, gamma=0.0, method=method, seed=2)
        assert all(b <= a for a, b in zip(res.objective_trace, res.objective_trace[1:]))

    def test_every_assignment_is_live(self):
        # duplicates force the random init to start two centroids on the same point
        y = np.array([[0.0, 1.0, 0.0]])
        series = [y, y.copy(), y.copy(), y + 5.0]
        res = lloyd_kmeans(series, 3, gamma=0.0, method="dba", seed=0)
        assert set(res.assignments.tolist()) <= set(range(3))

    @pytest.mark.parametrize("k", [0, 9])
    def test_bad_k(self, small_set, k):
        with pytest.raises(ValueError):
            lloyd_kmeans(small_set, k)

    def test_soft_needs_positive_gamma(self, small_set):
        with pytest.raises(ValueError):
            lloyd_kmeans(small_set, 2, gamma=0.0)


class TestNearestCentroid:
    def test_one_series_per_class(self, rng):
        a, b = rng.standard_normal((1, 8)), rng.standard_normal((1, 8))
        model = nearest_centroid_fit([a, b], [0, 1], 1e-3)
        np.testing.assert_allclose(model.centroids[0], a, atol=0.05)
        np.testing.assert_allclose(model.centroids[1], b, atol=0.05)

    def test_identical_copies(self, rng):
        a, b = rng.standard_normal((1, 8)), rng.standard_normal((1, 8))
        model = nearest_centroid_fit([a, a.copy(), b, b.copy()], [3, 3, 7, 7], 0.0)
        np.testing.assert_array_equal(model.centroids[0], a)
        np.testing.assert_array_equal(model.centroids[1], b)
        np.testing.assert_array_equal(model.classes, [3, 7])

    def test_separated_classes_fit_perfectly(self):
        rng = np.random.default_rng(0)
        series, labels = planted_clusters(rng, n_clusters=3, per_cluster=8)
        model = nearest_centroid_fit(series, labels, 0.1)
        assert nearest_centroid_accuracy(model, series, labels) == 1.0

    def test_predict_centroid_itself(self, rng):
        cents = [rng.standard_normal((1, 5)) for _ in range(3)]
        model = CentroidModel(cents, np.array([4, 5, 6]), 0.0)
        assert nearest_centroid_predict(model, cents[1]) == 5

    def test_single_class(self, rng):
        model = CentroidModel([rng.standard_normal((1, 5))], np.array([2]), 1.0)
        assert all(nearest_centroid_predict(model, rng.standard_normal((1, 7))) == 2 for _ in range(5))

    def test_matches_brute_force(self, rng):
        cents = [rng.standard_normal((1, 5)), rng.standard_normal((1, 7))]
        model = CentroidModel(cents, np.array([0, 1]), 0.4)
        for _ in range(10):
            x = rng.standard_normal((1, 6))
            scores = [sdtw(cents[0], x, 0.4) / 5, sdtw(cents[1], x, 0.4) / 7]
            assert nearest_centroid_predict(model, x) == int(np.argmin(scores))

    def test_label_count_checked(self, small_set):
        with pytest.raises(ValueError):
            nearest_centroid_fit(small_set, [0, 1], 1.0)


class TestSelectGamma:
    def test_grid(self):
        g = gamma_grid()
        assert len(g) == 15
        assert g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(10.0)

    def test_single_candidate(self, small_set):
        labels = np.arange(len(small_set)) % 2
        gamma, acc = select_gamma((small_set, labels), (small_set, labels), [0.7])
        assert gamma == 0.7 and acc.shape == (1,)

    def test_all_tie_returns_smallest(self):
        rng = np.random.default_rng(0)
        series, labels = planted_clusters(rng, n_clusters=2, per_cluster=5)
        gamma, acc = select_gamma((series, labels), (series, labels), [1.0, 0.01, 0.1])
        assert np.all(acc == 1.0) and gamma == 0.01

    def test_perfect_candidate_wins(self):
        rng = np.random.default_rng(1)
        series, labels = planted_clusters(rng, n_clusters=3, per_cluster=6)
        gamma, acc = select_gamma((series[::2], labels[::2]), (series[1::2], labels[1::2]), [0.1])
        assert acc[0] == 1.0 and gamma == 0.1

    def test_empty_validation(self, small_set):
        with pytest.raises(ValueError):
            select_gamma((small_set, np.zeros(len(small_set))), ([], []), [1.0])


class TestAdjustedRand:
    def test_identical_partitions(self):
        assert adjusted_rand_index([0, 0, 1, 1, 2], [5, 5, 3, 3, 9]) == 1.0

    def test_matches_sklearn(self, rng):
        for _ in range(20):
            a, b = rng.integers(0, 4, size=30), rng.integers(0, 3, size=30)
            assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)
