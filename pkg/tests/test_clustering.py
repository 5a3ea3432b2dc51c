import itertools

import numpy as np
import pytest

import _oracles as O
from vanetkit.clustering import (ClusterConfig, assign, cluster,
                                 generalized_distance, select_centers)


def dmatrix(positions, impedances, eps):
    n = len(positions)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            d[i, j] = generalized_distance(i, j, impedances, positions, eps)
    return d


def random_instance(rng, n):
    positions = rng.uniform(0, 1000, (n, 2))
    impedances = rng.uniform(0.1, 50.0, n)
    return positions, impedances


class TestGeneralizedDistance:
    def test_pure_geometry(self):
        pos = np.array([[0.0, 0.0], [3.0, 4.0]])
        imp = np.array([7.0, 9.0])
        assert generalized_distance(0, 1, imp, pos, 0.0) == pytest.approx(5.0)

    def test_pure_impedance(self):
        pos = np.array([[0.0, 0.0], [3.0, 4.0]])
        imp = np.array([2.0, 4.0])
        assert generalized_distance(0, 1, imp, pos, 1.0) == pytest.approx(6.0)

    def test_blend(self):
        pos = np.array([[0.0, 0.0], [10.0, 0.0]])
        imp = np.array([2.0, 4.0])
        assert generalized_distance(0, 1, imp, pos, 0.5) == pytest.approx(8.0)


class TestSelectCenters:
    def test_k_one_returns_seed(self):
        pos = np.array([[0.0, 0.0], [5.0, 0.0], [9.0, 0.0]])
        imp = np.zeros(3)
        assert select_centers(pos, imp, ClusterConfig(k=1, seed_index=1)) == [1]

    def test_default_seed_is_min_impedance(self):
        pos = np.zeros((3, 2))
        imp = np.array([3.0, 1.0, 2.0])
        assert select_centers(pos, imp, ClusterConfig(k=1))[0] == 1

    def test_collinear_farthest(self):
        pos = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 0.0]])
        imp = np.zeros(3)
        got = select_centers(pos, imp, ClusterConfig(k=2, epsilon=0.0, seed_index=0))
        assert got == [0, 2]

    def test_k_exceeds_n(self):
        with pytest.raises(ValueError):
            select_centers(np.zeros((2, 2)), np.zeros(2), ClusterConfig(k=3))

    def test_matches_greedy_replay(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            n = int(rng.integers(3, 13))
            k = int(rng.integers(1, min(4, n) + 1))
            eps = float(rng.uniform(0.0, 1.0))
            seed = int(rng.integers(n))
            pos, imp = random_instance(rng, n)
            conf = ClusterConfig(k=k, epsilon=eps, seed_index=seed)
            got = select_centers(pos, imp, conf)
            want = O.farthest_first_replay(dmatrix(pos, imp, eps), seed, k)
            assert got == want


class TestAssign:
    def test_single_center(self):
        pos = np.random.default_rng(42).uniform(0, 100, (8, 2))
        labels = assign(pos, [3], np.zeros(8), 0.5)
        assert np.all(labels == 0)

    def test_tie_goes_to_earlier_center(self):
        pos = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 0.0]])
        labels = assign(pos, [0, 1], np.zeros(3), 0.0)
        assert labels[2] == 0

    def test_centers_label_themselves(self):
        rng = np.random.default_rng(43)
        pos, imp = random_instance(rng, 15)
        centers = select_centers(pos, imp, ClusterConfig(k=4, epsilon=0.7))
        labels = assign(pos, centers, imp, 0.7)
        for idx, c in enumerate(centers):
            assert labels[c] == idx

    def test_matches_nearest_scan(self):
        rng = np.random.default_rng(44)
        pos, imp = random_instance(rng, 20)
        eps = 0.3
        centers = select_centers(pos, imp, ClusterConfig(k=3, epsilon=eps))
        labels = assign(pos, centers, imp, eps)
        dmat = dmatrix(pos, imp, eps)
        for i in range(20):
            if i in centers:
                continue
            best = min(range(3), key=lambda idx: (dmat[i][centers[idx]], idx))
            assert labels[i] == best


class TestClusterProperties:
    def test_two_approximation_at_eps_zero(self):
        rng = np.random.default_rng(45)
        for _ in range(60):
            n = int(rng.integers(4, 11))
            k = int(rng.integers(1, 4))
            pos, _ = random_instance(rng, n)
            imp = np.zeros(n)
            res = cluster(pos, imp, ClusterConfig(k=k, epsilon=0.0))
            dmat = dmatrix(pos, imp, 0.0)
            opt = O.optimal_kcenter_radius(dmat, k)
            assert res.radius <= 2.0 * opt + 1e-9

    def test_radius_nonincreasing_in_k(self):
        rng = np.random.default_rng(46)
        pos, imp = random_instance(rng, 18)
        radii = [cluster(pos, imp, ClusterConfig(k=k, epsilon=0.4)).radius
                 for k in range(1, 8)]
        for a, b in itertools.pairwise(radii):
            assert b <= a + 1e-9

    def test_eps_zero_ignores_impedance(self):
        rng = np.random.default_rng(47)
        pos, imp = random_instance(rng, 12)
        conf = ClusterConfig(k=3, epsilon=0.0, seed_index=0)
        base = cluster(pos, imp, conf)
        perturbed = cluster(pos, imp * 10.0 + 3.0, conf)
        assert base.centers == perturbed.centers
        assert np.array_equal(base.labels, perturbed.labels)

    def test_eps_one_ignores_geometry(self):
        rng = np.random.default_rng(48)
        pos, imp = random_instance(rng, 12)
        conf = ClusterConfig(k=3, epsilon=1.0, seed_index=0)
        base = cluster(pos, imp, conf)
        moved = cluster(pos * 3.0 + 100.0, imp, conf)
        assert base.centers == moved.centers
        assert np.array_equal(base.labels, moved.labels)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ClusterConfig(k=0)
        with pytest.raises(ValueError):
            ClusterConfig(k=2, epsilon=1.5)
