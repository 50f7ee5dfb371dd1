import numpy as np
import pytest

from activemetric.errors import DimensionError
from activemetric.forest import Forest, ForestConfig, _grow_tree, fit_forest

from oracles import best_gini_stump


def _blobs(n_half, gap, seed, p=2):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(2 * n_half, p))
    pts[n_half:, 0] += gap
    labels = np.array([1] * n_half + [2] * n_half)
    return pts, labels


class TestForestConfig:
    def test_defaults(self):
        cfg = ForestConfig()
        assert cfg.n_trees == 50
        assert cfg.max_depth is None
        assert cfg.min_leaf == 1

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_trees": 0},
            {"max_depth": 0},
            {"min_leaf": 0},
            {"feature_subsample": 0.0},
            {"feature_subsample": 1.5},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            ForestConfig(**kwargs)


class TestSplitSearch:
    def test_root_split_matches_exhaustive_oracle(self):
        cfg = ForestConfig(n_trees=1, max_depth=1, feature_subsample=1.0)
        for trial in range(40):
            rng = np.random.default_rng(500 + trial)
            pts = rng.normal(size=(25, 3))
            codes = rng.integers(0, 3, size=25).astype(np.intp)
            if np.unique(codes).size < 2:
                continue
            tree = _grow_tree(pts, codes, 3, cfg, np.random.default_rng(1))
            expected = best_gini_stump(pts, codes)
            parent = float((np.bincount(codes) ** 2).sum()) / 25
            if tree.feature[0] < 0:
                assert expected is None or expected[0] <= parent + 1e-9
            else:
                assert expected is not None
                assert int(tree.feature[0]) == expected[1]
                assert tree.threshold[0] == pytest.approx(expected[2], abs=1e-12)

    def test_respects_min_leaf(self):
        pts = np.arange(10, dtype=float)[:, None]
        codes = np.array([0] * 1 + [1] * 9, dtype=np.intp)
        cfg = ForestConfig(n_trees=1, min_leaf=3, feature_subsample=1.0)
        tree = _grow_tree(pts, codes, 2, cfg, np.random.default_rng(0))
        # The isolated class-0 point cannot be carved off alone.
        splits = tree.threshold[tree.feature >= 0]
        assert all(2.0 < t < 7.0 for t in splits)


class TestFitForest:
    def test_single_class_is_certain_everywhere(self):
        pts = np.random.default_rng(0).normal(size=(12, 3))
        forest = fit_forest(pts, np.full(12, 7), ForestConfig(n_trees=9), seed=1)
        assert forest.classes == (7,)
        frac = forest.vote_fractions(pts)
        assert np.all(frac == 1.0)

    def test_separated_blobs_recovered(self):
        pts, labels = _blobs(20, 10.0, seed=3)
        forest = fit_forest(pts, labels, seed=0)
        frac = forest.vote_fractions(pts)
        own = frac[np.arange(40), labels - 1]
        assert np.all(own >= 0.85)
        assert own.mean() >= 0.95
        assert np.allclose(frac.sum(axis=1), 1.0)

    def test_stumps_still_separate_blobs(self):
        pts, labels = _blobs(15, 8.0, seed=4)
        forest = fit_forest(pts, labels, ForestConfig(max_depth=1), seed=2)
        votes = np.argmax(forest.vote_fractions(pts), axis=1) + 1
        assert (votes == labels).mean() >= 0.9

    def test_min_leaf_n_collapses_to_constant(self):
        pts, labels = _blobs(10, 6.0, seed=5)
        forest = fit_forest(pts, labels, ForestConfig(n_trees=7, min_leaf=20), seed=0)
        frac = forest.vote_fractions(pts)
        assert np.all(np.ptp(frac, axis=0) == 0.0)

    def test_leaf_tie_favors_smaller_class(self):
        pts = np.zeros((2, 1))
        forest = fit_forest(pts, [4, 9], ForestConfig(n_trees=200), seed=0)
        assert forest.classes == (4, 9)
        frac = forest.vote_fractions(np.zeros((1, 1)))
        # Tied bootstrap leaves vote class 4, so it wins well over half.
        assert frac[0, 0] > 0.6

    def test_deterministic_per_seed(self):
        pts, labels = _blobs(12, 3.0, seed=6)
        a = fit_forest(pts, labels, seed=11).vote_fractions(pts)
        b = fit_forest(pts, labels, seed=11).vote_fractions(pts)
        c = fit_forest(pts, labels, seed=12).vote_fractions(pts)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_classes_sorted_ascending(self):
        pts = np.random.default_rng(2).normal(size=(9, 2))
        forest = fit_forest(pts, [3, 1, 2, 3, 1, 2, 3, 1, 2], seed=0)
        assert forest.classes == (1, 2, 3)

    @pytest.mark.parametrize(
        "points,labels",
        [
            (np.zeros((4, 2)), [1, 2, 1]),
            (np.zeros(4), [1, 2, 1, 2]),
            (np.zeros((0, 2)), []),
        ],
    )
    def test_shape_errors(self, points, labels):
        with pytest.raises(DimensionError):
            fit_forest(points, labels)

    def test_vote_fractions_rejects_flat_input(self):
        pts, labels = _blobs(5, 5.0, seed=7)
        forest = fit_forest(pts, labels, ForestConfig(n_trees=3), seed=0)
        with pytest.raises(DimensionError):
            forest.vote_fractions(np.zeros(2))
