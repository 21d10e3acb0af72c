import numpy as np
import pytest

from trustcal.calibration import TrustCalibrator, adjusted_quantile
from trustcal.forest import ForestParams, fit_forest
from trustcal.models import PoissonCountingModel
from trustcal.nuisance import build_nuisance_grid, expand_points, nuisance_cutoff
from trustcal.tree import RegressionTree, TreeParams, fit_tree

BOX = np.array([[0.0, 5.0], [0.0, 1.5]])


def nu_split_tree(thresholds):
    """Right-leaning chain of splits on coordinate 1 at ``thresholds``."""
    k = len(thresholds)
    n_nodes = 2 * k + 1
    feature = np.full(n_nodes, -1)
    threshold = np.zeros(n_nodes)
    left = np.full(n_nodes, -1)
    right = np.full(n_nodes, -1)
    depth = np.zeros(n_nodes, dtype=int)
    leaf_id = np.full(n_nodes, -1)
    node, leaf = 0, 0
    for i, t in enumerate(sorted(thresholds)):
        feature[node], threshold[node] = 1, t
        left[node], right[node] = node + 1, node + 2
        depth[node + 1] = depth[node + 2] = i + 1
        leaf_id[node + 1] = leaf
        leaf += 1
        node += 2
    leaf_id[node] = leaf
    z = np.zeros(n_nodes)
    return RegressionTree(feature, threshold, left, right, leaf_id, depth, z + 1, z, z, BOX.copy())


class TestGrid:
    def test_no_splits_gives_midpoint(self):
        grid = build_nuisance_grid(nu_split_tree([]), [1], BOX)
        assert grid.values == ((0.75,),) and len(grid) == 1

    def test_single_threshold_fallback(self):
        grid = build_nuisance_grid(nu_split_tree([0.5]), [1], BOX)
        assert grid.eps[0] == pytest.approx(0.5 / 3)
        np.testing.assert_allclose(grid.values[0], [0.5 - 0.5 / 3, 0.5 + 0.5 / 3])

    def test_two_thresholds(self):
        grid = build_nuisance_grid(nu_split_tree([0.3, 0.9]), [1], BOX)
        assert grid.eps[0] == pytest.approx(0.2)
        np.testing.assert_allclose(grid.values[0], [0.1, 0.5, 0.7, 1.1])

    def test_values_clamped_to_box(self):
        grid = build_nuisance_grid(nu_split_tree([0.01, 1.0]), [1], BOX)
        assert min(grid.values[0]) >= 0.0 and max(grid.values[0]) <= 1.5

    def test_depth_limit_keeps_shallow_splits(self):
        tree = nu_split_tree([0.3, 0.6, 0.9])
        grid = build_nuisance_grid(tree, [1], BOX, depth_limit=1)
        assert grid.thresholds[0] == (0.3,)

    def test_max_per_dim_prefers_root(self):
        tree = nu_split_tree([0.2, 0.4, 0.6, 0.8, 1.0])
        grid = build_nuisance_grid(tree, [1], BOX, max_per_dim=2)
        assert grid.thresholds[0] == (0.2, 0.4)

    def test_forest_thresholds_union(self):
        gen = np.random.default_rng(0)
        theta = gen.uniform(BOX[:, 0], BOX[:, 1], size=(600, 2))
        tau = theta[:, 0] - 3 * theta[:, 1] + gen.normal(0, 0.1, 600)
        forest = fit_forest(theta, tau, ForestParams(n_trees=5, min_samples_split=100), seed=0)
        grid = build_nuisance_grid(forest, [1], BOX)
        union = sorted({t for tr in forest.trees for d, t in tr.splits([1])})
        assert list(grid.thresholds[0]) == union

    def test_requires_nuisance_dims(self):
        with pytest.raises(ValueError):
            build_nuisance_grid(nu_split_tree([]), [], BOX)

    def test_expand_points_layout(self):
        full = expand_points([[1.0], [2.0]], [[0.1], [0.2], [0.3]], (0,), (1,), 2)
        assert full.shape == (6, 2)
        np.testing.assert_array_equal(full[:3, 0], 1.0)
        np.testing.assert_array_equal(full[:3, 1], [0.1, 0.2, 0.3])


def poisson_records(B=3000, seed=1):
    model = PoissonCountingModel()
    gen = np.random.default_rng(seed)
    theta = model.sample_reference(B, gen)
    tau = -np.abs(theta[:, 0] - 2.5) * (1 + theta[:, 1]) + gen.normal(0, 0.5, B)
    return model, theta, tau


class TestCutoff:
    def test_unsplit_nuisance_equals_leaf_quantile(self):
        model, theta, tau = poisson_records()
        tree = fit_tree(theta[:, :1], tau, TreeParams(100, 0.0, max_depth=2), bounds=BOX[:1])
        tree2 = RegressionTree.from_arrays(dict(tree.to_arrays(), bounds=BOX))
        cal = TrustCalibrator(tree2, theta, tau)
        grid = build_nuisance_grid(tree2, [1], BOX)
        mu = np.array([[0.5], [2.5], [4.5]])
        out = nuisance_cutoff(cal, mu, grid, 0.05, (0,), 2)
        for g, m in enumerate(mu):
            leaf = tree2.apply(np.array([[m[0], 0.3]]))[0]
            assert out.cutoff[g] == adjusted_quantile(tau[tree2.apply(theta) == leaf], 0.05)

    def test_two_leaves_on_nuisance_take_min(self):
        tree = nu_split_tree([0.7])
        gen = np.random.default_rng(2)
        theta = gen.uniform(BOX[:, 0], BOX[:, 1], size=(500, 2))
        tau = np.where(theta[:, 1] > 0.7, 5.0, 0.0) + gen.normal(size=500)
        cal = TrustCalibrator(tree, theta, tau)
        out = nuisance_cutoff(cal, [[1.0]], build_nuisance_grid(tree, [1], BOX), 0.05, (0,), 2)
        q_lo = adjusted_quantile(tau[theta[:, 1] <= 0.7], 0.05)
        q_hi = adjusted_quantile(tau[theta[:, 1] > 0.7], 0.05)
        assert out.cutoff[0] == min(q_lo, q_hi)
        assert out.nuisance_argmin[0, 0] < 0.7

    def test_tree_grid_equals_dense_grid(self):
        model, theta, tau = poisson_records(seed=3)
        tree = fit_tree(theta, tau, TreeParams(100, 0.0005), bounds=BOX)
        cal = TrustCalibrator(tree, theta, tau)
        grid = build_nuisance_grid(tree, [1], BOX)
        mu = np.random.default_rng(3).uniform(0, 5, size=(100, 1))
        a = nuisance_cutoff(cal, mu, grid, 0.05, (0,), 2)
        dense = np.linspace(0, 1.5, 200)[:, None]
        b = nuisance_cutoff(cal, mu, grid, 0.05, (0,), 2, nu_points=dense)
        np.testing.assert_array_equal(a.cutoff, b.cutoff)

    def test_min_is_below_any_fixed_nuisance(self):
        model, theta, tau = poisson_records(seed=4)
        tree = fit_tree(theta, tau, TreeParams(100, 0.0005), bounds=BOX)
        cal = TrustCalibrator(tree, theta, tau)
        mu = np.linspace(0, 5, 30)[:, None]
        out = nuisance_cutoff(cal, mu, build_nuisance_grid(tree, [1], BOX), 0.05, (0,), 2)
        for nu in (0.1, 0.75, 1.4):
            fixed = cal.cutoffs(np.column_stack([mu[:, 0], np.full(30, nu)]), 0.05).cutoff
            assert np.all(out.cutoff <= fixed)

    def test_forest_grid_close_to_dense_grid(self):
        model, theta, tau = poisson_records(seed=5)
        forest = fit_forest(theta, tau, ForestParams(n_trees=20, min_samples_split=100), seed=5, bounds=BOX)
        cal = forest.calibrator(10, "relax")
        grid = build_nuisance_grid(forest, [1], BOX)
        mu = np.linspace(0.2, 4.8, 25)[:, None]
        a = nuisance_cutoff(cal, mu, grid, 0.05, (0,), 2).cutoff
        b = nuisance_cutoff(cal, mu, grid, 0.05, (0,), 2, nu_points=np.linspace(0, 1.5, 200)[:, None]).cutoff
        # not exact for proximity balls; the split-derived grid stays close
        finite = np.isfinite(a) & np.isfinite(b)
        assert np.median(np.abs(a[finite] - b[finite])) < 0.5
