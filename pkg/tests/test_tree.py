import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.tree import DecisionTreeRegressor

from trustcal.tree import EmptyTrainingSet, RegressionTree, TreeParams, fit_tree, leaf_of, split_values


def step_data(n=2000, seed=0):
    gen = np.random.default_rng(seed)
    theta = gen.uniform(0, 1, size=(n, 1))
    return theta, (theta[:, 0] > 0.5).astype(float)


def exhaustive_best_threshold(x, y):
    """Best variance-reducing midpoint by brute force."""
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    best, arg = np.inf, None
    for i in range(1, len(xs)):
        if xs[i] == xs[i - 1]:
            continue
        left, right = ys[:i], ys[i:]
        sse = ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum()
        if sse < best - 1e-12:
            best, arg = sse, 0.5 * (xs[i] + xs[i - 1])
    return arg


class TestFit:
    def test_constant_response_single_leaf(self):
        theta = np.random.default_rng(1).uniform(size=(500, 2))
        tree = fit_tree(theta, np.full(500, 3.0), TreeParams(10, 0.0))
        assert tree.n_leaves == 1
        assert tree.leaf_values()[0] == 3.0

    def test_step_root_threshold(self):
        theta, tau = step_data()
        tree = fit_tree(theta, tau, TreeParams(10, 0.0))
        assert abs(tree.threshold[0] - 0.5) < 0.01
        assert tree.threshold[0] == pytest.approx(exhaustive_best_threshold(theta[:, 0], tau))

    def test_large_ccp_prunes_to_root(self):
        theta, tau = step_data()
        assert fit_tree(theta, tau, TreeParams(10, 10.0)).n_leaves == 1

    def test_empty_training_set(self):
        with pytest.raises(EmptyTrainingSet, match="empty training set"):
            fit_tree(np.empty((0, 1)), np.empty(0))

    def test_nonfinite_response(self):
        with pytest.raises(ValueError):
            fit_tree(np.zeros((3, 1)), np.array([0.0, np.nan, 1.0]))

    def test_below_min_samples_is_single_leaf(self):
        theta, tau = step_data(50)
        assert fit_tree(theta, tau, TreeParams(100, 0.0)).n_leaves == 1

    @pytest.mark.parametrize("mss,ccp", [(10, 0.0), (50, 0.0), (20, 0.002), (100, 0.001)])
    def test_matches_sklearn(self, mss, ccp):
        gen = np.random.default_rng(mss)
        # sklearn works in float32 internally; use float32-exact inputs
        theta = gen.uniform(-2, 2, size=(1500, 2)).astype(np.float32).astype(float)
        tau = np.sin(2 * theta[:, 0]) + theta[:, 1] ** 2 + gen.normal(0, 0.3, 1500)
        ours = fit_tree(theta, tau, TreeParams(mss, ccp))
        ref = DecisionTreeRegressor(min_samples_split=mss, ccp_alpha=ccp, random_state=0).fit(theta, tau)
        assert ours.n_leaves == ref.get_n_leaves()
        probe = gen.uniform(-2, 2, size=(4000, 2)).astype(np.float32).astype(float)
        np.testing.assert_allclose(ours.predict(probe), ref.predict(probe), atol=1e-10)

    def test_weights_equal_repeated_rows(self):
        gen = np.random.default_rng(3)
        theta = gen.uniform(size=(300, 1))
        tau = theta[:, 0] ** 2 + gen.normal(0, 0.05, 300)
        w = gen.integers(0, 3, 300)
        a = fit_tree(theta, tau, TreeParams(2, 0.0, max_depth=3), sample_weight=w)
        rep = np.repeat(np.arange(300), w)
        b = fit_tree(theta[rep], tau[rep], TreeParams(2, 0.0, max_depth=3))
        probe = np.linspace(0, 1, 1001)[:, None]
        np.testing.assert_allclose(a.predict(probe), b.predict(probe), atol=1e-12)

    def test_deterministic(self):
        theta, tau = step_data(seed=4)
        tau = tau + np.random.default_rng(4).normal(0, 0.2, len(tau))
        a, b = fit_tree(theta, tau, TreeParams(10, 0.001)), fit_tree(theta, tau, TreeParams(10, 0.001))
        for k in RegressionTree.FIELDS:
            np.testing.assert_array_equal(getattr(a, k), getattr(b, k))

    def test_tie_goes_to_lowest_dimension(self):
        # both coordinates carry the same information
        x = np.repeat(np.arange(10.0), 10)
        theta = np.column_stack([x, x])
        tree = fit_tree(theta, (x > 4.5).astype(float), TreeParams(2, 0.0))
        assert tree.feature[0] == 0

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            TreeParams(min_samples_split=1)
        with pytest.raises(ValueError):
            TreeParams(ccp_alpha=-1)


class TestRouting:
    def test_single_leaf_routes_to_zero(self):
        tree = fit_tree(np.zeros((5, 1)) + np.arange(5)[:, None], np.ones(5))
        assert leaf_of(tree, [2.0]) == 0

    def test_left_right_and_boundary(self):
        theta, tau = step_data()
        tree = fit_tree(theta, tau, TreeParams(10, 10.0 ** -9, max_depth=1))
        t = tree.threshold[0]
        left, right = leaf_of(tree, [0.2]), leaf_of(tree, [0.7])
        assert left != right
        assert leaf_of(tree, [t]) == left

    def test_leaf_ids_dense(self):
        theta = np.random.default_rng(2).uniform(size=(2000, 2))
        tree = fit_tree(theta, theta.sum(axis=1), TreeParams(50, 0.0))
        leaves = tree.feature < 0
        assert sorted(tree.leaf_id[leaves]) == list(range(tree.n_leaves))
        assert np.all(tree.n_samples[leaves] >= 1)

    def test_partition_property(self):
        gen = np.random.default_rng(5)
        theta = gen.uniform(-1, 1, size=(3000, 2))
        tree = fit_tree(theta, np.abs(theta).sum(axis=1) + gen.normal(0, 0.1, 3000), TreeParams(40, 0.0005),
                        bounds=np.array([[-1.0, 1.0], [-1.0, 1.0]]))
        boxes = tree.leaf_boxes()
        pts = gen.uniform(-1, 1, size=(10_000, 2))
        lo, hi = boxes[None, :, :, 0], boxes[None, :, :, 1]
        inside = np.all((pts[:, None, :] > lo) & (pts[:, None, :] <= hi), axis=2)
        assert np.all(inside.sum(axis=1) == 1)
        np.testing.assert_array_equal(np.argmax(inside, axis=1), tree.apply(pts))
        vol = np.prod(boxes[:, :, 1] - boxes[:, :, 0], axis=1).sum()
        assert vol == pytest.approx(4.0)

    def test_leaf_constant_on_cells(self):
        gen = np.random.default_rng(6)
        theta = gen.uniform(size=(1000, 1))
        tree = fit_tree(theta, np.sin(6 * theta[:, 0]), TreeParams(20, 0.0), bounds=np.array([[0.0, 1.0]]))
        for k, box in enumerate(tree.leaf_boxes()):
            inner = np.linspace(box[0, 0], box[0, 1], 12)[1:]
            assert np.all(tree.apply(inner[:, None]) == k)


class TestPruning:
    @settings(max_examples=25)
    @given(st.floats(0.0, 0.01), st.floats(0.0, 0.01), st.integers(0, 1000))
    def test_larger_alpha_coarsens(self, a1, a2, seed):
        lo, hi = sorted((a1, a2))
        gen = np.random.default_rng(seed)
        theta = gen.uniform(size=(600, 2))
        tau = theta[:, 0] * 2 + np.sin(5 * theta[:, 1]) + gen.normal(0, 0.3, 600)
        fine = fit_tree(theta, tau, TreeParams(20, lo))
        coarse = fit_tree(theta, tau, TreeParams(20, hi))
        probe = gen.uniform(size=(3000, 2))
        lf, lc = fine.apply(probe), coarse.apply(probe)
        # every fine leaf sits inside a single coarse leaf
        for leaf in np.unique(lf):
            assert len(np.unique(lc[lf == leaf])) == 1
        assert coarse.n_leaves <= fine.n_leaves


class TestSplitValues:
    def test_single_leaf_empty(self):
        tree = fit_tree(np.arange(5.0)[:, None], np.ones(5))
        assert split_values(tree, [0]) == []

    def test_one_split(self):
        theta = np.column_stack([np.zeros(200), np.linspace(0, 1, 200)])
        tau = (theta[:, 1] > 0.5).astype(float)
        tree = fit_tree(theta, tau, TreeParams(10, 0.0, max_depth=1))
        (pair,) = split_values(tree, {1})
        assert pair[0] == 1 and pair[1] == pytest.approx(0.5, abs=0.01)
        assert split_values(tree, {0}) == []

    def test_depth_limit(self):
        theta, tau = step_data()
        tau = tau + theta[:, 0]
        tree = fit_tree(theta, tau, TreeParams(10, 0.0))
        assert len(split_values(tree, [0], depth_limit=1)) == 1
        assert len(split_values(tree, [0])) == tree.n_leaves - 1

    def test_roundtrip_arrays(self):
        theta, tau = step_data()
        tree = fit_tree(theta, tau, TreeParams(10, 0.0))
        again = RegressionTree.from_arrays(tree.to_arrays())
        np.testing.assert_array_equal(again.apply(theta), tree.apply(theta))
