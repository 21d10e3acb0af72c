"""Exact CART regression tree with minimal cost-complexity pruning.

The tree regresses a statistic on parameter coordinates; its leaves are the
cells of the partition used for local calibration. Conventions:

* split candidates are midpoints between consecutive distinct values;
* a point goes left iff ``coord <= threshold``;
* equal gains are resolved toward the lowest dimension, then the lowest
  threshold;
* leaves are numbered ``0..L-1`` in depth-first, left-first order.

Integer sample weights stand in for repeated rows, so a bootstrap resample
can be fitted without materialising duplicates. Node means, impurities and
pruning use weighted counts; the ``min_samples_split`` test counts distinct
rows, as the common CART implementations do for bootstrap resamples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TreeParams", "RegressionTree", "EmptyTrainingSet", "fit_tree", "leaf_of", "split_values"]


class EmptyTrainingSet(ValueError):
    pass


@dataclass(frozen=True)
class TreeParams:
    min_samples_split: int = 100
    ccp_alpha: float = 0.001
    max_depth: int | None = None

    def __post_init__(self):
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.ccp_alpha < 0:
            raise ValueError("ccp_alpha must be >= 0")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Array-backed tree. Internal nodes have ``feature >= 0``; leaves have
    ``feature == -1`` and a dense ``leaf_id``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_id: np.ndarray
    depth: np.ndarray
    n_samples: np.ndarray
    value: np.ndarray
    sse: np.ndarray
    bounds: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    def apply(self, theta) -> np.ndarray:
        """Leaf ids for points ``(N, d)``."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        node = np.zeros(theta.shape[0], dtype=np.int64)
        active = np.nonzero(self.feature[node] >= 0)[0]
        while active.size:
            nd = node[active]
            go_left = theta[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] >= 0]
        return self.leaf_id[node]

    def leaf_values(self) -> np.ndarray:
        """Mean response per leaf id."""
        leaves = self.feature < 0
        out = np.empty(self.n_leaves)
        out[self.leaf_id[leaves]] = self.value[leaves]
        return out

    def predict(self, theta) -> np.ndarray:
        return self.leaf_values()[self.apply(theta)]

    def leaf_boxes(self) -> np.ndarray:
        """``(L, d, 2)`` array of leaf cells; lower faces are open, upper
        faces closed, except on the outer box."""
        boxes = np.empty((self.n_leaves, self.dim, 2))
        stack = [(0, self.bounds.copy())]
        while stack:
            node, box = stack.pop()
            f = self.feature[node]
            if f < 0:
                boxes[self.leaf_id[node]] = box
                continue
            lbox, rbox = box.copy(), box.copy()
            lbox[f, 1] = self.threshold[node]
            rbox[f, 0] = self.threshold[node]
            stack.append((self.right[node], rbox))
            stack.append((self.left[node], lbox))
        return boxes

    def splits(self, dims=None, depth_limit: int | None = None):
        """``(dim, threshold)`` pairs of internal nodes, optionally limited to
        ``dims`` and to nodes at depth ``< depth_limit``."""
        internal = self.feature >= 0
        if dims is not None:
            internal &= np.isin(self.feature, list(dims))
        if depth_limit is not None:
            internal &= self.depth < depth_limit
        pairs = {(int(f), float(t)) for f, t in zip(self.feature[internal], self.threshold[internal])}
        return sorted(pairs)

    # -- persistence --------------------------------------------------------
    FIELDS = ("feature", "threshold", "left", "right", "leaf_id", "depth", "n_samples", "value", "sse", "bounds")

    def to_arrays(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}

    @classmethod
    def from_arrays(cls, arrays: dict) -> "RegressionTree":
        dtypes = {"threshold": float, "value": float, "sse": float, "bounds": float, "n_samples": float}
        return cls(**{k: np.asarray(arrays[k], dtype=dtypes.get(k, np.int64)) for k in cls.FIELDS})


def _best_split(theta, y, w, orders, params_min_leaf=1):
    """Best variance-reducing split of one node.

    ``orders[j]`` lists the node's rows sorted by coordinate ``j``. Returns
    ``(gain, dim, threshold)`` or ``None``.
    """
    best = None
    total_w = w[orders[0]].sum()
    total_s = (w * y)[orders[0]].sum()
    parent = total_s * total_s / total_w
    for j, order in enumerate(orders):
        xs = theta[order, j]
        distinct = xs[1:] > xs[:-1]
        if not distinct.any():
            continue
        ws = w[order]
        cw = np.cumsum(ws)[:-1]
        cs = np.cumsum(ws * y[order])[:-1]
        rw = total_w - cw
        rs = total_s - cs
        # maximising the between-children term is equivalent to minimising
        # the children's total squared error
        score = np.where(distinct, cs * cs / cw + rs * rs / rw, -np.inf)
        k = int(np.argmax(score))
        gain = score[k] - parent
        if best is None or gain > best[0]:
            a, b = xs[k], xs[k + 1]
            thr = 0.5 * (a + b)
            if thr >= b:  # adjacent floats
                thr = a
            best = (gain, j, thr)
    return best


def _grow(theta, y, w, params):
    n, d = theta.shape
    feature, threshold, left, right, depth = [], [], [], [], []
    n_samples, value, sse = [], [], []
    wy = w * y
    wyy = w * y * y

    def new_node(rows, dep):
        sw = w[rows].sum()
        sy = wy[rows].sum()
        syy = wyy[rows].sum()
        mean = sy / sw
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        depth.append(dep)
        n_samples.append(sw)
        value.append(mean)
        sse.append(max(syy - sy * mean, 0.0))
        return len(feature) - 1

    base = [np.argsort(theta[:, j], kind="stable") for j in range(d)]
    root = new_node(base[0], 0)
    stack = [(root, base)]
    while stack:
        node, orders = stack.pop()
        rows = orders[0]
        yr = y[rows]
        # like CART implementations with bootstrap weights, the split rule
        # counts distinct rows, not their multiplicities
        if (
            len(rows) < params.min_samples_split
            or (params.max_depth is not None and depth[node] >= params.max_depth)
            or yr.max() == yr.min()
        ):
            continue
        found = _best_split(theta, y, w, orders)
        if found is None or not found[0] > 0:
            continue
        _, j, thr = found
        go_left = np.zeros(n, dtype=bool)
        go_left[rows] = theta[rows, j] <= thr
        lorders = [o[go_left[o]] for o in orders]
        rorders = [o[~go_left[o]] for o in orders]
        lnode = new_node(lorders[0], depth[node] + 1)
        rnode = new_node(rorders[0], depth[node] + 1)
        feature[node] = j
        threshold[node] = thr
        left[node] = lnode
        right[node] = rnode
        # push right first so the left subtree is expanded first
        stack.append((rnode, rorders))
        stack.append((lnode, lorders))
    return dict(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        depth=np.array(depth, dtype=np.int64),
        n_samples=np.array(n_samples, dtype=float),
        value=np.array(value, dtype=float),
        sse=np.array(sse, dtype=float),
    )


def _prune(nodes, ccp_alpha, total_weight):
    """Weakest-link pruning: repeatedly collapse the internal node with the
    smallest effective alpha while that alpha is ``<= ccp_alpha``.
    Node risk is ``sse / total_weight``."""
    feature = nodes["feature"].copy()
    left, right = nodes["left"], nodes["right"]
    risk = nodes["sse"] / total_weight
    n = len(feature)
    parent = np.full(n, -1)
    for i in range(n):
        if feature[i] >= 0:
            parent[left[i]] = i
            parent[right[i]] = i
    while True:
        # subtree risk and leaf counts, children have larger indices
        sub_risk = risk.copy()
        sub_leaves = np.ones(n)
        for i in range(n - 1, -1, -1):
            if feature[i] >= 0:
                sub_risk[i] = sub_risk[left[i]] + sub_risk[right[i]]
                sub_leaves[i] = sub_leaves[left[i]] + sub_leaves[right[i]]
        internal = _reachable_internal(feature, left, right)
        if not internal.size:
            break
        eff = (risk[internal] - sub_risk[internal]) / (sub_leaves[internal] - 1.0)
        k = int(np.argmin(eff))
        if eff[k] > ccp_alpha:
            break
        feature[internal[k]] = -1
    return feature


def _reachable_internal(feature, left, right):
    out, stack = [], [0]
    while stack:
        i = stack.pop()
        if feature[i] >= 0:
            out.append(i)
            stack.append(right[i])
            stack.append(left[i])
    return np.array(sorted(out), dtype=np.int64)


def _compact(nodes, feature, bounds):
    """Drop unreachable nodes; renumber nodes and leaves depth-first."""
    new_index, order = {}, []
    stack = [0]
    while stack:
        i = stack.pop()
        new_index[i] = len(order)
        order.append(i)
        if feature[i] >= 0:
            stack.append(nodes["right"][i])
            stack.append(nodes["left"][i])
    order = np.array(order)
    f = feature[order]
    is_leaf = f < 0
    remap = lambda a: np.array([new_index[c] if c >= 0 and fi >= 0 else -1 for c, fi in zip(a, f)], dtype=np.int64)  # noqa: E731
    leaf_id = np.full(len(order), -1, dtype=np.int64)
    leaf_id[is_leaf] = np.arange(is_leaf.sum())
    return RegressionTree(
        feature=f,
        threshold=np.where(is_leaf, np.nan, nodes["threshold"][order]),
        left=remap(nodes["left"][order]),
        right=remap(nodes["right"][order]),
        leaf_id=leaf_id,
        depth=nodes["depth"][order],
        n_samples=nodes["n_samples"][order],
        value=nodes["value"][order],
        sse=nodes["sse"][order],
        bounds=np.asarray(bounds, dtype=float),
    )


def fit_tree(theta, tau, params: TreeParams | None = None, bounds=None, sample_weight=None) -> RegressionTree:
    """Fit a pruned CART tree of ``tau`` on ``theta``.

    Parameters
    ----------
    theta : (N, d) array
    tau : (N,) array
    params : TreeParams
    bounds : (d, 2) array, optional
        Parameter box recorded with the tree; defaults to the data range.
    sample_weight : (N,) nonnegative integer array, optional
        Row multiplicities (bootstrap counts). Zero-weight rows are ignored.
    """
    params = params or TreeParams()
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    tau = np.asarray(tau, dtype=float).ravel()
    if theta.shape[0] == 0:
        raise EmptyTrainingSet("empty training set")
    if theta.shape[0] != tau.shape[0]:
        raise ValueError("theta and tau lengths differ")
    if not np.all(np.isfinite(tau)):
        raise ValueError("responses must be finite")
    if sample_weight is None:
        w = np.ones(theta.shape[0])
    else:
        w = np.asarray(sample_weight, dtype=float)
        keep = w > 0
        theta, tau, w = theta[keep], tau[keep], w[keep]
        if theta.shape[0] == 0:
            raise EmptyTrainingSet("all sample weights are zero")
    if bounds is None:
        bounds = np.column_stack([theta.min(axis=0), theta.max(axis=0)])
    nodes = _grow(theta, tau, w, params)
    feature = nodes["feature"]
    if params.ccp_alpha > 0:
        feature = _prune(nodes, params.ccp_alpha, w.sum())
    return _compact(nodes, feature, bounds)


def leaf_of(tree: RegressionTree, theta) -> int:
    return int(tree.apply(np.asarray(theta, dtype=float).reshape(1, -1))[0])


def split_values(tree: RegressionTree, dims, depth_limit: int | None = None):
    return tree.splits(dims, depth_limit)
