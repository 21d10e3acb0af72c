"""Bagged regression trees, Breiman proximity and proximity neighborhoods.

Two parameter points have proximity ``rho`` equal to the number of trees in
which they share a leaf. The neighborhood of ``theta`` at threshold ``M`` is
the set of calibration records with proximity ``>= M``; TRUST++ calibrates
the cutoff on that neighborhood.

Each tree keeps a CSR index (leaf -> records), so a proximity row against
all ``B`` records costs about ``K`` times the leaf size rather than
``B * K`` comparisons.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._seeding import derive_rng, derive_seed
from .calibration import CalibratedCutoffs, _as_points, _Calibrator, quantile_rank
from .tree import RegressionTree, TreeParams, fit_tree

__all__ = [
    "ForestParams",
    "Forest",
    "TrustPPCalibrator",
    "EmptyNeighborhood",
    "TuneResult",
    "fit_forest",
    "proximity",
    "neighborhood",
    "tune_m",
    "default_m_grid",
]

_BATCH_ELEMS = 8_000_000


class EmptyNeighborhood(RuntimeError):
    """No calibration record reaches the proximity threshold."""


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    M: int | None = None
    min_samples_split: int = 100
    max_depth: int | None = None
    bootstrap: bool = True

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.M is not None and not 1 <= self.M <= self.n_trees:
            raise ValueError("M must lie in [1, n_trees]")

    @property
    def default_M(self) -> int:
        return self.M if self.M is not None else math.ceil(self.n_trees / 2)

    @property
    def tree_params(self) -> TreeParams:
        # forest trees are never post-pruned
        return TreeParams(self.min_samples_split, 0.0, self.max_depth)


def _fit_one(theta, tau, params: ForestParams, bounds, seed, k):
    if params.bootstrap:
        rng = derive_rng(seed, "bootstrap", k)
        counts = np.bincount(rng.integers(0, len(tau), size=len(tau)), minlength=len(tau))
    else:
        counts = None
    return fit_tree(theta, tau, params.tree_params, bounds=bounds, sample_weight=counts)


class Forest:
    """Fitted ensemble plus the calibration records' leaf matrix."""

    def __init__(self, trees, theta, tau, params: ForestParams | None = None):
        self.trees = list(trees)
        self.theta = np.atleast_2d(np.asarray(theta, dtype=float))
        self.tau = np.asarray(tau, dtype=float).ravel()
        self.params = params or ForestParams(n_trees=len(self.trees))
        if len(self.theta) != len(self.tau):
            raise ValueError("theta and tau lengths differ")
        self.leaf_matrix = self.apply(self.theta)
        # records are indexed by their rank in tau so that a neighborhood
        # mask is already sorted by statistic value
        self.tau_order = np.argsort(self.tau, kind="stable")
        self.sorted_tau = self.tau[self.tau_order]
        rank_leaves = self.leaf_matrix[self.tau_order]
        self._members, self._offsets = [], []
        for k, tree in enumerate(self.trees):
            col = rank_leaves[:, k]
            self._members.append(np.argsort(col, kind="stable").astype(np.int64))
            self._offsets.append(np.concatenate([[0], np.cumsum(np.bincount(col, minlength=tree.n_leaves))]))

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def n_records(self) -> int:
        return len(self.tau)

    def apply(self, points) -> np.ndarray:
        points = _as_points(points)
        return np.column_stack([t.apply(points) for t in self.trees]).astype(np.int64)

    def _counts_for_leaves(self, leaves: np.ndarray) -> np.ndarray:
        """Proximity of each query (rows of a leaf matrix) to every record,
        columns in tau-rank order."""
        q = leaves.shape[0]
        B = self.n_records
        chunks = []
        for k in range(self.n_trees):
            off = self._offsets[k]
            starts = off[leaves[:, k]]
            lens = off[leaves[:, k] + 1] - starts
            total = int(lens.sum())
            if total == 0:
                continue
            first = np.cumsum(lens) - lens
            pos = np.arange(total) - np.repeat(first - starts, lens)
            rows = np.repeat(np.arange(q, dtype=np.int64), lens)
            chunks.append(rows * B + self._members[k][pos])
        flat = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
        return np.bincount(flat, minlength=q * B).reshape(q, B)

    def _batch_size(self) -> int:
        return max(1, _BATCH_ELEMS // max(self.n_records, 1))

    def proximity_to_records(self, points) -> np.ndarray:
        """``(G, B)`` proximities, columns in the original record order."""
        leaves = self.apply(points)
        out = np.empty((len(leaves), self.n_records), dtype=np.int64)
        step = self._batch_size()
        for s in range(0, len(leaves), step):
            out[s:s + step][:, self.tau_order] = self._counts_for_leaves(leaves[s:s + step])
        return out

    def proximity(self, a, b) -> int:
        la = self.apply(np.asarray(a, dtype=float).reshape(1, -1))[0]
        lb = self.apply(np.asarray(b, dtype=float).reshape(1, -1))[0]
        return int(np.sum(la == lb))

    def neighborhood(self, theta, M: int | None = None) -> np.ndarray:
        """Indices of records with proximity ``>= M`` to ``theta``."""
        M = self._check_M(M)
        prox = self.proximity_to_records(np.asarray(theta, dtype=float).reshape(1, -1))[0]
        idx = np.nonzero(prox >= M)[0]
        if idx.size == 0:
            raise EmptyNeighborhood(f"no calibration support at {theta!r} with M={M}")
        return idx

    def _check_M(self, M):
        M = self.params.default_M if M is None else int(M)
        if not 1 <= M <= self.n_trees:
            raise ValueError(f"M must lie in [1, {self.n_trees}]")
        return M

    def calibrator(self, M: int | None = None, empty: str = "error") -> "TrustPPCalibrator":
        return TrustPPCalibrator(self, self._check_M(M), empty)

    def split_values(self, dims=None, depth_limit=None):
        pairs = set()
        for t in self.trees:
            pairs.update(t.splits(dims, depth_limit))
        return sorted(pairs)


class TrustPPCalibrator(_Calibrator):
    """Proximity-ball calibrator.

    ``empty`` selects the policy for an empty neighborhood: ``"error"``
    raises :class:`EmptyNeighborhood`; ``"relax"`` lowers ``M`` for that
    point to the largest value with a nonempty neighborhood.
    """

    method = "TRUST++"

    def __init__(self, forest: Forest, M: int, empty: str = "error"):
        self.forest = forest
        self.M = M
        if empty not in ("error", "relax"):
            raise ValueError("empty must be 'error' or 'relax'")
        self.empty = empty
        self.theta, self.tau = forest.theta, forest.tau

    def _masks(self, points):
        """Yield ``(row indices, masks)`` with masks over tau-sorted records.
        Points with identical leaf signatures share one computation."""
        leaves = self.forest.apply(points)
        uniq, inverse = np.unique(leaves, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        step = self.forest._batch_size()
        for s in range(0, len(uniq), step):
            counts = self.forest._counts_for_leaves(uniq[s:s + step])
            mask = counts >= self.M
            empty = ~mask.any(axis=1)
            if empty.any():
                if self.empty == "error":
                    raise EmptyNeighborhood(f"{int(empty.sum())} query points have no records with proximity >= {self.M}")
                best = counts[empty].max(axis=1, keepdims=True)
                mask[empty] = counts[empty] >= best
            yield np.arange(s, min(s + step, len(uniq))), mask, inverse

    def neighborhood_values(self, points):
        points = _as_points(points)
        uvals = {}
        for uidx, mask, inverse in self._masks(points):
            for u, row in zip(uidx.tolist(), mask):
                uvals[u] = self.forest.sorted_tau[row]
        return [uvals[u] for u in inverse]

    def cutoffs(self, points, alpha):
        points = _as_points(points)
        ucut, um, inverse = [], [], None
        for _, mask, inverse in self._masks(points):
            mm = mask.sum(axis=1)
            c = quantile_rank(mm, alpha)
            # position of the c-th neighbor in tau order
            pos = np.argmax(np.cumsum(mask, axis=1) >= np.maximum(c, 1)[:, None], axis=1)
            ucut.append(np.where(c == 0, -np.inf, self.forest.sorted_tau[pos]))
            um.append(mm)
        cut = np.concatenate(ucut)[inverse]
        m = np.concatenate(um)[inverse]
        return CalibratedCutoffs(points, cut, m, self.method, alpha, meta={"M": self.M})


def fit_forest(theta, tau, params: ForestParams | None = None, seed=0, bounds=None, n_jobs: int = 1) -> Forest:
    """Fit ``params.n_trees`` trees, each on its own bootstrap resample.

    Tree ``k`` draws its resample from ``derive_seed(seed, "bootstrap", k)``,
    so results do not depend on ``n_jobs``.
    """
    params = params or ForestParams()
    theta = np.atleast_2d(np.asarray(theta, dtype=float))
    tau = np.asarray(tau, dtype=float).ravel()
    if len(tau) < 2:
        raise ValueError("a forest needs at least two records")
    seed = derive_seed(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    if n_jobs == 1:
        trees = [_fit_one(theta, tau, params, bounds, seed, k) for k in range(params.n_trees)]
    else:
        from joblib import Parallel, delayed

        trees = Parallel(n_jobs=n_jobs)(
            delayed(_fit_one)(theta, tau, params, bounds, seed, k) for k in range(params.n_trees)
        )
    return Forest(trees, theta, tau, params)


def proximity(forest: Forest, a, b) -> int:
    return forest.proximity(a, b)


def neighborhood(forest: Forest, theta, M: int | None = None) -> np.ndarray:
    return forest.neighborhood(theta, M)


def default_m_grid(n_trees: int, size: int = 10) -> list:
    """``size`` equally spaced integers in ``[n_trees / 10, n_trees]``."""
    grid = np.unique(np.round(np.linspace(n_trees / 10, n_trees, size)).astype(int))
    return [int(m) for m in grid if 1 <= m <= n_trees]


@dataclass
class TuneResult:
    M: int
    mae: dict


def tune_m(forest: Forest, model, statistic, alpha: float, B_tune: int = 1000, n_sim: int = 500,
           M_grid=None, seed=0, n=None, cutoff_fn=None) -> TuneResult:
    """Choose ``M`` by minimising the coverage MAE on reference draws.

    ``B_tune`` parameter points are drawn from the model's reference
    distribution; at each, ``n_sim`` fresh statistics are simulated once
    and reused for every candidate. Ties go to the smallest ``M``.

    ``cutoff_fn(M, points)`` overrides how cutoffs are computed at the
    tuning points (used for nuisance problems); by default the forest's
    proximity calibrator is queried at the full parameter.
    """
    from .evaluation import simulate_tau

    if n is None:
        raise ValueError("sample size n is required")
    M_grid = sorted(set(default_m_grid(forest.n_trees) if M_grid is None else [int(m) for m in M_grid]))
    if not M_grid or M_grid[0] < 1 or M_grid[-1] > forest.n_trees:
        raise ValueError("M_grid must be a nonempty subset of [1, K]")
    points = model.sample_reference(B_tune, derive_rng(seed, "tune", "grid"))
    taus = simulate_tau(model, statistic, points, n, n_sim, derive_seed(seed, "tune", "sim"))
    mae = {}
    for M in M_grid:
        try:
            if cutoff_fn is None:
                cut = forest.calibrator(M).cutoffs(points, alpha).cutoff
            else:
                cut = cutoff_fn(M, points)
        except EmptyNeighborhood as exc:
            warnings.warn(f"skipping M={M}: {exc}", stacklevel=2)
            continue
        cover = (taus >= cut[:, None]).mean(axis=1)
        mae[M] = float(np.mean(np.abs(cover - (1.0 - alpha))))
    if not mae:
        raise EmptyNeighborhood("every candidate M produced an empty neighborhood")
    best = min(mae.values())
    chosen = min(M for M, v in mae.items() if v == best)
    return TuneResult(chosen, mae)
