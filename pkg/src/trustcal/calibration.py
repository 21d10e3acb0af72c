"""Local conformal calibration of confidence-set cutoffs.

The cutoff at ``theta`` is the adjusted alpha-quantile of the statistic
values of the calibration records in a neighborhood of ``theta``: the leaf
of a single tree (TRUST) or a forest-proximity ball (TRUST++). The
confidence set for an observed dataset is ``{theta : tau(x, theta) >= cutoff}``.

A cutoff of ``-inf`` means the neighborhood is too small to ever reject.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .tree import RegressionTree

__all__ = [
    "AdjustedEcdf",
    "CalibratedCutoffs",
    "ConfidenceReport",
    "TrustCalibrator",
    "adjusted_cdf",
    "adjusted_quantile",
    "quantile_rank",
    "trust_cutoffs",
    "trustpp_cutoffs",
    "confidence_set",
    "p_value",
    "intervals_1d",
    "EmptyLeafWarning",
]


class EmptyLeafWarning(UserWarning):
    pass


def quantile_rank(m, alpha: float):
    """Smallest ``c`` in ``0..m`` with ``(c + 1) / (m + 1) >= alpha``.

    ``c == 0`` means every real qualifies (the ``-inf`` sentinel); otherwise
    the adjusted quantile is the ``c``-th smallest value (1-based).
    Works elementwise on integer arrays.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    m = np.asarray(m, dtype=np.int64)
    c = np.ceil(alpha * (m + 1)).astype(np.int64) - 1
    c = np.clip(c, 0, m)
    # repair floating-point rounding of alpha * (m + 1) in either direction
    while True:
        down = (c > 0) & (c / (m + 1) >= alpha)
        if not down.any():
            break
        c = np.where(down, c - 1, c)
    while True:
        up = (c + 1) / (m + 1) < alpha
        if not up.any():
            break
        c = np.where(up, c + 1, c)
    return c


@dataclass(frozen=True)
class AdjustedEcdf:
    """``H(t) = (#{values <= t} + 1) / (m + 1)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return len(self.values)

    def cdf(self, t):
        return (np.searchsorted(self.values, t, side="right") + 1) / (self.m + 1)

    def quantile(self, alpha: float) -> float:
        c = int(quantile_rank(self.m, alpha))
        return -math.inf if c == 0 else float(self.values[c - 1])


def adjusted_cdf(ecdf, t):
    if not isinstance(ecdf, AdjustedEcdf):
        ecdf = AdjustedEcdf(ecdf)
    out = ecdf.cdf(t)
    return float(out) if np.ndim(out) == 0 else out


def adjusted_quantile(ecdf, alpha: float) -> float:
    if not isinstance(ecdf, AdjustedEcdf):
        ecdf = AdjustedEcdf(ecdf)
    return ecdf.quantile(alpha)


@dataclass
class CalibratedCutoffs:
    """Cutoffs on a grid of (interest) parameter values.

    ``lower``/``upper`` hold cutoff confidence bounds when computed, and
    ``nuisance_argmin`` the nuisance value attaining the minimum for
    nuisance problems.
    """

    grid: np.ndarray
    cutoff: np.ndarray
    m: np.ndarray
    method: str
    alpha: float
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    nuisance_argmin: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = _as_points(self.grid)
        self.cutoff = np.asarray(self.cutoff, dtype=float)
        self.m = np.asarray(self.m, dtype=np.int64)
        if not (len(self.grid) == len(self.cutoff) == len(self.m)):
            raise ValueError("grid, cutoff and m lengths differ")

    def __len__(self):
        return len(self.cutoff)


@dataclass
class ConfidenceReport:
    grid: np.ndarray
    tau: np.ndarray
    cutoff: np.ndarray
    member: np.ndarray
    m: np.ndarray | None = None
    labels: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None


# ---------------------------------------------------------------------------
# calibrators


def _as_points(points) -> np.ndarray:
    """``(N, k)`` view of a grid; a flat array is read as N scalar points."""
    p = np.asarray(points, dtype=float)
    return p[:, None] if p.ndim == 1 else np.atleast_2d(p)


class _Calibrator:
    """Shared logic; subclasses implement ``neighborhood_values`` and may
    override ``cutoffs`` with a vectorised version."""

    method = "calibrator"

    def __init__(self, theta, tau):
        self.theta = np.atleast_2d(np.asarray(theta, dtype=float))
        self.tau = np.asarray(tau, dtype=float).ravel()
        if len(self.theta) != len(self.tau):
            raise ValueError("theta and tau lengths differ")

    def neighborhood_values(self, points) -> list:
        """Sorted statistic values of each point's neighborhood."""
        raise NotImplementedError

    def cutoffs(self, points, alpha: float) -> CalibratedCutoffs:
        vals = self.neighborhood_values(points)
        m = np.array([len(v) for v in vals], dtype=np.int64)
        c = quantile_rank(m, alpha)
        cut = np.array([-np.inf if ci == 0 else v[ci - 1] for v, ci in zip(vals, c)])
        return CalibratedCutoffs(_as_points(points), cut, m, self.method, alpha)

    def p_values(self, points, tau_obs) -> np.ndarray:
        vals = self.neighborhood_values(points)
        tau_obs = np.broadcast_to(np.asarray(tau_obs, dtype=float), (len(vals),))
        return np.array([(np.searchsorted(v, t, side="right") + 1) / (len(v) + 1) for v, t in zip(vals, tau_obs)])


class TrustCalibrator(_Calibrator):
    """Single-tree partition calibrator. ``theta``/``tau`` are the
    calibration records (the training records unless a split is used)."""

    method = "TRUST"

    def __init__(self, tree: RegressionTree, theta, tau):
        super().__init__(theta, tau)
        self.tree = tree
        leaves = tree.apply(self.theta)
        order = np.lexsort((self.tau, leaves))
        self._sorted_tau = self.tau[order]
        counts = np.bincount(leaves, minlength=tree.n_leaves)
        self._start = np.concatenate([[0], np.cumsum(counts)])
        self.leaf_counts = counts

    def leaf_values(self, leaf: int) -> np.ndarray:
        return self._sorted_tau[self._start[leaf]:self._start[leaf + 1]]

    def neighborhood_values(self, points):
        return [self.leaf_values(leaf) for leaf in self.tree.apply(_as_points(points))]

    def cutoffs(self, points, alpha):
        points = _as_points(points)
        leaves = self.tree.apply(points)
        m = self.leaf_counts[leaves]
        c = quantile_rank(m, alpha)
        idx = self._start[leaves] + np.maximum(c, 1) - 1
        cut = np.where(c == 0, -np.inf, self._sorted_tau[np.minimum(idx, len(self._sorted_tau) - 1)])
        empty = m == 0
        if empty.any():
            warnings.warn(
                f"{int(empty.sum())} grid points fall in leaves without calibration records; "
                "their cutoff is -inf",
                EmptyLeafWarning,
                stacklevel=2,
            )
        return CalibratedCutoffs(points, cut, m, self.method, alpha)


def trust_cutoffs(tree: RegressionTree, calib_theta, calib_tau, grid, alpha: float) -> CalibratedCutoffs:
    return TrustCalibrator(tree, calib_theta, calib_tau).cutoffs(grid, alpha)


def trustpp_cutoffs(forest, grid, alpha: float, M: int | None = None) -> CalibratedCutoffs:
    return forest.calibrator(M).cutoffs(grid, alpha)


# ---------------------------------------------------------------------------
# confidence sets and p-values


def confidence_set(cutoffs: CalibratedCutoffs, model, statistic, x_obs) -> ConfidenceReport:
    """Grid membership ``tau(x_obs, theta) >= cutoff(theta)``."""
    x = np.asarray(x_obs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("observed dataset is empty")
    tau = statistic.evaluate(model, x[None], cutoffs.grid)
    member = tau >= cutoffs.cutoff
    return ConfidenceReport(
        grid=cutoffs.grid, tau=tau, cutoff=cutoffs.cutoff, member=member, m=cutoffs.m,
        lower=cutoffs.lower, upper=cutoffs.upper,
    )


def p_value(neighborhood_values, model, statistic, x_obs, theta0) -> float:
    """Adjusted ECDF of the neighborhood evaluated at ``tau(x_obs, theta0)``."""
    x = np.asarray(x_obs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    tau = statistic.evaluate(model, x[None], np.asarray(theta0, dtype=float).reshape(1, -1))[0]
    return adjusted_cdf(neighborhood_values, tau)


def intervals_1d(grid, member) -> list:
    """Maximal runs of member grid points as ``(first, last)`` coordinates
    (one-dimensional grids only)."""
    g = np.asarray(grid, dtype=float).reshape(len(member), -1)
    if g.shape[1] != 1:
        raise ValueError("interval extraction needs a one-dimensional grid")
    g = g[:, 0]
    member = np.asarray(member, dtype=bool)
    out = []
    i = 0
    while i < len(member):
        if member[i]:
            j = i
            while j + 1 < len(member) and member[j + 1]:
                j += 1
            out.append((float(g[i]), float(g[j])))
            i = j + 1
        else:
            i += 1
    return out
