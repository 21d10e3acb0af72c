"""Order-statistic confidence intervals for cutoffs and three-way sets.

If ``Z`` counts the neighborhood values at or below the true cutoff (the
alpha-quantile), then ``Z ~ Binomial(m, alpha)`` and

    P(tau_(l) <= C <= tau_(u)) >= P(l <= Z <= u - 1),

so any ``(l, u)`` with ``P(l <= Z <= u - 1) >= 1 - beta`` gives a
``1 - beta`` interval for ``C`` from order statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

__all__ = [
    "CutoffInterval",
    "InsufficientNeighborhood",
    "ThreeWayReport",
    "IN",
    "OUT",
    "UNDETERMINED",
    "quantile_ci",
    "tail_bounds",
    "cutoff_bounds",
    "three_way",
    "three_way_labels",
]

IN, OUT, UNDETERMINED = "IN", "OUT", "UNDETERMINED"


class InsufficientNeighborhood(ValueError):
    """No order-statistic pair reaches the requested level."""

    def __init__(self, m, alpha, beta, min_beta):
        self.m, self.alpha, self.beta, self.min_beta = m, alpha, beta, min_beta
        super().__init__(
            f"m={m} values cannot give a {1 - beta:.4g} interval for the {alpha:g}-quantile; "
            f"smallest feasible beta is {min_beta:.6g}"
        )


@dataclass(frozen=True)
class CutoffInterval:
    l: int
    u: int
    lower: float
    upper: float
    beta: float
    m: int
    coverage: float
    balanced: bool


def _check(alpha, beta):
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")


def _ranks(m: int, alpha: float, beta: float):
    """(l, u, coverage, balanced) for ``m`` values. Raises when infeasible."""
    F = stats.binom.cdf(np.arange(-1, m + 1), m, alpha)  # F[k + 1] = P(Z <= k)
    cdf = lambda k: F[k + 1]  # noqa: E731
    half = beta / 2.0
    # balanced: P(Z < l) <= beta/2 and P(Z >= u) <= beta/2
    lows = [l for l in range(1, m + 1) if cdf(l - 1) <= half]
    highs = [u for u in range(1, m + 1) if 1.0 - cdf(u - 1) <= half]
    if lows and highs and max(lows) <= min(highs):
        l, u = max(lows), min(highs)
        return l, u, cdf(u - 1) - cdf(l - 1), True
    target = 1.0 - beta
    best = None
    centre = m * alpha
    for l in range(1, m + 1):
        need = target + cdf(l - 1)
        # smallest u - 1 >= l - 1 with P(Z <= u - 1) >= need
        k = int(np.searchsorted(F[1:], need - 1e-15, side="left"))
        u = max(k + 1, l)
        if u > m or cdf(u - 1) - cdf(l - 1) < target - 1e-15:
            continue
        key = (u - l, abs(0.5 * (l + u) - centre))
        if best is None or key < best[0]:
            best = (key, l, u)
    if best is None:
        min_beta = 1.0 - (cdf(m - 1) - cdf(0))
        raise InsufficientNeighborhood(m, alpha, beta, min_beta)
    _, l, u = best
    return l, u, cdf(u - 1) - cdf(l - 1), False


def quantile_ci(values, alpha: float, beta: float) -> CutoffInterval:
    """Narrowest ``1 - beta`` order-statistic interval for the
    ``alpha``-quantile of the distribution of ``values``.

    When possible each tail gets at most ``beta / 2``; otherwise the
    narrowest pair meeting the total level is returned, centred on
    ``m * alpha`` among equally narrow pairs.
    """
    _check(alpha, beta)
    v = np.sort(np.asarray(values, dtype=float).ravel())
    m = len(v)
    if m < 1:
        raise InsufficientNeighborhood(0, alpha, beta, 1.0)
    l, u, cov, balanced = _ranks(m, alpha, beta)
    return CutoffInterval(l, u, float(v[l - 1]), float(v[u - 1]), beta, m, float(cov), balanced)


def tail_bounds(values, alpha: float, beta: float):
    """Per-tail bounds ``(lower, upper)`` used by the three-way sets.

    ``lower`` is ``tau_(l)`` for the largest ``l`` with ``P(Z < l) <= beta/2``
    (``-inf`` if none exists) and ``upper`` is ``tau_(u)`` for the smallest
    ``u`` with ``P(Z >= u) <= beta/2`` (``+inf`` if none exists). Each side
    errs with probability at most ``beta / 2`` on its own.
    """
    _check(alpha, beta)
    v = np.sort(np.asarray(values, dtype=float).ravel())
    m = len(v)
    if m == 0:
        return -np.inf, np.inf
    F = stats.binom.cdf(np.arange(0, m), m, alpha)  # F[k] = P(Z <= k)
    half = beta / 2.0
    ok_l = np.nonzero(F <= half)[0]  # index k = l - 1
    lower = float(v[ok_l[-1]]) if ok_l.size else -np.inf
    ok_u = np.nonzero(1.0 - F <= half)[0]  # index k = u - 1
    upper = float(v[ok_u[0]]) if ok_u.size else np.inf
    return lower, upper


def cutoff_bounds(neighborhood_values, alpha: float, beta: float):
    """Vector of per-point ``(lower, upper)`` bounds for a list of sorted
    neighborhood value arrays."""
    cache = {}
    lower = np.empty(len(neighborhood_values))
    upper = np.empty(len(neighborhood_values))
    for i, vals in enumerate(neighborhood_values):
        m = len(vals)
        if m not in cache:
            F = stats.binom.cdf(np.arange(0, m), m, alpha) if m else np.empty(0)
            ok_l = np.nonzero(F <= beta / 2)[0]
            ok_u = np.nonzero(1.0 - F <= beta / 2)[0]
            cache[m] = (ok_l[-1] if ok_l.size else -1, ok_u[0] if ok_u.size else -1)
        kl, ku = cache[m]
        lower[i] = vals[kl] if kl >= 0 else -np.inf
        upper[i] = vals[ku] if ku >= 0 else np.inf
    return lower, upper


@dataclass
class ThreeWayReport:
    grid: np.ndarray
    labels: np.ndarray
    beta: float
    tau: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def counts(self) -> dict:
        return {k: int(np.sum(self.labels == k)) for k in (IN, OUT, UNDETERMINED)}


def three_way_labels(tau, lower, upper) -> np.ndarray:
    """IN where ``tau >= upper``, OUT where ``tau <= lower``; a point that
    meets both (only possible when ``lower == upper == tau``) is
    UNDETERMINED, as is everything in between."""
    tau, lower, upper = (np.asarray(a, dtype=float) for a in (tau, lower, upper))
    is_in = tau >= upper
    is_out = tau <= lower
    labels = np.full(tau.shape, UNDETERMINED, dtype=object)
    labels[is_in & ~is_out] = IN
    labels[is_out & ~is_in] = OUT
    return labels


def three_way(cutoffs, model, statistic, x_obs, beta: float | None = None) -> ThreeWayReport:
    """Three-way decomposition of the grid of ``cutoffs`` (which must carry
    ``lower`` and ``upper`` bounds)."""
    if cutoffs.lower is None or cutoffs.upper is None:
        raise ValueError("cutoff bounds are missing; compute them with cutoff_bounds first")
    x = np.asarray(x_obs, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    tau = statistic.evaluate(model, x[None], cutoffs.grid)
    labels = three_way_labels(tau, cutoffs.lower, cutoffs.upper)
    return ThreeWayReport(cutoffs.grid, labels, beta if beta is not None else cutoffs.meta.get("beta", np.nan),
                          tau, cutoffs.lower, cutoffs.upper)
