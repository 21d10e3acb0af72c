"""Reference cutoffs: Monte Carlo grid, asymptotic and oracle.

* Monte Carlo: simulate ``n_MC`` statistics at each node of an equally
  spaced grid over the box (``ceil((B / n_MC) ** (1/d))`` nodes per
  coordinate, endpoints included) and use the adjusted quantile at the
  node nearest to each evaluation point. Equidistant nodes resolve to the
  lexicographically lowest one.
* Asymptotic: cutoffs from the limiting null distribution.
* Oracle: the empirical alpha-quantile of a large fresh sample at the
  point itself; with nuisance parameters, the minimum of that over a
  nuisance grid.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._seeding import derive_seed
from .calibration import CalibratedCutoffs, _as_points, quantile_rank
from .evaluation import simulate_tau
from .special import chi2_ppf, kolmogorov_ppf

__all__ = [
    "McGrid",
    "NoAsymptotic",
    "mc_nodes_per_dim",
    "fit_mc",
    "mc_cutoffs",
    "asymptotic_cutoff",
    "oracle_cutoff",
    "oracle_cutoffs",
    "empirical_quantile",
]


class NoAsymptotic(ValueError):
    pass


def mc_nodes_per_dim(B: int, n_mc: int, d: int) -> int:
    if B < n_mc:
        raise ValueError("B must be at least n_MC")
    # rounding guard so that e.g. (100) ** (1/2) does not become 10.000000000000002
    return int(math.ceil(round((B / n_mc) ** (1.0 / d), 9)))


@dataclass
class McGrid:
    """Monte Carlo node grid with per-node cutoffs."""

    axes: tuple
    nodes: np.ndarray
    cutoff: np.ndarray
    n_mc: int
    interest: tuple
    nuisance: tuple

    def nearest(self, points) -> np.ndarray:
        """Index of the nearest node (Euclidean); the first node in
        lexicographic order wins ties."""
        points = _as_points(points)
        d2 = ((points[:, None, :] - self.nodes[None, :, :]) ** 2).sum(axis=2)
        return np.argmin(d2, axis=1)

    def cutoffs_at(self, points, alpha, full: bool = False) -> CalibratedCutoffs:
        """Cutoffs at parameter points.

        Without nuisance parameters, or with ``full=True``, ``points`` are
        full parameter rows and each inherits its nearest node's cutoff.
        Otherwise ``points`` are interest values and the cutoff is the
        minimum over the nuisance nodes sharing the nearest interest node.
        """
        points = _as_points(points)
        if not self.nuisance or full:
            k = self.nearest(points)
            return CalibratedCutoffs(points, self.cutoff[k], np.full(len(points), self.n_mc), "MC", alpha)
        interest = list(self.interest)
        mu_nodes = np.array(list(itertools.product(*[self.axes[j] for j in interest])))
        d2 = ((points[:, None, :] - mu_nodes[None, :, :]) ** 2).sum(axis=2)
        k = np.argmin(d2, axis=1)
        out = np.empty(len(points))
        argmin = np.empty((len(points), len(self.nuisance)))
        for i, kk in enumerate(k):
            rows = np.all(self.nodes[:, interest] == mu_nodes[kk], axis=1)
            j = np.argmin(self.cutoff[rows])
            out[i] = self.cutoff[rows][j]
            argmin[i] = self.nodes[rows][j][list(self.nuisance)]
        return CalibratedCutoffs(points, out, np.full(len(points), self.n_mc), "MC", alpha, nuisance_argmin=argmin)


def fit_mc(model, statistic, alpha: float, B: int, n: int, n_mc: int = 500, seed=0) -> McGrid:
    box = model.box
    per = mc_nodes_per_dim(B, n_mc, model.dim)
    axes = tuple(np.linspace(box[j, 0], box[j, 1], per) for j in range(model.dim))
    nodes = np.array(list(itertools.product(*axes)), dtype=float)
    taus = np.sort(simulate_tau(model, statistic, nodes, n, n_mc, derive_seed(seed, "mc")), axis=1)
    c = int(quantile_rank(n_mc, alpha))
    cutoff = np.full(len(nodes), -np.inf) if c == 0 else taus[:, c - 1]
    return McGrid(axes, nodes, cutoff, n_mc, tuple(model.interest), tuple(model.nuisance))


def mc_cutoffs(model, statistic, alpha: float, B: int, n_mc: int, eval_points, seed, n: int) -> CalibratedCutoffs:
    return fit_mc(model, statistic, alpha, B, n, n_mc, seed).cutoffs_at(eval_points, alpha)


def asymptotic_cutoff(kind: str, alpha: float, n: int | None = None, df: int = 1) -> float:
    """Cutoff on the oriented statistic from its limiting distribution.

    ``lr``: ``-2 LR -> chi2_df``; ``waldo``: ``Waldo -> chi2_df``;
    ``ks``: ``sqrt(n) D_n -> Kolmogorov``; ``evalue``: the e-value is
    asymptotically uniform, cutoff ``alpha``. ``df`` is the number of
    parameters of interest.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if kind == "lr":
        return -chi2_ppf(1.0 - alpha, df) / 2.0
    if kind == "waldo":
        return -chi2_ppf(1.0 - alpha, df)
    if kind == "ks":
        if not n:
            raise ValueError("the KS cutoff needs the sample size n")
        return -kolmogorov_ppf(1.0 - alpha) / math.sqrt(n)
    if kind == "evalue":
        return alpha
    raise NoAsymptotic(f"no asymptotic cutoff available for statistic {kind!r}")


def empirical_quantile(values, alpha: float) -> float:
    """Inverse empirical CDF: smallest ``t`` with ``F_N(t) >= alpha``."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    k = max(int(math.ceil(alpha * len(v) - 1e-12)), 1)
    return float(v[k - 1])


def oracle_cutoff(model, statistic, theta, alpha: float, n: int, n_oracle: int = 100_000, seed=0) -> float:
    """Empirical alpha-quantile of ``n_oracle`` fresh statistics at ``theta``."""
    theta = np.asarray(theta, dtype=float).reshape(1, -1)
    return empirical_quantile(simulate_tau(model, statistic, theta, n, n_oracle, seed)[0], alpha)


def oracle_cutoffs(model, statistic, mu_points, alpha: float, n: int, n_oracle: int = 100_000, seed=0,
                   nu_per_dim=50, invariant_dims=()) -> CalibratedCutoffs:
    """Oracle cutoffs at interest values ``mu_points``.

    Without nuisance parameters, ``mu_points`` are full parameters. With
    nuisance parameters the cutoff is the minimum over a grid of nuisance
    values (cell centres of ``nu_per_dim`` equal cells per coordinate;
    ``nu_per_dim`` may be a per-coordinate sequence).

    ``invariant_dims`` lists coordinates (interest or nuisance) on which
    the statistic's distribution is known not to depend; they are pinned
    to the box centre and the simulations are shared, so each distinct
    reduced point is simulated once.
    """
    mu_points = _as_points(mu_points)
    box = model.box
    interest, nuisance = list(model.interest), list(model.nuisance)
    invariant = set(int(i) for i in invariant_dims)
    centre = box.mean(axis=1)
    if nuisance:
        per = [nu_per_dim] * len(nuisance) if np.isscalar(nu_per_dim) else list(nu_per_dim)
        axes = []
        for j, k in zip(nuisance, per):
            if j in invariant:
                axes.append(np.array([centre[j]]))
            else:
                edges = np.linspace(box[j, 0], box[j, 1], int(k) + 1)
                axes.append(0.5 * (edges[:-1] + edges[1:]))
        nu = np.array(list(itertools.product(*axes)), dtype=float)
    else:
        nu = np.empty((1, 0))
    full = np.empty((len(mu_points), len(nu), model.dim))
    full[:, :, interest] = mu_points[:, None, :]
    if nuisance:
        full[:, :, nuisance] = nu[None, :, :]
    full = full.reshape(-1, model.dim)
    for j in invariant:
        full[:, j] = centre[j]
    uniq, inverse = np.unique(full, axis=0, return_inverse=True)
    k = max(int(math.ceil(alpha * n_oracle - 1e-12)), 1)
    quant = np.empty(len(uniq))
    step = max(1, 4_000_000 // n_oracle)
    oracle_seed = derive_seed(seed, "oracle")
    for s in range(0, len(uniq), step):
        # point g keeps stream (seed, "oracle", g) whatever the chunking
        block = uniq[s:s + step]
        taus = np.stack([simulate_tau(model, statistic, p[None], n, n_oracle, derive_seed(oracle_seed, s + i))[0]
                         for i, p in enumerate(block)])
        quant[s:s + len(block)] = np.partition(taus, k - 1, axis=1)[:, k - 1]
    per_point = quant[inverse.ravel()].reshape(len(mu_points), len(nu))
    j = np.argmin(per_point, axis=1)
    rows = np.arange(len(mu_points))
    return CalibratedCutoffs(
        mu_points, per_point[rows, j], np.full(len(mu_points), n_oracle), "oracle", alpha,
        nuisance_argmin=nu[j] if nuisance else None,
    )
