"""Cutoffs for parameters of interest in the presence of nuisance parameters.

The cutoff at ``mu`` is the minimum over nuisance values ``nu`` of the local
cutoff at ``(mu, nu)``. For a tree partition the minimum only needs one
nuisance value per elementary interval between split thresholds, so the
search runs over the finite grid

    G = {a - eps, a + eps : a a split threshold on a nuisance coordinate}

taken per nuisance coordinate (Cartesian product over coordinates), with
``eps`` one third of the smallest gap between distinct thresholds.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .calibration import CalibratedCutoffs, _as_points
from .uncertainty import cutoff_bounds

__all__ = ["NuisanceGrid", "build_nuisance_grid", "nuisance_cutoff", "nuisance_cutoff_bounds", "expand_points"]


@dataclass(frozen=True)
class NuisanceGrid:
    """Candidate nuisance values.

    ``dims`` are the nuisance coordinates, ``values[i]`` the candidate
    values for ``dims[i]``, ``eps[i]`` the perturbation used there and
    ``thresholds[i]`` the harvested split thresholds.
    """

    dims: tuple
    values: tuple
    eps: tuple
    thresholds: tuple

    @property
    def points(self) -> np.ndarray:
        """Cartesian product of the per-coordinate values, ``(|G|, len(dims))``."""
        return np.array(list(itertools.product(*self.values)), dtype=float).reshape(-1, len(self.dims))

    def __len__(self):
        return int(np.prod([len(v) for v in self.values]))


def _thin(thresholds: np.ndarray, max_per_dim: int | None) -> np.ndarray:
    """Evenly spaced order statistics of ``thresholds``."""
    if max_per_dim is None or len(thresholds) <= max_per_dim:
        return thresholds
    idx = np.unique(np.round(np.linspace(0, len(thresholds) - 1, max_per_dim)).astype(int))
    return thresholds[idx]


def _shallowest(partitioner, d: int, max_per_dim: int | None) -> np.ndarray:
    """Distinct thresholds on coordinate ``d``, keeping at most
    ``max_per_dim`` of them: shallower splits first (smallest depth at
    which a threshold occurs in any tree); the deepest level kept is
    thinned to evenly spaced order statistics."""
    trees = getattr(partitioner, "trees", [partitioner])
    best = {}
    for t in trees:
        on_d = t.feature == d
        for thr, dep in zip(t.threshold[on_d].tolist(), t.depth[on_d].tolist()):
            if thr not in best or dep < best[thr]:
                best[thr] = dep
    if not best:
        return np.empty(0)
    thr = np.array(sorted(best))
    dep = np.array([best[v] for v in thr])
    if max_per_dim is None or len(thr) <= max_per_dim:
        return thr
    keep = []
    for level in np.unique(dep):
        at = thr[dep == level]
        room = max_per_dim - len(keep)
        if len(at) <= room:
            keep.extend(at.tolist())
        else:
            keep.extend(_thin(at, room).tolist())
            break
    return np.unique(keep)


def _values_for_dim(thresholds, lo, hi):
    a = np.unique(np.asarray(thresholds, dtype=float))
    if a.size == 0:
        return np.array([0.5 * (lo + hi)]), 0.0
    if a.size == 1:
        # one threshold: no pairwise gap, use the distance to the box edges
        eps = min(a[0] - lo, hi - a[0]) / 3.0
    else:
        eps = float(np.min(np.diff(a))) / 3.0
    vals = np.clip(np.concatenate([a - eps, a + eps]), lo, hi)
    return np.unique(vals), eps


def build_nuisance_grid(partitioner, nuisance_dims, box, depth_limit: int | None = None,
                        max_per_dim: int | None = None) -> NuisanceGrid:
    """Harvest nuisance split thresholds from a tree or a forest.

    Parameters
    ----------
    partitioner : RegressionTree or Forest
    nuisance_dims : sequence of int
    box : (d, 2) array
        Full parameter box; candidate values are clamped to it.
    depth_limit : int, optional
        Keep only splits at depth ``< depth_limit``.
    max_per_dim : int, optional
        Keep at most this many thresholds per coordinate, preferring splits
        closer to the root. Bounds the size of the grid for forests, whose
        thresholds are unioned across trees.
    """
    dims = tuple(int(d) for d in nuisance_dims)
    if not dims:
        raise ValueError("nuisance_dims must be nonempty")
    box = np.asarray(box, dtype=float)
    if hasattr(partitioner, "split_values"):
        pairs = partitioner.split_values(dims, depth_limit)
    else:
        pairs = partitioner.splits(dims, depth_limit)
    values, eps, thresholds = [], [], []
    for d in dims:
        a = np.unique([t for dd, t in pairs if dd == d])
        if max_per_dim is not None and len(a) > max_per_dim:
            a = _shallowest(partitioner, d, max_per_dim)
            if depth_limit is not None:
                a = a[np.isin(a, [t for dd, t in pairs if dd == d])]
        v, e = _values_for_dim(a, box[d, 0], box[d, 1])
        values.append(tuple(v.tolist()))
        eps.append(e)
        thresholds.append(tuple(a.tolist()))
    return NuisanceGrid(dims, tuple(values), tuple(eps), tuple(thresholds))


def expand_points(mu_grid, nu_points, interest, nuisance, dim) -> np.ndarray:
    """All ``(mu, nu)`` combinations as full parameter rows, mu-major."""
    mu_grid = _as_points(mu_grid)
    nu_points = _as_points(nu_points)
    G, V = len(mu_grid), len(nu_points)
    full = np.empty((G, V, dim))
    full[:, :, list(interest)] = mu_grid[:, None, :]
    full[:, :, list(nuisance)] = nu_points[None, :, :]
    return full.reshape(G * V, dim)


def nuisance_cutoff(calibrator, mu_grid, grid, alpha: float, interest, dim: int,
                    nu_points=None) -> CalibratedCutoffs:
    """Minimum over nuisance candidates of the local cutoff at each ``mu``.

    ``nu_points`` overrides the candidate set (for example a dense grid
    used as a reference). The nuisance value attaining the minimum (the
    first one in candidate order on ties) is stored in ``nuisance_argmin``;
    ``m`` is the neighborhood size there.
    """
    mu_grid = _as_points(mu_grid)
    nu = grid.points if nu_points is None else _as_points(nu_points)
    full = expand_points(mu_grid, nu, interest, grid.dims, dim)
    res = calibrator.cutoffs(full, alpha)
    cut = res.cutoff.reshape(len(mu_grid), len(nu))
    m = res.m.reshape(len(mu_grid), len(nu))
    k = np.argmin(cut, axis=1)
    rows = np.arange(len(mu_grid))
    return CalibratedCutoffs(
        mu_grid, cut[rows, k], m[rows, k], res.method, alpha,
        nuisance_argmin=nu[k], meta=dict(res.meta, n_nuisance=len(nu)),
    )


def nuisance_cutoff_bounds(calibrator, cutoffs: CalibratedCutoffs, interest, nuisance, dim, alpha, beta):
    """Cutoff bounds from the neighborhood at the minimising nuisance value;
    fills ``cutoffs.lower`` and ``cutoffs.upper`` in place."""
    full = np.empty((len(cutoffs.grid), dim))
    full[:, list(interest)] = cutoffs.grid
    full[:, list(nuisance)] = cutoffs.nuisance_argmin
    lower, upper = cutoff_bounds(calibrator.neighborhood_values(full), alpha, beta)
    cutoffs.lower, cutoffs.upper = lower, upper
    cutoffs.meta["beta"] = beta
    return cutoffs
