"""Coverage estimation and the error metrics used to compare methods.

Coverage at a parameter point ``theta'`` is the fraction of fresh datasets
simulated at ``theta'`` whose statistic clears the method's cutoff. The
same simulated statistics are reused for every method evaluated at that
point, which removes simulation noise from between-method comparisons.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._seeding import derive_rng, derive_seed
from .calibration import _as_points

__all__ = [
    "CoverageTable",
    "ExperimentResult",
    "GridMisalignment",
    "simulate_tau",
    "estimate_coverage",
    "coverage_from_tau",
    "mae",
    "oracle_deviation",
    "replicate_summary",
    "evaluation_points",
]

_ROWS_PER_BATCH = 200_000


class GridMisalignment(ValueError):
    pass


def simulate_tau(model, statistic, points, n: int, n_sim: int, seed) -> np.ndarray:
    """``(G, n_sim)`` oriented statistics ``tau(X, theta_g)`` with
    ``X ~ theta_g``. ``points`` are full parameter rows; point ``g`` uses
    its own stream ``derive_seed(seed, g)``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    G = len(points)
    interest = list(model.interest)
    out = np.empty((G, n_sim))
    per_batch = max(1, _ROWS_PER_BATCH // max(n_sim, 1))
    for s in range(0, G, per_batch):
        block = points[s:s + per_batch]
        xs = [model.simulate(np.repeat(p[None], n_sim, axis=0), n, derive_rng(seed, s + i)) for i, p in enumerate(block)]
        x = np.concatenate(xs, axis=0)
        theta0 = np.repeat(block[:, interest], n_sim, axis=0)
        out[s:s + len(block)] = statistic.evaluate(model, x, theta0).reshape(len(block), n_sim)
    return out


@dataclass
class CoverageTable:
    grid: np.ndarray
    coverage: np.ndarray
    n_sim: int
    method: str = ""

    def __post_init__(self):
        self.grid = _as_points(self.grid)
        self.coverage = np.asarray(self.coverage, dtype=float)
        if len(self.grid) != len(self.coverage):
            raise ValueError("grid and coverage lengths differ")

    def __len__(self):
        return len(self.coverage)


def coverage_from_tau(taus: np.ndarray, cutoff, grid, method: str = "") -> CoverageTable:
    """Coverage with precomputed statistics ``taus`` ``(G, n_sim)``; a
    ``-inf`` cutoff covers every draw."""
    cutoff = np.asarray(cutoff, dtype=float)
    successes = np.sum(taus >= cutoff[:, None], axis=1)
    return CoverageTable(grid, successes / taus.shape[1], taus.shape[1], method)


def estimate_coverage(cutoffs, model, statistic, n: int, n_sim: int, seed, points=None) -> CoverageTable:
    """Estimate coverage of ``cutoffs`` at its grid points.

    ``points`` gives the full parameter rows to simulate at when the cutoff
    grid only holds interest coordinates (nuisance models); row ``g`` of
    ``points`` is scored against cutoff ``g``.
    """
    if n_sim < 1:
        raise ValueError("n_sim must be >= 1")
    pts = cutoffs.grid if points is None else np.atleast_2d(points)
    if len(pts) != len(cutoffs.cutoff):
        raise GridMisalignment("points and cutoffs differ in length")
    taus = simulate_tau(model, statistic, pts, n, n_sim, seed)
    return coverage_from_tau(taus, cutoffs.cutoff, pts, cutoffs.method)


def mae(table: CoverageTable, alpha: float) -> float:
    """Mean absolute deviation of coverage from ``1 - alpha``."""
    if len(table) == 0:
        raise ValueError("empty coverage table")
    return float(np.mean(np.abs(table.coverage - (1.0 - alpha))))


def oracle_deviation(table: CoverageTable, oracle: CoverageTable) -> float:
    """Mean absolute difference between a method's and the oracle's
    per-point coverage."""
    if table.grid.shape != oracle.grid.shape or not np.array_equal(table.grid, oracle.grid):
        raise GridMisalignment("coverage tables are not on the same grid")
    return float(np.mean(np.abs(table.coverage - oracle.coverage)))


@dataclass
class ExperimentResult:
    method: str
    model: str
    statistic: str
    n: int
    B: int
    replicate: int
    mae: float = math.nan
    d_alpha: float = math.nan
    wall_time: float = 0.0
    error: str = ""
    extra: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = asdict(self)
        extra = row.pop("extra")
        row.update({f"extra_{k}": v for k, v in extra.items()})
        return row


def replicate_summary(results, metric: str = "mae") -> list:
    """Mean and standard error (sd / sqrt(reps)) of ``metric`` per
    (model, statistic, n, B, method) cell, plus a ``best`` flag for every
    method whose mean lies within two standard errors of the lowest mean
    in its (model, statistic, n, B) group. Failed replicates (non-empty
    ``error``) are excluded."""
    cells = {}
    for r in results:
        if r.error:
            continue
        value = getattr(r, metric)
        if value is None or not np.isfinite(value):
            continue
        cells.setdefault((r.model, r.statistic, r.n, r.B, r.method), []).append(value)
    rows = []
    for (model, stat, n, B, method), vals in sorted(cells.items()):
        v = np.asarray(vals, dtype=float)
        se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan
        rows.append(dict(model=model, statistic=stat, n=n, B=B, method=method,
                         mean=float(v.mean()), se=se, reps=len(v), best=False))
    groups = {}
    for row in rows:
        groups.setdefault((row["model"], row["statistic"], row["n"], row["B"]), []).append(row)
    for group in groups.values():
        lead = min(group, key=lambda r: r["mean"])
        lead_se = 0.0 if math.isnan(lead["se"]) else lead["se"]
        for row in group:
            se = 0.0 if math.isnan(row["se"]) else row["se"]
            # overlapping mean +/- 2 SE intervals
            row["best"] = row is lead or row["mean"] - 2.0 * se <= lead["mean"] + 2.0 * lead_se
    return rows


def evaluation_points(model, per_dim: int = 100, nu_per_mu: int = 1, seed=0) -> np.ndarray:
    """Full parameter rows at which coverage is measured.

    Without nuisance parameters this is a product grid with ``per_dim``
    points per coordinate spanning the box. With nuisance parameters the
    interest coordinates form the product grid and each grid value is
    paired with ``nu_per_mu`` nuisance values drawn from the reference
    distribution.
    """
    box = model.box
    interest = list(model.interest)
    axes = [np.linspace(box[j, 0], box[j, 1], per_dim) for j in interest]
    mu = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(interest), -1).T
    if not model.has_nuisance:
        return mu
    draws = model.sample_reference(len(mu) * nu_per_mu, derive_seed(seed, "eval-nuisance"))
    pts = np.repeat(mu, nu_per_mu, axis=0)
    full = draws.copy()
    full[:, interest] = pts
    return full
