"""Test statistics and the posterior engines behind the Bayesian ones.

All statistics are oriented so that larger values mean "more plausible":
the confidence set is always ``{theta : tau(x, theta) >= C_theta}``. KS and
Waldo, which are natively large for implausible values, are negated by
:class:`StatisticSpec`. The raw functions (:func:`ks_statistic`,
:func:`waldo_statistic`) return the textbook, non-negated values.

For models with nuisance parameters every statistic depends on the interest
coordinates only: the likelihood ratio is profiled over the nuisance and the
posterior quantities are marginalised.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .models import GammaGLMModel, ModelSpec, NormalModel

__all__ = [
    "STATISTIC_KINDS",
    "StatisticSpec",
    "PosteriorEngine",
    "MLEFailure",
    "DegeneratePosterior",
    "make_statistic",
    "lr_statistic",
    "ks_statistic",
    "bff_statistic",
    "e_value",
    "waldo_statistic",
    "lr_values",
    "ks_values",
    "bff_values",
    "evalue_values",
    "waldo_values",
    "prior_mass_check",
]

STATISTIC_KINDS = ("lr", "ks", "bff", "evalue", "waldo")
_POSTERIOR_KINDS = ("bff", "evalue", "waldo")
_CHUNK_ELEMS = 4_000_000


class MLEFailure(RuntimeError):
    """The likelihood maximisation returned a non-finite value."""


class DegeneratePosterior(RuntimeError):
    """The posterior covariance is singular."""


def _as_rows(a, width):
    a = np.asarray(a, dtype=float)
    return a.reshape(-1, width)


def _broadcast_rows(x, theta0):
    """Align ``N_x`` datasets with ``N`` parameter rows (``N_x`` in {1, N})."""
    if x.shape[0] not in (1, theta0.shape[0]):
        raise ValueError(f"cannot align {x.shape[0]} datasets with {theta0.shape[0]} parameter rows")
    return x if x.shape[0] == theta0.shape[0] else np.broadcast_to(x, (theta0.shape[0],) + x.shape[1:])


def _full_theta(model, theta0):
    if theta0.shape[1] == model.dim:
        return theta0
    if model.has_nuisance:
        raise ValueError(f"{model.name}: full parameter required for this operation")
    raise ValueError("parameter has the wrong dimension")


# ---------------------------------------------------------------------------
# frequentist statistics


def lr_values(model: ModelSpec, x, theta0) -> np.ndarray:
    """Profile log-likelihood ratio ``sup_nu l(mu0, nu) - sup_theta l(theta)``.

    ``theta0`` holds interest coordinates, ``(N, k)``. Always ``<= 0``.
    """
    x = np.asarray(x, dtype=float)
    theta0 = _as_rows(theta0, len(model.interest))
    xb = _broadcast_rows(x, theta0)
    if model.has_nuisance:
        restricted = model.max_loglik(np.ascontiguousarray(xb), fixed=theta0)
    else:
        restricted = model.loglik(xb, theta0)
    full = model.max_loglik(x)
    if x.shape[0] == 1:
        full = np.full(theta0.shape[0], full[0])
    if not (np.all(np.isfinite(full)) and np.all(np.isfinite(restricted))):
        bad = int(np.sum(~np.isfinite(full)) + np.sum(~np.isfinite(restricted)))
        raise MLEFailure(f"{model.name}: {bad} non-finite likelihood maxima")
    # the unrestricted supremum cannot be below any restricted value
    full = np.maximum(full, restricted)
    return restricted - full


def ks_values(model: ModelSpec, x, theta0) -> np.ndarray:
    """One-sample Kolmogorov-Smirnov distance ``D_n`` (not negated)."""
    x = np.asarray(x, dtype=float)
    theta0 = _full_theta(model, _as_rows(theta0, len(model.interest)))
    xb = _broadcast_rows(x, theta0)
    n = x.shape[1]
    F = model.cdf(np.sort(xb, axis=1), theta0)
    i = np.arange(1, n + 1)
    return np.maximum(i / n - F, F - (i - 1) / n).max(axis=1)


def lr_statistic(model: ModelSpec, x, theta0) -> float:
    """Likelihood-ratio statistic for a single ``(n, p)`` dataset."""
    return float(lr_values(model, _single(x), np.atleast_1d(theta0)[None, :])[0])


def ks_statistic(model: ModelSpec, x, theta0) -> float:
    return float(ks_values(model, _single(x), np.atleast_1d(theta0)[None, :])[0])


def _single(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x[None]


# ---------------------------------------------------------------------------
# posteriors


def _simpson_weights(m: int, h: float) -> np.ndarray:
    if m < 3 or m % 2 == 0:
        raise ValueError("Simpson's rule needs an odd number (>= 3) of points")
    w = np.ones(m)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def _cell_mass(x, dens, f0):
    """Per-cell mass of ``{f >= f0}`` under the piecewise-linear
    interpolant of ``dens`` on nodes ``x`` (rows are independent)."""
    fa, fb = dens[:, :-1], dens[:, 1:]
    h = np.diff(x, axis=-1)
    f0 = f0[:, None]
    lo, hi = np.minimum(fa, fb), np.maximum(fa, fb)
    full = lo >= f0
    part = (hi >= f0) & ~full
    span = np.where(hi > lo, hi - lo, 1.0)
    frac = np.clip((hi - f0) / span, 0.0, 1.0)
    return np.where(full, 0.5 * (fa + fb) * h, 0.0) + np.where(part, 0.5 * (hi + f0) * frac * h, 0.0)


def _hpd_mass_1d(grid, dens, f0):
    """Fraction of posterior mass in ``{f >= f0}`` for densities tabulated
    on a 1-d grid."""
    total = (0.5 * (dens[:, :-1] + dens[:, 1:]) * np.diff(grid)[None, :]).sum(axis=1)
    return _cell_mass(grid[None, :], dens, f0).sum(axis=1) / total


class _GaussianPosterior:
    """Closed-form posterior for the Normal model with a Gaussian prior."""

    def __init__(self, model: NormalModel, x):
        x = np.asarray(x, dtype=float)
        n = x.shape[1]
        s = x[:, :, 0].sum(axis=1) if n else np.zeros(x.shape[0])
        v0, m0 = model.prior_var, model.prior_mean
        self.var = np.full(x.shape[0], 1.0 / (1.0 / v0 + n))
        self.mean = self.var * (m0 / v0 + s)
        self.prior_mean, self.prior_var = m0, v0

    def logdensity(self, theta0):
        t = theta0[:, 0]
        return -0.5 * np.log(2 * np.pi * self.var) - 0.5 * (t - self.mean) ** 2 / self.var

    def prior_logdensity(self, theta0):
        t = theta0[:, 0]
        return -0.5 * np.log(2 * np.pi * self.prior_var) - 0.5 * (t - self.prior_mean) ** 2 / self.prior_var

    def evalue(self, theta0):
        z = (theta0[:, 0] - self.mean) / np.sqrt(self.var)
        return 2.0 * special.ndtr(-np.abs(z))

    def moments(self):
        return self.mean[:, None], self.var[:, None, None]


class _Grid1DPosterior:
    """Posterior of a one-parameter model tabulated on a Simpson grid."""

    def __init__(self, model, x, n_points):
        self.model = model
        self.x = np.asarray(x, dtype=float)
        lo, hi = model.bounds[0]
        self.grid = np.linspace(lo, hi, n_points)
        w = _simpson_weights(n_points, self.grid[1] - self.grid[0])
        lj = model.loglik_grid(self.x, self.grid[:, None]) + model.prior_logpdf(self.grid[:, None])[None, :]
        top = lj.max(axis=1, keepdims=True)
        un = np.exp(lj - top)
        z = un @ w
        self.log_norm = top[:, 0] + np.log(z)
        self.dens = un / z[:, None]
        self.weights = w

    def logdensity(self, theta0):
        xb = _broadcast_rows(self.x, theta0)
        lognorm = self.log_norm if self.x.shape[0] == theta0.shape[0] else np.full(theta0.shape[0], self.log_norm[0])
        return self.model.loglik(xb, theta0) + self.model.prior_logpdf(theta0) - lognorm

    def prior_logdensity(self, theta0):
        return self.model.prior_logpdf(theta0)

    def evalue(self, theta0, n_sub=64):
        """Coarse-grid cells that straddle the level ``f(theta0 | x)`` or
        hold a local density peak are re-integrated on a fine sub-grid
        using the exact posterior density; a level set narrower than the
        grid spacing is otherwise missed."""
        f0 = np.exp(self.logdensity(theta0))
        N = theta0.shape[0]
        dens = self.dens if self.dens.shape[0] == N else np.broadcast_to(self.dens, (N, self.dens.shape[1]))
        grid = self.grid
        fa, fb = dens[:, :-1], dens[:, 1:]
        h = grid[1] - grid[0]
        total = (0.5 * (fa + fb) * h).sum(axis=1)
        lo, hi = np.minimum(fa, fb), np.maximum(fa, fb)
        refine = (hi >= f0[:, None]) & (lo < f0[:, None])
        peak = (dens[:, 1:-1] > dens[:, :-2]) & (dens[:, 1:-1] >= dens[:, 2:])
        refine[:, :-1] |= peak
        refine[:, 1:] |= peak
        refine[:, 0] |= dens[:, 0] > dens[:, 1]
        refine[:, -1] |= dens[:, -1] > dens[:, -2]
        coarse = np.where(refine, 0.0, _cell_mass(grid[None, :], dens, f0)).sum(axis=1)
        rows, cells = np.nonzero(refine)
        fine = np.zeros(N)
        if rows.size:
            sub = grid[cells][:, None] + h * np.linspace(0.0, 1.0, n_sub + 1)[None, :]
            xr = self.x[rows] if self.x.shape[0] == N else np.broadcast_to(self.x, (rows.size,) + self.x.shape[1:])
            lognorm = self.log_norm[rows] if self.x.shape[0] == N else self.log_norm[0]
            with np.errstate(under="ignore"):
                logd = (
                    self.model.loglik(xr[:, None], sub[..., None])
                    + self.model.prior_logpdf(sub[..., None])
                    - np.reshape(lognorm, (-1, 1))
                )
                d = np.exp(logd)
            np.add.at(fine, rows, _cell_mass(sub, d, f0[rows]).sum(axis=1))
        return np.clip(1.0 - (coarse + fine) / total, 0.0, 1.0)

    def moments(self):
        m = (self.dens * self.grid) @ self.weights
        v = (self.dens * (self.grid - m[:, None]) ** 2) @ self.weights
        return m[:, None], v[:, None, None]


class _Grid2DPosterior:
    """Joint posterior of a two-parameter model (both of interest)."""

    def __init__(self, model, x, n_points):
        self.model = model
        self.x = np.asarray(x, dtype=float)
        box = model.box
        self.g1 = np.linspace(box[0, 0], box[0, 1], n_points)
        self.g2 = np.linspace(box[1, 0], box[1, 1], n_points)
        w1 = _simpson_weights(n_points, self.g1[1] - self.g1[0])
        w2 = _simpson_weights(n_points, self.g2[1] - self.g2[0])
        self.weights = np.outer(w1, w2).ravel()
        pts = np.stack(np.meshgrid(self.g1, self.g2, indexing="ij"), axis=-1).reshape(-1, 2)
        self.points = pts
        lj = model.loglik_grid(self.x, pts) + model.prior_logpdf(pts)[None, :]
        top = lj.max(axis=1, keepdims=True)
        un = np.exp(lj - top)
        z = un @ self.weights
        self.log_norm = top[:, 0] + np.log(z)
        self.dens = un / z[:, None]

    def logdensity(self, theta0):
        xb = _broadcast_rows(self.x, theta0)
        lognorm = self.log_norm if self.x.shape[0] == theta0.shape[0] else np.full(theta0.shape[0], self.log_norm[0])
        return self.model.loglik(xb, theta0) + self.model.prior_logpdf(theta0) - lognorm

    def prior_logdensity(self, theta0):
        return self.model.prior_logpdf(theta0)

    def evalue(self, theta0):
        f0 = np.exp(self.logdensity(theta0))
        out = np.empty(theta0.shape[0])
        tables = [self._level_table(r) for r in range(self.dens.shape[0])]
        for i in range(theta0.shape[0]):
            levels, mass = tables[i if len(tables) > 1 else 0]
            out[i] = 1.0 - np.interp(f0[i], levels, mass, left=1.0, right=0.0)
        return np.clip(out, 0.0, 1.0)

    def _level_table(self, r):
        """Ascending density levels and the normalised mass at or above each."""
        p = self.dens[r]
        order = np.argsort(p)
        levels = p[order]
        mass_desc = np.cumsum((p * self.weights)[order][::-1])[::-1]
        return levels, mass_desc / mass_desc[0]

    def moments(self):
        m = (self.dens * self.weights) @ self.points
        c = self.points[None, :, :] - m[:, None, :]
        cov = np.einsum("Ng,Ngi,Ngj->Nij", self.dens * self.weights, c, c)
        return m, cov


class _MarginalPosterior:
    """Posterior of the interest coordinate of a two-parameter model with one
    nuisance coordinate, marginalised by 2-d quadrature. Tables live on the
    interest grid; densities between nodes are linearly interpolated.

    ``tables`` holds one row per distinct dataset and ``index`` maps each
    dataset of the batch to its row."""

    def __init__(self, grid, tables, prior_density, index=None):
        self.grid = grid
        self.tables = tables
        self.index = np.arange(len(tables)) if index is None else np.asarray(index)
        self.prior_density = prior_density
        self.weights = _simpson_weights(len(grid), grid[1] - grid[0])

    def _table_rows(self, theta0):
        if len(self.index) == theta0.shape[0]:
            return self.index
        if len(self.index) == 1:
            return np.zeros(theta0.shape[0], dtype=np.int64)
        raise ValueError("cannot align datasets with parameter rows")

    def density(self, theta0):
        t = theta0[:, 0]
        g = self.grid
        h = g[1] - g[0]
        pos = np.clip((t - g[0]) / h, 0.0, len(g) - 1.0)
        j = np.minimum(pos.astype(int), len(g) - 2)
        frac = pos - j
        r = self._table_rows(theta0)
        val = (1.0 - frac) * self.tables[r, j] + frac * self.tables[r, j + 1]
        inside = (t >= g[0]) & (t <= g[-1])
        return np.where(inside, val, 0.0)

    def logdensity(self, theta0):
        with np.errstate(divide="ignore"):
            return np.log(self.density(theta0))

    def prior_logdensity(self, theta0):
        t = theta0[:, 0]
        inside = (t >= self.grid[0]) & (t <= self.grid[-1])
        return np.where(inside, np.log(self.prior_density), -np.inf)

    def evalue(self, theta0):
        f0 = self.density(theta0)
        return np.clip(1.0 - _hpd_mass_1d(self.grid, self.tables[self._table_rows(theta0)], f0), 0.0, 1.0)

    def moments(self):
        m = (self.tables * self.grid) @ self.weights
        v = (self.tables * (self.grid - m[:, None]) ** 2) @ self.weights
        return m[self.index, None], v[self.index, None, None]


@dataclass
class PosteriorEngine:
    """Posterior computations for the Bayesian statistics.

    ``mode`` is one of ``"conjugate"`` (Normal model only),
    ``"quadrature-1d"``, ``"quadrature-2d"`` or ``"auto"``. Quadrature uses
    composite Simpson rules with ``n_points_1d`` nodes (1-d) or
    ``n_points_2d`` nodes per axis (2-d); both must be odd.

    For discrete data the marginal tables of the nuisance case are cached by
    dataset content; the cache is guarded by a lock.
    """

    mode: str = "auto"
    n_points_1d: int = 2049
    n_points_2d: int = 257
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in ("auto", "conjugate", "quadrature-1d", "quadrature-2d"):
            raise ValueError(f"unknown posterior mode {self.mode!r}")

    def resolve_mode(self, model: ModelSpec) -> str:
        if isinstance(model, GammaGLMModel) or model.dim > 2:
            raise NotImplementedError(f"{model.name}: no posterior engine for {model.dim} parameters")
        if self.mode == "conjugate":
            if not isinstance(model, NormalModel):
                raise ValueError("conjugate mode is only available for the Normal model")
            return self.mode
        if self.mode != "auto":
            want = "quadrature-1d" if model.dim == 1 else "quadrature-2d"
            if self.mode != want:
                raise ValueError(f"{model.name} needs {want}")
            return self.mode
        if isinstance(model, NormalModel):
            return "conjugate"
        return "quadrature-1d" if model.dim == 1 else "quadrature-2d"

    def chunk_rows(self, model) -> int:
        mode = self.resolve_mode(model)
        if mode == "conjugate":
            return 1 << 20
        if mode == "quadrature-1d":
            return max(1, _CHUNK_ELEMS // self.n_points_1d)
        if model.has_nuisance:
            return 1 << 20
        return max(1, _CHUNK_ELEMS // self.n_points_2d ** 2)

    def posterior(self, model: ModelSpec, x):
        """Posterior object for a batch of datasets ``(N, n, p)``."""
        x = np.asarray(x, dtype=float)
        mode = self.resolve_mode(model)
        if mode == "conjugate":
            return _GaussianPosterior(model, x)
        if mode == "quadrature-1d":
            return _Grid1DPosterior(model, x, self.n_points_1d)
        if model.has_nuisance:
            return self._marginal(model, x)
        return _Grid2DPosterior(model, x, self.n_points_2d)

    def _marginal(self, model, x):
        (j,) = model.interest
        (k,) = model.nuisance
        box = model.box
        gi = np.linspace(box[j, 0], box[j, 1], self.n_points_2d)
        gn = np.linspace(box[k, 0], box[k, 1], self.n_points_2d)
        prior_density = 1.0 / (box[j, 1] - box[j, 0])
        if not model.discrete:
            return _MarginalPosterior(gi, self._marginal_tables(model, x, gi, gn, j, k), prior_density)
        # discrete data repeat a lot: tabulate each distinct dataset once and
        # keep the tables across calls
        flat = np.ascontiguousarray(x).reshape(x.shape[0], -1)
        rows = flat.view(np.dtype((np.void, flat.dtype.itemsize * flat.shape[1]))).ravel()
        uniq, first, inverse = np.unique(rows, return_index=True, return_inverse=True)
        keys = [(model, u.tobytes()) for u in uniq]
        with self._lock:
            found = [self._cache.get(key) for key in keys]
        missing = [i for i, t in enumerate(found) if t is None]
        if missing:
            new = self._marginal_tables(model, x[first[missing]], gi, gn, j, k)
            with self._lock:
                for i, t in zip(missing, new):
                    self._cache[keys[i]] = t
                    found[i] = t
        return _MarginalPosterior(gi, np.stack(found), prior_density, inverse.ravel())

    def _marginal_tables(self, model, x, gi, gn, j, k):
        pts = np.empty((len(gi), len(gn), model.dim))
        pts[:, :, j] = gi[:, None]
        pts[:, :, k] = gn[None, :]
        pts = pts.reshape(-1, model.dim)
        wi = _simpson_weights(len(gi), gi[1] - gi[0])
        wn = _simpson_weights(len(gn), gn[1] - gn[0])
        logprior = model.prior_logpdf(pts).reshape(len(gi), len(gn))
        out = np.empty((x.shape[0], len(gi)))
        step = max(1, _CHUNK_ELEMS // pts.shape[0])
        for s in range(0, x.shape[0], step):
            lj = model.loglik_grid(x[s:s + step], pts).reshape(-1, len(gi), len(gn)) + logprior
            top = lj.max(axis=(1, 2), keepdims=True)
            marg = np.exp(lj - top) @ wn
            out[s:s + step] = marg / (marg @ wi)[:, None]
        return out


def _posterior_batches(engine, model, x, theta0):
    """Yield (row slice, posterior, theta rows) in memory-bounded chunks."""
    if x.shape[0] == 1:
        yield slice(0, theta0.shape[0]), engine.posterior(model, x), theta0
        return
    step = engine.chunk_rows(model)
    for s in range(0, theta0.shape[0], step):
        sl = slice(s, min(s + step, theta0.shape[0]))
        yield sl, engine.posterior(model, x[sl]), theta0[sl]


def bff_values(engine, model, x, theta0, return_flags=False):
    """Bayes-frequentist factor ``f(theta0 | x) / pi(theta0)``.

    Posterior underflow yields 0 (flagged), never NaN.
    """
    x = np.asarray(x, dtype=float)
    theta0 = _as_rows(theta0, len(model.interest))
    out = np.empty(theta0.shape[0])
    for sl, post, th in _posterior_batches(engine, model, x, theta0):
        lp = post.logdensity(th)
        lprior = post.prior_logdensity(th)
        if np.any(~np.isfinite(lprior)):
            raise ValueError("prior density must be positive at theta0")
        with np.errstate(over="ignore", invalid="ignore"):
            out[sl] = np.exp(lp - lprior)
    flags = ~np.isfinite(out) | (out == 0.0)
    out = np.where(np.isfinite(out), out, 0.0)
    return (out, flags) if return_flags else out


def evalue_values(engine, model, x, theta0):
    x = np.asarray(x, dtype=float)
    theta0 = _as_rows(theta0, len(model.interest))
    out = np.empty(theta0.shape[0])
    for sl, post, th in _posterior_batches(engine, model, x, theta0):
        out[sl] = post.evalue(th)
    return out


def waldo_values(engine, model, x, theta0):
    """Waldo statistic (not negated)."""
    x = np.asarray(x, dtype=float)
    theta0 = _as_rows(theta0, len(model.interest))
    out = np.empty(theta0.shape[0])
    for sl, post, th in _posterior_batches(engine, model, x, theta0):
        mean, cov = post.moments()
        if mean.shape[0] == 1 and th.shape[0] > 1:
            mean = np.broadcast_to(mean, th.shape)
            cov = np.broadcast_to(cov, (th.shape[0],) + cov.shape[1:])
        if np.any(np.linalg.det(cov) <= 0):
            raise DegeneratePosterior("posterior covariance is singular")
        diff = mean - th
        out[sl] = np.einsum("Ni,Ni->N", diff, np.linalg.solve(cov, diff[..., None])[..., 0])
    return out


def bff_statistic(engine, model, x, theta0) -> float:
    return float(bff_values(engine, model, _single(x), np.atleast_1d(theta0)[None, :])[0])


def e_value(engine, model, x, theta0) -> float:
    return float(evalue_values(engine, model, _single(x), np.atleast_1d(theta0)[None, :])[0])


def waldo_statistic(engine, model, x, theta0) -> float:
    return float(waldo_values(engine, model, _single(x), np.atleast_1d(theta0)[None, :])[0])


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StatisticSpec:
    """A named statistic with a fixed orientation (larger = more plausible)."""

    kind: str
    engine: PosteriorEngine | None = None

    def __post_init__(self):
        if self.kind not in STATISTIC_KINDS:
            raise ValueError(f"unknown statistic {self.kind!r}; choose from {STATISTIC_KINDS}")
        if self.kind in _POSTERIOR_KINDS and self.engine is None:
            object.__setattr__(self, "engine", PosteriorEngine())

    @property
    def direction(self) -> int:
        return -1 if self.kind in ("ks", "waldo") else 1

    def evaluate(self, model: ModelSpec, x, theta0) -> np.ndarray:
        """Oriented statistic for datasets ``x`` ``(N_x, n, p)`` at interest
        values ``theta0`` ``(N, k)``; ``N_x`` is either 1 or ``N``."""
        x = np.asarray(x, dtype=float)
        if self.kind == "lr":
            raw = lr_values(model, x, theta0)
        elif self.kind == "ks":
            raw = ks_values(model, x, theta0)
        elif self.kind == "bff":
            raw = bff_values(self.engine, model, x, theta0)
        elif self.kind == "evalue":
            raw = evalue_values(self.engine, model, x, theta0)
        else:
            raw = waldo_values(self.engine, model, x, theta0)
        return self.direction * raw

    def __call__(self, model, x, theta0):
        return self.evaluate(model, x, theta0)


def make_statistic(name: str, engine: PosteriorEngine | None = None, **engine_options) -> StatisticSpec:
    if name in _POSTERIOR_KINDS and engine is None:
        engine = PosteriorEngine(**engine_options)
    return StatisticSpec(name, engine if name in _POSTERIOR_KINDS else None)


def prior_mass_check(model: ModelSpec, n_points: int = 2049) -> float:
    """Integral of the box-truncated prior over the box (should be 1)."""
    box = model.box
    if model.dim == 1:
        g = np.linspace(box[0, 0], box[0, 1], n_points)
        return float(integrate.simpson(np.exp(model.prior_logpdf(g[:, None])), x=g))
    if model.dim == 2:
        g1 = np.linspace(box[0, 0], box[0, 1], 257)
        g2 = np.linspace(box[1, 0], box[1, 1], 257)
        pts = np.stack(np.meshgrid(g1, g2, indexing="ij"), axis=-1)
        vals = np.exp(model.prior_logpdf(pts))
        return float(integrate.simpson(integrate.simpson(vals, x=g2, axis=1), x=g1))
    raise NotImplementedError("prior mass check is implemented for d <= 2")
