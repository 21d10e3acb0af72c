"""Statistical models: parameter boxes, reference/prior samplers, simulators
and log-likelihoods.

Arrays follow one layout everywhere:

* parameters ``theta``: ``(N, d)``
* datasets ``x``: ``(N, n, p)`` with ``p`` the per-observation dimension

Each model distinguishes two distributions over the parameter box. The
*reference* distribution generates calibration parameters; the *prior* is
also used by posterior-based statistics. The reference defaults to the
(box-truncated) prior for the tractable models and the GLM, and to the
uniform distribution for the Poisson counting model, whose prior is
uniform; ``reference="uniform"`` switches any model to the uniform box
distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from ._seeding import as_rng

__all__ = [
    "ModelSpec",
    "NormalModel",
    "GMMModel",
    "LognormalModel",
    "PoissonCountingModel",
    "GammaGLMModel",
    "LikelihoodUnavailable",
    "MODEL_REGISTRY",
    "make_model",
    "sample_reference",
    "simulate",
    "loglik",
]

_LOG_2PI = math.log(2.0 * math.pi)
# Cap on elements materialised at once by grid likelihood evaluations.
_CHUNK_ELEMS = 4_000_000


class LikelihoodUnavailable(RuntimeError):
    """Raised when a model has no tractable likelihood (or CDF)."""


def _golden_max(f, lo, hi, iters=80):
    """Vectorised golden-section maximisation of ``f`` on ``[lo, hi]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo.copy(), hi.copy()
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - invphi * (b - a)
        new_d = a + invphi * (b - a)
        # reuse the surviving interior point
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        fc_next = np.where(left, np.nan, fd)
        fd_next = np.where(left, fc, np.nan)
        need_c = np.isnan(fc_next)
        need_d = np.isnan(fd_next)
        if need_c.any():
            fc_next = np.where(need_c, f(c_next), fc_next)
        if need_d.any():
            fd_next = np.where(need_d, f(d_next), fd_next)
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
    mid = 0.5 * (a + b)
    return mid, f(mid)


@dataclass(frozen=True)
class ModelSpec:
    """Base class. Subclasses implement ``_simulate``, ``_obs_loglik`` and
    the prior."""

    name: str = "model"
    bounds: tuple = ((0.0, 1.0),)
    param_names: tuple = ("theta",)
    interest: tuple | None = None
    reference: str = "uniform"
    obs_dim: int = 1
    discrete: bool = False
    tractable: bool = True

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b.ndim != 2 or b.shape[1] != 2 or np.any(b[:, 0] >= b[:, 1]):
            raise ValueError(f"invalid parameter box {self.bounds!r}")
        if len(self.param_names) != b.shape[0]:
            raise ValueError("param_names must match the box dimension")
        interest = tuple(range(b.shape[0])) if self.interest is None else tuple(self.interest)
        if not interest or len(set(interest)) != len(interest) or not set(interest) <= set(range(b.shape[0])):
            raise ValueError(f"invalid interest indices {self.interest!r}")
        object.__setattr__(self, "interest", interest)
        object.__setattr__(self, "bounds", tuple(tuple(map(float, r)) for r in b))
        if self.reference not in ("uniform", "prior"):
            raise ValueError("reference must be 'uniform' or 'prior'")

    # -- geometry -----------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def box(self) -> np.ndarray:
        return np.asarray(self.bounds, dtype=float)

    @property
    def nuisance(self) -> tuple:
        return tuple(i for i in range(self.dim) if i not in self.interest)

    @property
    def has_nuisance(self) -> bool:
        return len(self.nuisance) > 0

    def contains(self, theta) -> np.ndarray:
        theta = np.atleast_2d(theta)
        box = self.box
        return np.all((theta >= box[:, 0]) & (theta <= box[:, 1]), axis=1)

    # -- parameter distributions -------------------------------------------
    def sample_reference(self, count: int, rng) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = as_rng(rng)
        if self.reference == "uniform":
            box = self.box
            return rng.uniform(box[:, 0], box[:, 1], size=(count, self.dim))
        return self.sample_prior(count, rng)

    def sample_prior(self, count: int, rng) -> np.ndarray:
        """Prior draws truncated to the box by rejection."""
        rng = as_rng(rng)
        out = np.empty((0, self.dim))
        while out.shape[0] < count:
            need = count - out.shape[0]
            draw = self._sample_prior_raw(max(2 * need, 16), rng)
            out = np.vstack([out, draw[self.contains(draw)]])
        return out[:count]

    def _sample_prior_raw(self, count, rng):
        box = self.box
        return rng.uniform(box[:, 0], box[:, 1], size=(count, self.dim))

    def prior_logpdf(self, theta) -> np.ndarray:
        """Log density of the (box-truncated) prior; ``-inf`` outside."""
        theta = np.asarray(theta, dtype=float)
        box = self.box
        inside = np.all((theta >= box[:, 0]) & (theta <= box[:, 1]), axis=-1)
        val = -np.sum(np.log(box[:, 1] - box[:, 0])) * np.ones(theta.shape[:-1])
        return np.where(inside, val, -np.inf)

    # -- data -----------------------------------------------------------------
    def simulate(self, theta, n: int, rng) -> np.ndarray:
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        if n < 1:
            raise ValueError("n must be >= 1")
        return self._simulate(theta, int(n), as_rng(rng))

    def _simulate(self, theta, n, rng):
        raise NotImplementedError

    def _obs_loglik(self, x, theta):
        """Sum of per-observation log densities. ``x`` is ``(..., n, p)``,
        ``theta`` is ``(..., d)``; leading dimensions broadcast."""
        raise LikelihoodUnavailable(f"{self.name}: likelihood unavailable")

    def loglik(self, x, theta) -> np.ndarray:
        if not self.tractable:
            raise LikelihoodUnavailable(f"{self.name}: likelihood unavailable")
        x = np.asarray(x, dtype=float)
        theta = np.asarray(theta, dtype=float)
        return self._obs_loglik(x, theta)

    def loglik_grid(self, x, grid) -> np.ndarray:
        """Log-likelihood of every dataset at every grid point, ``(N, G)``."""
        x = np.asarray(x, dtype=float)
        grid = np.atleast_2d(np.asarray(grid, dtype=float))
        N, G = x.shape[0], grid.shape[0]
        out = np.empty((N, G))
        per_row = max(1, G * x.shape[1] * x.shape[2])
        step = max(1, _CHUNK_ELEMS // per_row)
        for s in range(0, N, step):
            out[s:s + step] = self.loglik(x[s:s + step, None], grid[None, :, :])
        return out

    def cdf(self, x, theta) -> np.ndarray:
        """Per-observation CDF ``F_theta(x)`` for univariate observations."""
        raise LikelihoodUnavailable(f"{self.name}: no closed-form CDF")

    # -- maximum likelihood ----------------------------------------------------
    def max_loglik(self, x, fixed=None) -> np.ndarray:
        """``sup`` of the log-likelihood over the box.

        With ``fixed`` (``(N, len(interest))``) the interest coordinates are
        held fixed and only the nuisance coordinates are maximised.
        """
        x = np.asarray(x, dtype=float)
        if fixed is not None and not self.has_nuisance:
            theta = np.asarray(fixed, dtype=float).reshape(x.shape[0], self.dim)
            return self.loglik(x, theta)
        return self._numeric_max(x, fixed)

    def _numeric_max(self, x, fixed=None, n_scan=512, sweeps=6):
        """Grid scan plus golden-section refinement per free coordinate;
        coordinate ascent when more than one coordinate is free."""
        N = x.shape[0]
        box = self.box
        theta = np.tile(box.mean(axis=1), (N, 1))
        if fixed is not None:
            theta[:, list(self.interest)] = np.asarray(fixed, dtype=float).reshape(N, -1)
            free = list(self.nuisance)
        else:
            free = list(range(self.dim))
        n_sweeps = 1 if len(free) == 1 else sweeps
        best = self.loglik(x, theta)
        for _ in range(n_sweeps):
            for j in free:
                scan = np.linspace(box[j, 0], box[j, 1], n_scan)
                vals = np.empty((N, n_scan))
                for g, v in enumerate(scan):
                    t = theta.copy()
                    t[:, j] = v
                    vals[:, g] = self.loglik(x, t)
                k = np.argmax(vals, axis=1)
                lo = scan[np.maximum(k - 1, 0)]
                hi = scan[np.minimum(k + 1, n_scan - 1)]

                def f(v, j=j):
                    t = theta.copy()
                    t[:, j] = v
                    return self.loglik(x, t)

                arg, val = _golden_max(f, lo, hi)
                grid_best = vals[np.arange(N), k]
                use = val >= grid_best
                theta[:, j] = np.where(use, arg, scan[k])
                best = np.where(use, val, grid_best)
        return best


# ---------------------------------------------------------------------------
# tractable univariate models


def _truncnorm_logpdf(v, loc, scale, lo, hi):
    mass = stats.norm.cdf(hi, loc, scale) - stats.norm.cdf(lo, loc, scale)
    out = stats.norm.logpdf(v, loc, scale) - np.log(mass)
    return np.where((v >= lo) & (v <= hi), out, -np.inf)


@dataclass(frozen=True)
class NormalModel(ModelSpec):
    """X_i ~ N(theta, 1) on theta in [-5, 5]; prior N(0, 0.25) (variance)."""

    name: str = "normal"
    bounds: tuple = ((-5.0, 5.0),)
    param_names: tuple = ("theta",)
    reference: str = "prior"
    prior_mean: float = 0.0
    prior_var: float = 0.25

    def _sample_prior_raw(self, count, rng):
        return rng.normal(self.prior_mean, math.sqrt(self.prior_var), size=(count, 1))

    def prior_logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.bounds[0]
        return _truncnorm_logpdf(theta[..., 0], self.prior_mean, math.sqrt(self.prior_var), lo, hi)

    def _simulate(self, theta, n, rng):
        return theta[:, None, :1] + rng.standard_normal((theta.shape[0], n, 1))

    def _obs_loglik(self, x, theta):
        n = x.shape[-2]
        # sufficient statistics keep grid evaluation cheap
        s1 = x[..., 0].sum(axis=-1)
        s2 = (x[..., 0] ** 2).sum(axis=-1)
        t = theta[..., 0]
        return -0.5 * (s2 - 2.0 * t * s1 + n * t * t) - 0.5 * n * _LOG_2PI

    def loglik_grid(self, x, grid):
        x = np.asarray(x, dtype=float)
        grid = np.atleast_2d(np.asarray(grid, dtype=float))
        n = x.shape[1]
        s1 = x[:, :, 0].sum(axis=1)[:, None]
        s2 = (x[:, :, 0] ** 2).sum(axis=1)[:, None]
        t = grid[None, :, 0]
        return -0.5 * (s2 - 2.0 * t * s1 + n * t * t) - 0.5 * n * _LOG_2PI

    def cdf(self, x, theta):
        return special.ndtr(np.asarray(x)[..., 0] - np.asarray(theta)[:, None, 0])

    def mle(self, x):
        lo, hi = self.bounds[0]
        return np.clip(np.asarray(x)[:, :, 0].mean(axis=1), lo, hi)[:, None]

    def max_loglik(self, x, fixed=None):
        x = np.asarray(x, dtype=float)
        if fixed is not None:
            return super().max_loglik(x, fixed)
        return self.loglik(x, self.mle(x))


@dataclass(frozen=True)
class GMMModel(ModelSpec):
    """X_i ~ 0.5 N(theta, 1) + 0.5 N(-theta, 1), theta in [0, 5];
    prior N(0.25, 1) truncated to the box."""

    name: str = "gmm"
    bounds: tuple = ((0.0, 5.0),)
    param_names: tuple = ("theta",)
    reference: str = "prior"
    prior_mean: float = 0.25
    prior_var: float = 1.0

    def _sample_prior_raw(self, count, rng):
        return rng.normal(self.prior_mean, math.sqrt(self.prior_var), size=(count, 1))

    def prior_logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.bounds[0]
        return _truncnorm_logpdf(theta[..., 0], self.prior_mean, math.sqrt(self.prior_var), lo, hi)

    def _simulate(self, theta, n, rng):
        N = theta.shape[0]
        sign = np.where(rng.random((N, n)) < 0.5, 1.0, -1.0)
        return (sign * theta[:, :1] + rng.standard_normal((N, n)))[..., None]

    def _obs_loglik(self, x, theta):
        v = x[..., 0]
        t = theta[..., 0][..., None]
        # log(0.5 phi(v-t) + 0.5 phi(v+t)) = logphi(v) - t^2/2 + log cosh(v t)
        vt = np.abs(v * t)
        log_cosh = vt + np.log1p(np.exp(-2.0 * vt)) - math.log(2.0)
        per = -0.5 * v * v - 0.5 * _LOG_2PI - 0.5 * t * t + log_cosh
        return per.sum(axis=-1)

    def cdf(self, x, theta):
        v = np.asarray(x)[..., 0]
        t = np.asarray(theta)[:, None, 0]
        return 0.5 * special.ndtr(v - t) + 0.5 * special.ndtr(v + t)


@dataclass(frozen=True)
class LognormalModel(ModelSpec):
    """X_i ~ lognormal(mu, sigma2), (mu, sigma2) in [-2.5, 2.5] x [0.15, 1.25];
    prior NIG(0, 2, 2, 1): sigma2 ~ InvGamma(2, 1), mu | sigma2 ~ N(0, sigma2 / 2)."""

    name: str = "lognormal"
    bounds: tuple = ((-2.5, 2.5), (0.15, 1.25))
    param_names: tuple = ("mu", "sigma2")
    reference: str = "prior"
    nig: tuple = (0.0, 2.0, 2.0, 1.0)

    def _sample_prior_raw(self, count, rng):
        m0, lam, a, b = self.nig
        sigma2 = stats.invgamma.rvs(a, scale=b, size=count, random_state=rng)
        mu = rng.normal(m0, np.sqrt(sigma2 / lam))
        return np.column_stack([mu, sigma2])

    def prior_logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        m0, lam, a, b = self.nig
        mu, s2 = theta[..., 0], theta[..., 1]
        s2c = np.maximum(s2, 1e-300)
        lp = stats.invgamma.logpdf(s2c, a, scale=b) + stats.norm.logpdf(mu, m0, np.sqrt(s2c / lam))
        # normalising mass of the box is irrelevant for posteriors but kept
        # so that the density integrates to one over the box
        lp = lp - self._prior_box_logmass()
        box = self.box
        inside = np.all((theta >= box[:, 0]) & (theta <= box[:, 1]), axis=-1)
        return np.where(inside, lp, -np.inf)

    def _prior_box_logmass(self):
        cached = self.__dict__.get("_box_logmass")
        if cached is None:
            m0, lam, a, b = self.nig
            (mlo, mhi), (slo, shi) = self.bounds
            s2 = np.linspace(slo, shi, 2001)
            inner = stats.norm.cdf(mhi, m0, np.sqrt(s2 / lam)) - stats.norm.cdf(mlo, m0, np.sqrt(s2 / lam))
            from scipy.integrate import simpson

            mass = simpson(stats.invgamma.pdf(s2, a, scale=b) * inner, x=s2)
            cached = math.log(mass)
            object.__setattr__(self, "_box_logmass", cached)
        return cached

    def _simulate(self, theta, n, rng):
        z = rng.standard_normal((theta.shape[0], n))
        return np.exp(theta[:, :1] + np.sqrt(theta[:, 1:2]) * z)[..., None]

    def _obs_loglik(self, x, theta):
        v = x[..., 0]
        lv = np.log(v)
        mu = theta[..., 0][..., None]
        s2 = theta[..., 1][..., None]
        per = -lv - 0.5 * np.log(s2) - 0.5 * _LOG_2PI - 0.5 * (lv - mu) ** 2 / s2
        return per.sum(axis=-1)

    def cdf(self, x, theta):
        v = np.asarray(x)[..., 0]
        th = np.asarray(theta)
        return special.ndtr((np.log(v) - th[:, None, 0]) / np.sqrt(th[:, None, 1]))

    def mle(self, x):
        """Box-constrained MLE: the mu-profile does not depend on sigma2 and
        the sigma2-profile is unimodal, so clipping each is exact."""
        (mlo, mhi), (slo, shi) = self.bounds
        lv = np.log(np.asarray(x)[:, :, 0])
        mu = np.clip(lv.mean(axis=1), mlo, mhi)
        s2 = np.clip(((lv - mu[:, None]) ** 2).mean(axis=1), slo, shi)
        return np.column_stack([mu, s2])

    def max_loglik(self, x, fixed=None):
        x = np.asarray(x, dtype=float)
        if fixed is not None:
            return super().max_loglik(x, fixed)
        return self.loglik(x, self.mle(x))


# ---------------------------------------------------------------------------
# nuisance-parameter models


@dataclass(frozen=True)
class PoissonCountingModel(ModelSpec):
    """Counting experiment: N_b ~ Pois(nu * tau_hyper * b),
    N_s ~ Pois(nu * b + mu * s); mu is of interest, nu is a nuisance.

    The background scale ``tau_hyper`` enters only the background channel,
    exactly as the model is usually written.
    """

    name: str = "poisson"
    bounds: tuple = ((0.0, 5.0), (0.0, 1.5))
    param_names: tuple = ("mu", "nu")
    interest: tuple | None = (0,)
    obs_dim: int = 2
    discrete: bool = True
    s: float = 15.0
    b: float = 70.0
    tau_hyper: float = 1.0

    def rates(self, theta):
        theta = np.asarray(theta, dtype=float)
        mu, nu = theta[..., 0], theta[..., 1]
        return nu * self.tau_hyper * self.b, nu * self.b + mu * self.s

    def _simulate(self, theta, n, rng):
        lam_b, lam_s = self.rates(theta)
        nb = rng.poisson(np.broadcast_to(lam_b[:, None], (theta.shape[0], n)))
        ns = rng.poisson(np.broadcast_to(lam_s[:, None], (theta.shape[0], n)))
        return np.stack([nb, ns], axis=-1).astype(float)

    def _obs_loglik(self, x, theta):
        lam_b, lam_s = self.rates(theta)
        lam_b = lam_b[..., None]
        lam_s = lam_s[..., None]
        nb, ns = x[..., 0], x[..., 1]
        per = (
            special.xlogy(nb, lam_b) - lam_b - special.gammaln(nb + 1.0)
            + special.xlogy(ns, lam_s) - lam_s - special.gammaln(ns + 1.0)
        )
        return per.sum(axis=-1)


@dataclass(frozen=True)
class GammaGLMModel(ModelSpec):
    """Gamma GLM with log link and a fixed design.

    Y_i ~ Gamma(shape=1/phi, scale=phi * exp(beta0 + beta1 x_i1 + beta2 x_i2)),
    so E[Y_i] = exp(linear predictor). Parameters are
    ``(beta0, beta1, beta2, phi)``; ``beta1`` is of interest by default.
    The design rows are U(-1, 1)^2 draws from ``design_seed``.
    """

    name: str = "glm"
    bounds: tuple = ((-6.0, 6.0), (-3.0, 3.0), (-3.0, 3.0), (0.0, 1.75))
    param_names: tuple = ("beta0", "beta1", "beta2", "phi")
    interest: tuple | None = (1,)
    reference: str = "prior"
    design_seed: int = 20240501
    n_design: int = 50
    beta_prior_var: tuple = (4.0, 1.0, 1.0)
    phi_rate: float = 1.0
    # the box includes phi = 0, where the response is degenerate; simulation
    # and likelihood use max(phi, phi_floor)
    phi_floor: float = 1e-3
    design: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        super().__post_init__()
        if self.design is None:
            object.__setattr__(self, "design", self.design_matrix(self.n_design))

    def design_matrix(self, n: int) -> np.ndarray:
        """``(n, 3)`` matrix with an intercept column. Rows are a prefix of a
        single stream, so smaller designs are sub-designs of larger ones."""
        rng = np.random.Generator(np.random.PCG64(self.design_seed))
        cov = rng.uniform(-1.0, 1.0, size=(n, 2))
        return np.column_stack([np.ones(n), cov])

    def _design_for(self, n):
        if self.design is not None and self.design.shape[0] == n:
            return self.design
        return self.design_matrix(n)

    def _sample_prior_raw(self, count, rng):
        sd = np.sqrt(np.asarray(self.beta_prior_var))
        beta = rng.normal(0.0, sd, size=(count, 3))
        hi = self.bounds[3][1]
        phi = stats.truncexpon.rvs(hi * self.phi_rate, scale=1.0 / self.phi_rate, size=count, random_state=rng)
        return np.column_stack([beta, phi])

    def prior_logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        sd = np.sqrt(np.asarray(self.beta_prior_var))
        hi = self.bounds[3][1]
        lp = stats.norm.logpdf(theta[..., :3], 0.0, sd).sum(axis=-1)
        lp = lp + stats.truncexpon.logpdf(theta[..., 3], hi * self.phi_rate, scale=1.0 / self.phi_rate)
        box = self.box
        inside = np.all((theta >= box[:, 0]) & (theta <= box[:, 1]), axis=-1)
        return np.where(inside, lp, -np.inf)

    def _simulate(self, theta, n, rng):
        Z = self._design_for(n)
        eta = theta[:, :3] @ Z.T
        phi = np.maximum(theta[:, 3:4], self.phi_floor)
        shape = np.broadcast_to(1.0 / phi, eta.shape)
        return rng.gamma(shape, phi * np.exp(eta))[..., None]

    def _obs_loglik(self, x, theta):
        y = x[..., 0]
        Z = self._design_for(y.shape[-1])
        eta = np.einsum("...k,nk->...n", theta[..., :3], Z)
        k = 1.0 / np.maximum(theta[..., 3], self.phi_floor)[..., None]
        m = np.exp(eta)
        per = -special.gammaln(k) + k * np.log(k) - k * eta + (k - 1.0) * np.log(y) - k * y / m
        return per.sum(axis=-1)

    # Profile likelihood: the beta-score does not involve phi, so beta is
    # fitted first (damped Newton on sum(y/m + log m)), then the shape is
    # profiled in closed form up to a 1-d root find.
    def _fit_beta(self, y, Z, free, offset, iters=100, tol=1e-11):
        N = y.shape[0]
        Zf = Z[:, free]
        ly = np.log(y) - offset
        beta, *_ = np.linalg.lstsq(Zf, ly.T, rcond=None)
        beta = beta.T.copy()

        def objective(b):
            eta = b @ Zf.T + offset
            return np.sum(y * np.exp(-eta) + eta, axis=1)

        obj = objective(beta)
        for _ in range(iters):
            eta = beta @ Zf.T + offset
            w = y * np.exp(-eta)
            grad = (1.0 - w) @ Zf
            hess = np.einsum("Nn,ni,nj->Nij", w, Zf, Zf)
            step = np.linalg.solve(hess, grad[..., None])[..., 0]
            t = np.ones(N)
            new = beta - step
            new_obj = objective(new)
            for _ in range(30):
                bad = ~(new_obj <= obj + 1e-12 * np.abs(obj))
                if not bad.any():
                    break
                t = np.where(bad, 0.5 * t, t)
                new = beta - t[:, None] * step
                new_obj = objective(new)
            bad = ~(new_obj <= obj + 1e-12 * np.abs(obj))
            new = np.where(bad[:, None], beta, new)
            new_obj = np.where(bad, obj, new_obj)
            delta = np.max(np.abs(new - beta))
            beta, obj = new, new_obj
            if delta < tol:
                break
        return beta

    def _profile_shape(self, r):
        """Maximise n(k log k - lgamma k) + k sum r over k >= 1/phi_max, with
        r_i = log(y_i/m_i) - y_i/m_i."""
        c = -1.0 - r.mean(axis=1)
        c = np.maximum(c, 1e-12)
        # Minka's starting point for log k - digamma(k) = c
        k = (3.0 - c + np.sqrt((c - 3.0) ** 2 + 24.0 * c)) / (12.0 * c)
        for _ in range(50):
            h = np.log(k) - special.digamma(k) - c
            dh = 1.0 / k - special.polygamma(1, k)
            k_new = k - h / dh
            k_new = np.where(k_new <= 0, 0.5 * k, k_new)
            if np.max(np.abs(k_new - k) / k) < 1e-13:
                k = k_new
                break
            k = k_new
        k_min = 1.0 / self.bounds[3][1]
        return np.clip(k, k_min, 1.0 / self.phi_floor)

    def max_loglik(self, x, fixed=None):
        y = np.asarray(x, dtype=float)[..., 0]
        N, n = y.shape
        Z = self._design_for(n)
        if fixed is None:
            free = [0, 1, 2]
            offset = np.zeros((N, 1))
        else:
            fixed = np.asarray(fixed, dtype=float).reshape(N, -1)
            fixed_beta = [i for i in self.interest if i < 3]
            if any(i == 3 for i in self.interest):
                raise NotImplementedError("phi as interest parameter is not supported")
            free = [i for i in range(3) if i not in fixed_beta]
            offset = fixed @ Z[:, fixed_beta].T
        beta = self._fit_beta(y, Z, free, offset)
        eta = beta @ Z[:, free].T + offset
        r = np.log(y) - eta - y * np.exp(-eta)
        k = self._profile_shape(r)[:, None]
        per = -special.gammaln(k) + k * np.log(k) - k * eta + (k - 1.0) * np.log(y) - k * y * np.exp(-eta)
        return per.sum(axis=1)


MODEL_REGISTRY = {
    "normal": NormalModel,
    "gmm": GMMModel,
    "lognormal": LognormalModel,
    "poisson": PoissonCountingModel,
    "glm": GammaGLMModel,
}


def make_model(name: str, **overrides) -> ModelSpec:
    try:
        cls = MODEL_REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODEL_REGISTRY)}") from None
    if "bounds" in overrides:
        overrides["bounds"] = tuple(tuple(r) for r in overrides["bounds"])
    for key in ("interest", "beta_prior_var", "nig"):
        if key in overrides and overrides[key] is not None:
            overrides[key] = tuple(overrides[key])
    return cls(**overrides)


# functional aliases


def sample_reference(model: ModelSpec, count: int, seed) -> np.ndarray:
    return model.sample_reference(count, seed)


def simulate(model: ModelSpec, theta, n: int, seed) -> np.ndarray:
    """Single parameter point -> one ``(n, p)`` dataset."""
    theta = np.asarray(theta, dtype=float).reshape(1, model.dim)
    return model.simulate(theta, n, seed)[0]


def loglik(model: ModelSpec, x, theta) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return float(model.loglik(x[None], np.asarray(theta, dtype=float).reshape(1, -1))[0])
