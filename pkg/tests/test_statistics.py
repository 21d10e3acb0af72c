import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special, stats

from trustcal.models import GammaGLMModel, GMMModel, LognormalModel, NormalModel, PoissonCountingModel, make_model
from trustcal.statistics import (
    DegeneratePosterior,
    PosteriorEngine,
    StatisticSpec,
    bff_statistic,
    bff_values,
    e_value,
    evalue_values,
    ks_statistic,
    lr_statistic,
    lr_values,
    make_statistic,
    prior_mass_check,
    waldo_statistic,
)

NORMAL = NormalModel()
CONJ = PosteriorEngine("conjugate")
QUAD = PosteriorEngine("quadrature-1d")


def conjugate_moments(x, prior_var=0.25):
    x = np.asarray(x, dtype=float)
    var = 1.0 / (1.0 / prior_var + len(x))
    return var * x.sum(), var


class TestLikelihoodRatio:
    def test_zero_at_sample_mean(self):
        assert lr_statistic(NORMAL, [0.3, 0.5, 0.7], [0.5]) == pytest.approx(0.0, abs=1e-12)

    def test_closed_form(self):
        assert lr_statistic(NORMAL, [1.0, 1.0], [0.0]) == pytest.approx(-1.0, abs=1e-12)

    def test_gmm_against_dense_grid(self):
        model = GMMModel()
        x = model.simulate(np.array([[2.0]]), 50, 3)[0]
        grid = np.linspace(0.0, 5.0, 200_001)
        ll = model.loglik_grid(x[None], grid[:, None])[0]
        k = int(np.argmax(ll))
        fine = np.linspace(grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)], 20_001)
        best = model.loglik_grid(x[None], fine[:, None])[0].max()
        oracle = model.loglik(x[None], np.array([[2.0]]))[0] - max(best, ll.max())
        assert lr_statistic(model, x, [2.0]) == pytest.approx(oracle, abs=1e-6)

    @given(st.lists(st.floats(-4, 4), min_size=1, max_size=10), st.floats(-5, 5))
    def test_never_positive(self, xs, t0):
        assert lr_statistic(NORMAL, xs, [t0]) <= 0.0

    def test_lognormal_lr_zero_at_mle(self):
        model = LognormalModel()
        x = model.simulate(np.array([[0.2, 0.6]]), 30, 1)
        mle = model.mle(x)
        assert lr_values(model, x, mle)[0] == pytest.approx(0.0, abs=1e-8)

    def test_profile_lr_poisson_nonpositive(self):
        model = PoissonCountingModel()
        x = model.simulate(np.array([[1.0, 1.0]]), 1, 2)
        vals = lr_values(model, x, np.linspace(0, 5, 11)[:, None])
        assert np.all(vals <= 0)
        assert vals.max() > -2.0

    def test_glm_profile_lr(self):
        model = GammaGLMModel()
        theta = np.array([[0.1, 0.5, -0.3, 0.4]])
        x = model.simulate(theta, 50, 4)
        vals = lr_values(model, x, np.array([[0.5], [2.5]]))
        assert np.all(vals <= 0)
        assert vals[1] < vals[0]


class TestKolmogorovSmirnov:
    def test_single_observation_at_median(self):
        assert ks_statistic(NORMAL, [0.0], [0.0]) == pytest.approx(0.5)

    def test_midpoint_quantiles(self):
        n = 8
        x = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
        assert ks_statistic(NORMAL, x, [0.0]) == pytest.approx(1.0 / (2 * n), abs=1e-12)

    def test_against_dense_sup(self):
        n = 7
        x = stats.norm.ppf(np.arange(1, n + 1) / (n + 1))
        t = np.linspace(-8, 8, 1_000_001)
        F = stats.norm.cdf(t)
        ecdf_right = np.searchsorted(x, t, side="right") / n
        ecdf_left = np.searchsorted(x, t, side="left") / n
        sup = max(np.abs(ecdf_right - F).max(), np.abs(ecdf_left - F).max())
        assert ks_statistic(NORMAL, x, [0.0]) == pytest.approx(sup, abs=1e-6)
        assert ks_statistic(NORMAL, x, [0.0]) == pytest.approx(1.0 / (n + 1), abs=1e-12)

    def test_matches_scipy(self, rng):
        x = rng.normal(0.3, 1.0, size=15)
        assert ks_statistic(NORMAL, x, [0.0]) == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)

    def test_oriented_value_is_negated(self):
        spec = make_statistic("ks")
        assert spec.direction == -1
        val = spec.evaluate(NORMAL, np.array([[[0.0]]]), np.array([[0.0]]))
        assert val[0] == pytest.approx(-0.5)


class TestBayesFrequentistFactor:
    def test_conjugate_closed_form(self, rng):
        x = rng.normal(0.5, 1.0, size=6)
        mean, var = conjugate_moments(x)
        for t0 in (-1.0, 0.0, 0.4, 2.0):
            expected = stats.norm.pdf(t0, mean, math.sqrt(var)) / stats.norm.pdf(t0, 0.0, 0.5)
            assert bff_statistic(CONJ, NORMAL, x, [t0]) == pytest.approx(expected, rel=1e-8)

    def test_no_data_gives_one(self):
        x = np.empty((1, 0, 1))
        vals = bff_values(CONJ, NORMAL, x, np.array([[-1.0], [0.0], [0.7]]))
        np.testing.assert_allclose(vals, 1.0, rtol=1e-12)

    def test_gmm_marginal_identity(self):
        model = GMMModel()
        x = model.simulate(np.array([[1.0]]), 10, 5)
        g = np.linspace(0.0, 5.0, 4001)
        b = bff_values(QUAD, model, x, g[:, None])
        prior = np.exp(model.prior_logpdf(g[:, None]))
        assert integrate.simpson(b * prior, x=g) == pytest.approx(1.0, abs=1e-4)

    def test_underflow_is_zero_and_flagged(self):
        x = np.full((1, 50, 1), 4.5)
        vals, flags = bff_values(QUAD, NORMAL, x, np.array([[-4.9]]), return_flags=True)
        assert vals[0] == 0.0 and flags[0]

    def test_conjugate_and_quadrature_agree(self):
        gen = np.random.default_rng(8)
        for _ in range(100):
            x = gen.normal(gen.normal(0, 0.5), 1.0, size=(1, 5, 1))
            t0 = np.array([[gen.uniform(-1.5, 1.5)]])
            a = bff_values(CONJ, NORMAL, x, t0)[0]
            b = bff_values(QUAD, NORMAL, x, t0)[0]
            assert a == pytest.approx(b, abs=1e-3)
            assert evalue_values(CONJ, NORMAL, x, t0)[0] == pytest.approx(evalue_values(QUAD, NORMAL, x, t0)[0], abs=1e-3)


class TestEValue:
    def test_mode_gives_one(self):
        x = [0.2, 0.4, 0.9]
        mean, _ = conjugate_moments(x)
        assert e_value(QUAD, NORMAL, x, [mean]) == pytest.approx(1.0, abs=1e-3)

    def test_conjugate_formula(self, rng):
        x = rng.normal(size=4)
        mean, var = conjugate_moments(x)
        for t0 in (-1.0, 0.1, 1.3):
            z0 = (t0 - mean) / math.sqrt(var)
            assert e_value(CONJ, NORMAL, x, [t0]) == pytest.approx(1.0 - (2 * special.ndtr(abs(z0)) - 1), abs=1e-4)

    def test_negligible_density_gives_zero(self):
        # data far from theta0: f(theta0 | x) is numerically zero
        gmm = GMMModel()
        x = gmm.simulate(np.array([[4.5]]), 50, 1)[0]
        assert e_value(QUAD, gmm, x, [0.0]) == pytest.approx(0.0, abs=1e-3)

    def test_two_dimensional_mode(self):
        model = LognormalModel()
        x = model.simulate(np.array([[0.0, 0.5]]), 20, 3)
        eng = PosteriorEngine("quadrature-2d", n_points_2d=129)
        post = eng.posterior(model, x)
        k = int(np.argmax(post.dens[0]))
        assert evalue_values(eng, model, x, post.points[k][None])[0] == pytest.approx(1.0, abs=1e-3)


class TestWaldo:
    def test_zero_at_posterior_mean(self):
        x = [0.5, 1.0]
        mean, _ = conjugate_moments(x)
        assert waldo_statistic(CONJ, NORMAL, x, [mean]) == pytest.approx(0.0, abs=1e-14)

    def test_conjugate_formula(self, rng):
        x = rng.normal(size=5)
        mean, var = conjugate_moments(x)
        assert waldo_statistic(CONJ, NORMAL, x, [1.1]) == pytest.approx((mean - 1.1) ** 2 / var, rel=1e-8)

    def test_covariance_scaling(self, monkeypatch):
        x = [0.3, 1.2, -0.4]
        base = waldo_statistic(CONJ, NORMAL, x, [1.0])
        from trustcal import statistics as st_mod

        moments = st_mod._GaussianPosterior.moments
        monkeypatch.setattr(st_mod._GaussianPosterior, "moments", lambda self: (moments(self)[0], 3.0 * moments(self)[1]))
        assert waldo_statistic(CONJ, NORMAL, x, [1.0]) == pytest.approx(base / 3.0, rel=1e-12)

    def test_degenerate_posterior(self, monkeypatch):
        from trustcal import statistics as st_mod

        monkeypatch.setattr(st_mod._GaussianPosterior, "moments", lambda self: (self.mean[:, None], np.zeros((len(self.mean), 1, 1))))
        with pytest.raises(DegeneratePosterior):
            waldo_statistic(CONJ, NORMAL, [0.0], [0.0])

    def test_oriented_direction(self):
        assert make_statistic("waldo").direction == -1


class TestStatisticSpec:
    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            StatisticSpec("chi")

    def test_posterior_kinds_get_engine(self):
        assert make_statistic("bff").engine is not None
        assert make_statistic("lr").engine is None

    def test_glm_has_no_posterior_engine(self):
        with pytest.raises(NotImplementedError):
            make_statistic("bff").evaluate(GammaGLMModel(), np.ones((1, 50, 1)), np.array([[0.0]]))

    def test_conjugate_only_for_normal(self):
        with pytest.raises(ValueError):
            CONJ.resolve_mode(GMMModel())

    @pytest.mark.parametrize("model", [NormalModel(), GMMModel(), LognormalModel()])
    def test_prior_integrates_to_one(self, model):
        assert prior_mass_check(model) == pytest.approx(1.0, abs=1e-4)

    @pytest.mark.parametrize("kind", ["lr", "ks", "bff", "evalue", "waldo"])
    def test_larger_is_more_plausible(self, kind):
        spec = make_statistic(kind)
        x = NORMAL.simulate(np.array([[0.0]]), 20, 1)
        vals = spec.evaluate(NORMAL, x, np.array([[0.0], [3.0]]))
        assert vals[0] > vals[1]

    def test_poisson_marginal_posterior_integrates(self):
        model = PoissonCountingModel()
        x = model.simulate(np.array([[1.0, 1.0]]), 1, 3)
        eng = PosteriorEngine(n_points_2d=129)
        post = eng.posterior(model, x)
        assert (post.tables[0] @ post.weights) == pytest.approx(1.0, abs=1e-10)


def test_glm_profile_lr_invariant_to_coefficients():
    # y * exp(Z delta) is a draw at beta + delta with the same noise, and the
    # profile LR at beta1 + delta1 must not change
    model = make_model("glm")
    stat = make_statistic("lr")
    rng = np.random.default_rng(7)
    theta = np.array([[0.5, -0.4, 0.8, 0.6]])
    x = model.simulate(np.repeat(theta, 20, axis=0), 50, rng)
    delta = np.array([-1.0, 0.9, -0.7])
    shifted = x * np.exp(model.design @ delta)[None, :, None]
    a = stat.evaluate(model, x, np.full((20, 1), theta[0, 1]))
    b = stat.evaluate(model, shifted, np.full((20, 1), theta[0, 1] + delta[1]))
    np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-8)
