import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from trustcal.models import (
    GammaGLMModel,
    GMMModel,
    LognormalModel,
    MODEL_REGISTRY,
    NormalModel,
    PoissonCountingModel,
    loglik,
    make_model,
    sample_reference,
    simulate,
)

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def within_3se(draws, expected):
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    return abs(draws.mean() - expected) <= 3.0 * se


class TestReferenceSampling:
    def test_normal_reference_is_reproducible_and_in_box(self):
        a = sample_reference(NormalModel(), 3, 7)
        b = sample_reference(NormalModel(), 3, 7)
        assert a.shape == (3, 1)
        np.testing.assert_array_equal(a, b)
        assert np.all((a >= -5) & (a <= 5))

    def test_gmm_reference_mean_matches_truncated_normal(self):
        draws = sample_reference(GMMModel(), 10_000, 3)[:, 0]
        # truncated-normal mean by quadrature on [0, 5]
        pdf = lambda t: stats.norm.pdf(t, 0.25, 1.0)  # noqa: E731
        mass = integrate.quad(pdf, 0.0, 5.0)[0]
        mean = integrate.quad(lambda t: t * pdf(t), 0.0, 5.0)[0] / mass
        assert np.all((draws >= 0) & (draws <= 5))
        assert within_3se(draws, mean)

    def test_glm_phi_mean_matches_truncated_exponential(self):
        draws = sample_reference(GammaGLMModel(), 10_000, 4)
        phi = draws[:, 3]
        mass = integrate.quad(lambda t: math.exp(-t), 0.0, 1.75)[0]
        mean = integrate.quad(lambda t: t * math.exp(-t), 0.0, 1.75)[0] / mass
        assert within_3se(phi, mean)
        assert within_3se(draws[:, 0], 0.0)
        assert draws[:, 0].var() == pytest.approx(4.0, rel=0.1)

    def test_uniform_reference_override(self):
        m = make_model("normal", reference="uniform")
        draws = m.sample_reference(10_000, 0)[:, 0]
        assert within_3se(draws, 0.0)
        assert draws.var() == pytest.approx(100.0 / 12.0, rel=0.05)

    def test_poisson_reference_is_uniform_on_box(self):
        draws = PoissonCountingModel().sample_reference(10_000, 1)
        assert within_3se(draws[:, 0], 2.5)
        assert within_3se(draws[:, 1], 0.75)

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError):
            NormalModel().sample_reference(0, 1)


class TestSimulate:
    def test_gmm_at_zero_is_standard_normal(self):
        x = GMMModel().simulate(np.zeros((1, 1)), 100_000, 5)[0, :, 0]
        assert abs(x.mean()) <= 3.0 / math.sqrt(100_000)
        assert x.var() == pytest.approx(1.0, abs=0.02)

    def test_poisson_channel_means(self):
        x = PoissonCountingModel().simulate(np.array([[1.0, 1.0]]), 100_000, 6)[0]
        assert within_3se(x[:, 0], 70.0)
        assert within_3se(x[:, 1], 85.0)

    def test_glm_zero_predictor_is_exponential(self):
        y = GammaGLMModel().simulate(np.array([[0.0, 0.0, 0.0, 1.0]]), 50, 7)
        many = GammaGLMModel(n_design=5000).simulate(np.array([[0.0, 0.0, 0.0, 1.0]]), 5000, 8)[0, :, 0]
        assert y.shape == (1, 50, 1)
        assert within_3se(many, 1.0)
        assert many.var() == pytest.approx(1.0, rel=0.1)

    def test_glm_mean_is_exp_linear_predictor(self):
        m = GammaGLMModel()
        theta = np.array([[0.5, 1.0, -1.0, 0.3]])
        eta = m.design @ theta[0, :3]
        y = m.simulate(np.repeat(theta, 4000, axis=0), 50, 9)[:, :, 0]
        ratio = (y / np.exp(eta)).mean(axis=0)
        assert np.all(np.abs(ratio - 1.0) < 5 * math.sqrt(0.3 / 4000))

    def test_simulation_is_reproducible(self):
        for name in MODEL_REGISTRY:
            m = make_model(name)
            th = m.sample_reference(4, 0)
            np.testing.assert_array_equal(m.simulate(th, 5, 11), m.simulate(th, 5, 11))

    def test_single_point_simulate(self):
        x = simulate(NormalModel(), [1.0], 7, 3)
        assert x.shape == (7, 1)

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            NormalModel().simulate(np.zeros((1, 1)), 0, 1)


class TestLoglik:
    def test_normal_at_origin(self):
        assert loglik(NormalModel(), [0.0], [0.0]) == pytest.approx(-HALF_LOG_2PI, abs=1e-12)

    def test_gmm_collapses_to_normal(self):
        for c in (-2.0, 0.3, 1.7):
            assert loglik(GMMModel(), [c], [0.0]) == pytest.approx(loglik(NormalModel(), [c], [0.0]), abs=1e-12)

    def test_lognormal_at_median(self):
        assert loglik(LognormalModel(), [1.0], [0.0, 1.0]) == pytest.approx(-HALF_LOG_2PI, abs=1e-12)

    def test_against_scipy_densities(self, rng):
        x = rng.normal(size=6)
        assert loglik(NormalModel(), x, [0.4]) == pytest.approx(stats.norm.logpdf(x, 0.4).sum())
        g = np.log(0.5 * stats.norm.pdf(x, 1.2) + 0.5 * stats.norm.pdf(x, -1.2)).sum()
        assert loglik(GMMModel(), x, [1.2]) == pytest.approx(g)
        y = np.exp(x)
        ln = stats.lognorm.logpdf(y, s=math.sqrt(0.5), scale=math.exp(0.2)).sum()
        assert loglik(LognormalModel(), y, [0.2, 0.5]) == pytest.approx(ln)

    def test_poisson_against_scipy(self):
        x = np.array([[68.0, 90.0], [75.0, 80.0]])
        lp = stats.poisson.logpmf(x[:, 0], 0.8 * 70).sum() + stats.poisson.logpmf(x[:, 1], 0.8 * 70 + 2 * 15).sum()
        assert loglik(PoissonCountingModel(), x, [2.0, 0.8]) == pytest.approx(lp)

    def test_glm_against_scipy_gamma(self):
        m = GammaGLMModel(n_design=5)
        theta = np.array([0.2, -0.5, 1.0, 0.4])
        y = np.array([0.5, 1.5, 2.0, 0.3, 1.1])
        mean = np.exp(m.design @ theta[:3])
        expected = stats.gamma.logpdf(y, a=1 / 0.4, scale=0.4 * mean).sum()
        assert loglik(m, y, theta) == pytest.approx(expected)

    @given(st.floats(0.05, 4.0), st.lists(st.floats(-6, 6), min_size=1, max_size=8))
    def test_gmm_symmetric_in_theta(self, t, xs):
        m = GMMModel(bounds=((-5.0, 5.0),))
        assert loglik(m, xs, [t]) == pytest.approx(loglik(m, xs, [-t]), abs=1e-9)

    def test_simulate_then_loglik_is_finite(self):
        gen = np.random.default_rng(2)
        for name in MODEL_REGISTRY:
            m = make_model(name)
            for _ in range(25):
                th = m.sample_reference(400, gen)
                n = int(gen.integers(1, 101)) if name != "glm" else 50
                x = m.simulate(th, n, gen)
                ll = m.loglik(x, th)
                assert np.all(np.isfinite(ll)), name


class TestModelSpec:
    def test_invalid_box(self):
        with pytest.raises(ValueError):
            NormalModel(bounds=((1.0, 0.0),))

    def test_invalid_interest(self):
        with pytest.raises(ValueError):
            PoissonCountingModel(interest=(5,))

    def test_invalid_reference(self):
        with pytest.raises(ValueError):
            NormalModel(reference="other")

    def test_unknown_model(self):
        with pytest.raises(ValueError, match="unknown model"):
            make_model("nope")

    def test_nuisance_layout(self):
        assert PoissonCountingModel().nuisance == (1,)
        assert GammaGLMModel().nuisance == (0, 2, 3)
        assert not NormalModel().has_nuisance

    def test_glm_design_is_fixed_and_nested(self):
        a = GammaGLMModel().design
        b = GammaGLMModel(n_design=80).design
        np.testing.assert_array_equal(a, b[:50])
        assert np.all(a[:, 0] == 1.0) and np.all(np.abs(a[:, 1:]) <= 1.0)

    def test_glm_profile_likelihood_beats_truth(self):
        m = GammaGLMModel()
        th = np.array([[0.3, 0.8, -0.4, 0.5]])
        x = m.simulate(np.repeat(th, 20, axis=0), 50, 3)
        full = m.max_loglik(x)
        assert np.all(full >= m.loglik(x, np.repeat(th, 20, axis=0)) - 1e-8)
        restricted = m.max_loglik(x, fixed=np.full((20, 1), 0.8))
        assert np.all(restricted <= full + 1e-8)

    def test_prior_logpdf_outside_box(self):
        assert NormalModel().prior_logpdf(np.array([[7.0]]))[0] == -np.inf
