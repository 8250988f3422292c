import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvhawkes import (ConfigurationError, IllConditionedError, MarketParams,
                      ValidationError, covariance, gamma_zhat, jump_quadratic,
                      risk_premium, sample_jump)
from mvhawkes.market import mark_generator


def headline(**kw):
    base = dict(r=0.02, mu=0.09, sigma=0.20, J=1.0,
                jump_mean=-0.02, jump_second=0.06)
    base.update(kw)
    return MarketParams(**base)


class TestValidation:
    def test_scalar_promotion(self):
        p = headline()
        assert (p.k, p.n, p.m) == (1, 1, 1)

    def test_j_range(self):
        with pytest.raises(ValidationError):
            headline(J=1.5)
        with pytest.raises(ValidationError):
            headline(J=-0.1)

    def test_second_moment_floor(self):
        with pytest.raises(ValidationError):
            headline(jump_mean=0.5, jump_second=0.1)

    def test_degenerate_diffusion_rejected(self):
        with pytest.raises(ValidationError, match="positive definite"):
            MarketParams(r=0.02, mu=[0.08, 0.09], sigma=[[0.2, 0.0], [0.2, 0.0]],
                         J=[[1.0], [1.0]], jump_mean=[-0.02], jump_second=[0.06])

    def test_infeasible_two_point_law(self):
        # variance so large the lower support point breaches -1
        with pytest.raises(ConfigurationError):
            headline(jump_mean=-0.5, jump_second=1.5)

    def test_constant_law_needs_zero_variance(self):
        with pytest.raises(ConfigurationError):
            headline(jump_law="constant")
        p = headline(jump_mean=-0.02, jump_second=0.0004, jump_law="constant")
        assert p.jump_law == ("constant",)


class TestRiskPremium:
    def test_headline_values(self):
        assert risk_premium(headline()) == pytest.approx([0.07])

    def test_zero_when_mu_equals_r(self):
        assert risk_premium(headline(mu=0.02))[0] == 0.0

    def test_componentwise(self):
        p = MarketParams(r=0.02, mu=[0.09, 0.05], sigma=[[0.2, 0.0], [0.0, 0.3]],
                         J=[[1.0], [0.5]], jump_mean=[-0.02], jump_second=[0.06])
        assert risk_premium(p) == pytest.approx([0.07, 0.03])

    @given(mu=st.lists(st.floats(0.01, 0.5), min_size=1, max_size=3),
           r=st.floats(0.0, 0.2))
    @settings(max_examples=30, deadline=None)
    def test_definition(self, mu, r):
        k = len(mu)
        p = MarketParams(r=r, mu=mu, sigma=np.eye(k) * 0.2, J=np.ones((k, 1)),
                         jump_mean=[-0.02], jump_second=[0.06])
        assert np.allclose(risk_premium(p), np.asarray(mu) - r)


class TestJumpQuadratic:
    def test_headline_values_value(self):
        assert jump_quadratic(headline(), [0.48])[0, 0] == pytest.approx(0.0288)

    def test_zero_exposure(self):
        assert np.all(jump_quadratic(headline(J=0.0), [0.48]) == 0.0)

    @given(lam=st.floats(0.01, 5.0), scale=st.floats(0.1, 4.0))
    @settings(max_examples=30, deadline=None)
    def test_linear_in_intensity(self, lam, scale):
        p = headline()
        a = jump_quadratic(p, [lam * scale])
        b = jump_quadratic(p, [lam]) * scale
        assert np.allclose(a, b, rtol=1e-12)

    def test_psd_multivariate(self):
        p = MarketParams(r=0.02, mu=[0.09, 0.07], sigma=np.eye(2) * 0.2,
                         J=[[1.0, 0.3], [0.2, 0.9]],
                         jump_mean=[-0.02, -0.01], jump_second=[0.06, 0.04])
        q = jump_quadratic(p, [0.5, 1.5])
        assert np.allclose(q, q.T)
        assert np.linalg.eigvalsh(q).min() >= -1e-15


class TestGammaZhat:
    def test_reduces_to_covariance_and_premium(self):
        p = headline()
        gam, zh = gamma_zhat(p, [0.48], [0.0])
        assert gam[0, 0] == pytest.approx(0.0688)
        assert zh[0] == pytest.approx(0.07)
        assert np.allclose(gam, covariance(p, [0.48]))
        assert np.allclose(zh, risk_premium(p))

    def test_zero_intensity(self):
        p = headline()
        gam, zh = gamma_zhat(p, [0.0], [-0.5])
        assert gam[0, 0] == pytest.approx(0.04)
        assert zh[0] == pytest.approx(0.07)

    def test_adjusted_example(self):
        gam, zh = gamma_zhat(headline(), [0.48], [-0.5])
        assert gam[0, 0] == pytest.approx(0.04 + 0.5 * 0.0288)
        assert zh[0] == pytest.approx(0.07 + 0.48 * (-0.02) * (-0.5))

    def test_ratio_floor(self):
        with pytest.raises(ValidationError):
            gamma_zhat(headline(), [0.48], [-1.0])

    def test_ill_conditioned(self):
        p = MarketParams(r=0.02, mu=[0.09, 0.07],
                         sigma=[[0.2, 0.0], [0.0, 2e-8]],
                         J=np.zeros((2, 1)), jump_mean=[-0.02],
                         jump_second=[0.06])
        with pytest.raises(IllConditionedError):
            gamma_zhat(p, [0.5], [0.0])

    @given(lam=st.floats(0.01, 3.0), u=st.floats(-0.95, 3.0))
    @settings(max_examples=40, deadline=None)
    def test_positive_definite_above_floor(self, lam, u):
        gam, _ = gamma_zhat(headline(), [lam], [u])
        assert np.linalg.eigvalsh(gam).min() > 0

    @given(lam=st.lists(st.floats(0.01, 3.0), min_size=2, max_size=2),
           u=st.lists(st.floats(-0.95, 3.0), min_size=2, max_size=2),
           zeta=st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=2))
    @settings(max_examples=40, deadline=None)
    def test_quadratic_form_lower_bound(self, lam, u, zeta):
        # zeta' Gamma zeta >= zeta' sigma sigma' zeta
        #                     - sum_l max(0, -u_l) lam_l E[Z_l^2] (zeta' J_l)^2
        p = MarketParams(r=0.02, mu=[0.09, 0.07], sigma=np.eye(2) * 0.2,
                         J=[[1.0, 0.3], [0.2, 0.9]],
                         jump_mean=[-0.02, -0.01], jump_second=[0.06, 0.04])
        gam, _ = gamma_zhat(p, lam, u)
        zeta = np.asarray(zeta)
        lhs = zeta @ gam @ zeta
        bound = zeta @ p.diffusion_cov() @ zeta
        for l in range(2):
            bound -= (max(0.0, -u[l]) * lam[l] * p.jump_second[l]
                      * (zeta @ p.J[:, l]) ** 2)
        assert lhs >= bound - 1e-12

    @given(lam=st.lists(st.floats(0.01, 3.0), min_size=2, max_size=2))
    @settings(max_examples=30, deadline=None)
    def test_generalised_covariance_pd_and_inverse_psd(self, lam):
        p = MarketParams(r=0.02, mu=[0.09, 0.07], sigma=np.eye(2) * 0.2,
                         J=[[1.0, 0.3], [0.2, 0.9]],
                         jump_mean=[-0.02, -0.01], jump_second=[0.06, 0.04])
        sig = covariance(p, lam)
        assert np.linalg.eigvalsh(sig).min() > 0
        assert np.linalg.eigvalsh(np.linalg.inv(sig)).min() > 0


class TestSampling:
    @pytest.mark.parametrize("law", ["two_point", "uniform", "lognormal"])
    def test_moments(self, law):
        p = headline(jump_law=law)
        rng = mark_generator(123)
        z = sample_jump(p, 0, rng, size=200_000)
        assert np.all(z > -1.0)
        se_mean = z.std() / np.sqrt(z.size)
        assert abs(z.mean() - (-0.02)) <= 3 * se_mean
        sq = z ** 2
        se_sq = sq.std() / np.sqrt(z.size)
        assert abs(sq.mean() - 0.06) <= 3 * se_sq

    def test_degenerate_law(self):
        p = headline(jump_mean=-0.02, jump_second=0.0004, jump_law="constant")
        rng = mark_generator(5)
        z = sample_jump(p, 0, rng, size=100)
        assert np.all(z == -0.02)

    def test_two_point_support(self):
        p = headline()
        rng = mark_generator(7)
        z = sample_jump(p, 0, rng, size=5000)
        s = np.sqrt(0.06 - 0.02 ** 2)
        assert set(np.round(np.unique(z), 12)) == {
            round(-0.02 - s, 12), round(-0.02 + s, 12)}

    def test_generator_determinism(self):
        p = headline()
        a = sample_jump(p, 0, mark_generator(9), size=100)
        b = sample_jump(p, 0, mark_generator(9), size=100)
        assert np.array_equal(a, b)
