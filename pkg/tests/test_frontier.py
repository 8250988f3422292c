import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvhawkes import (FrontierPoint, HawkesParams, InvalidGError,
                      MarketParams, StrategyField, ValidationError,
                      efficient_frontier, poisson_frontier, poisson_g,
                      simulate_wealth, theta_star)

RF = math.exp(0.04)  # risk-free endowment of x0=1 over the horizon


class TestThetaStar:
    def test_zero_at_floor(self):
        assert theta_star(0.8672, 1.0, 0.02, 2.0, RF) == 0.0

    def test_reference_value(self):
        got = theta_star(0.8672, 1.0, 0.02, 2.0, 1.2)
        assert got == pytest.approx(0.8672 / 0.1328 * (RF - 1.2), rel=1e-12)
        assert got == pytest.approx(-1.0395, abs=2e-4)
        assert got <= 0.0

    def test_vanishing_factor_limit(self):
        assert theta_star(1e-12, 1.0, 0.02, 2.0, 1.2) == pytest.approx(0.0,
                                                                       abs=1e-10)

    @pytest.mark.parametrize("g0", [0.0, 1.0, -0.5, 1.3])
    def test_invalid_factor(self, g0):
        with pytest.raises(InvalidGError):
            theta_star(g0, 1.0, 0.02, 2.0, 1.2)

    def test_target_below_floor(self):
        with pytest.raises(ValidationError):
            theta_star(0.8, 1.0, 0.02, 2.0, 1.0)


class TestFrontier:
    def test_zero_variance_at_floor(self):
        pt = efficient_frontier(0.8672, 1.0, 0.02, 2.0, [RF])[0]
        assert pt.variance == 0.0
        assert pt.theta_star == 0.0

    def test_reference_value(self):
        pt = efficient_frontier(0.8672, 1.0, 0.02, 2.0, [1.2])[0]
        assert pt.variance == pytest.approx(0.1655, abs=2e-4)
        assert pt.sd == math.sqrt(pt.variance)

    @given(g_low=st.floats(0.05, 0.9), bump=st.floats(0.01, 0.09),
           xi=st.floats(1.05, 1.5))
    @settings(max_examples=40, deadline=None)
    def test_variance_increases_with_factor(self, g_low, bump, xi):
        lo = efficient_frontier(g_low, 1.0, 0.02, 2.0, [xi])[0].variance
        hi = efficient_frontier(g_low + bump, 1.0, 0.02, 2.0, [xi])[0].variance
        assert hi > lo

    @given(g0=st.floats(0.05, 0.95), xi=st.floats(1.05, 1.5))
    @settings(max_examples=40, deadline=None)
    def test_cost_identity(self, g0, xi):
        # Var + theta^2 equals the optimal quadratic cost g0 gap^2/(1-g0)^2
        pt = efficient_frontier(g0, 1.0, 0.02, 2.0, [xi])[0]
        gap = RF - xi
        cost = g0 * gap * gap / (1.0 - g0) ** 2
        assert pt.variance + pt.theta_star ** 2 == pytest.approx(cost,
                                                                 rel=1e-12)

    def test_quadratic_in_gap(self):
        pts = efficient_frontier(0.8, 1.0, 0.02, 2.0, [1.1, 1.2])
        gaps = [RF - 1.1, RF - 1.2]
        ratio = pts[1].variance / pts[0].variance
        assert ratio == pytest.approx((gaps[1] / gaps[0]) ** 2, rel=1e-12)


class TestPoissonFrontier:
    def test_headline_values(self, headline_market):
        pt = poisson_frontier(headline_market, 0.48, 1.0, 0.02, 2.0, [1.2])[0]
        assert pt.g0 == pytest.approx(0.867238, abs=1e-6)
        assert pt.variance == pytest.approx(0.16554, abs=1e-5)

    def test_higher_rate_worse_frontier(self, headline_market):
        vs = [poisson_frontier(headline_market, lam, 1.0, 0.02, 2.0,
                               [1.2])[0].variance
              for lam in (0.3, 0.48, 0.8)]
        assert vs[0] < vs[1] < vs[2]

    def test_zero_premium_rejected(self):
        flat = MarketParams(r=0.02, mu=0.02, sigma=0.2, J=1.0,
                            jump_mean=-0.02, jump_second=0.06)
        with pytest.raises(InvalidGError):
            poisson_frontier(flat, 0.48, 1.0, 0.02, 2.0, [1.2])

    def test_special_case_of_solved_pipeline(self, headline_market,
                                             poisson_hawkes):
        # the full pipeline with excitation off reproduces the closed form
        from mvhawkes import SolverSettings, solve_g
        st = SolverSettings(horizon=2.0, dt=0.02, dlam=0.05, lam_lo=0.1,
                            lam_hi=2.0, n_paths=50, seed=6)
        table = solve_g(poisson_hawkes, headline_market, st)
        g0 = table.eval(0.0, [0.48])
        solved = efficient_frontier(g0, 1.0, 0.02, 2.0, [1.1, 1.2, 1.4])
        closed = poisson_frontier(headline_market, 0.48, 1.0, 0.02, 2.0,
                                  [1.1, 1.2, 1.4])
        for a, b in zip(solved, closed):
            assert a.variance == pytest.approx(b.variance, rel=0.02)


class TestStrategyField:
    def make(self, headline_market, poisson_hawkes, xi=1.2):
        g0 = poisson_g(headline_market, 0.48, 2.0).gtilde(0.0)
        th = theta_star(g0, 1.0, 0.02, 2.0, xi)
        return StrategyField(market=headline_market, hawkes=poisson_hawkes,
                             theta_star=th, xi=xi, horizon=2.0), g0, th

    def test_linear_in_shifted_wealth(self, headline_market, poisson_hawkes):
        strat, _, th = self.make(headline_market, poisson_hawkes)
        shift = (1.2 - th) * math.exp(-0.02 * 1.0)
        x1 = shift + 0.05
        x2 = shift + 0.10
        pi1 = strat.pi(1.0, x1, [0.48])
        pi2 = strat.pi(1.0, x2, [0.48])
        assert np.allclose(pi2, 2.0 * pi1, rtol=1e-12)
        assert np.allclose(strat.pi(1.0, shift, [0.48]), 0.0)

    def test_closed_form_coefficient(self, headline_market, poisson_hawkes):
        strat, _, th = self.make(headline_market, poisson_hawkes)
        x = 1.0
        shift = (1.2 - th) * math.exp(-0.02 * 2.0)
        got = strat.pi(0.0, x, [0.48])[0]
        assert got == pytest.approx(-(0.07 / 0.0688) * (x - shift), rel=1e-12)

    def test_flat_table_matches_closed_form(self, headline_market,
                                            poisson_hawkes, quick_table):
        # without excitation the post-jump ratio vanishes identically, so a
        # table-backed strategy must agree with the closed-form one
        strat, _, th = self.make(headline_market, poisson_hawkes)
        tbl = StrategyField(market=headline_market, hawkes=poisson_hawkes,
                            theta_star=th, xi=1.2, horizon=2.0,
                            gtable=quick_table)
        assert tbl.ratio_adjustments(0.5, [0.48]) == pytest.approx([0.0])
        assert np.allclose(tbl.pi(0.5, 1.1, [0.48]),
                           strat.pi(0.5, 1.1, [0.48]))


class TestSimulateWealth:
    def test_zero_risk_exact(self, headline_market, poisson_hawkes):
        xi0 = RF
        strat = StrategyField(market=headline_market, hawkes=poisson_hawkes,
                              theta_star=0.0, xi=xi0, horizon=2.0)
        stats = simulate_wealth(strat, poisson_hawkes, headline_market, 1.0,
                                300, dt=0.01, seed=4)
        assert stats.mean == pytest.approx(xi0, abs=1e-13)
        assert stats.variance == pytest.approx(0.0, abs=1e-25)

    def test_poisson_oracle(self, headline_market, poisson_hawkes):
        g0 = poisson_g(headline_market, 0.48, 2.0).gtilde(0.0)
        th = theta_star(g0, 1.0, 0.02, 2.0, 1.2)
        strat = StrategyField(market=headline_market, hawkes=poisson_hawkes,
                              theta_star=th, xi=1.2, horizon=2.0)
        stats = simulate_wealth(strat, poisson_hawkes, headline_market, 1.0,
                                20_000, dt=0.002, seed=3)
        var_ref = g0 / (1 - g0) * (RF - 1.2) ** 2
        assert abs(stats.mean - 1.2) <= 3 * stats.se_mean
        assert abs(stats.variance - var_ref) <= 3 * stats.se_variance
        assert stats.n_blowups == 0

    def test_table_strategy_self_consistent(self, headline_hawkes,
                                            headline_market, quick_table):
        g0, _ = quick_table.g0(0.48)
        th = theta_star(g0, 1.0, 0.02, 2.0, 1.2)
        strat = StrategyField(market=headline_market, hawkes=headline_hawkes,
                              theta_star=th, xi=1.2, horizon=2.0,
                              gtable=quick_table)
        stats = simulate_wealth(strat, headline_hawkes, headline_market, 1.0,
                                20_000, dt=0.002, seed=5)
        var_ref = g0 / (1 - g0) * (RF - 1.2) ** 2
        assert abs(stats.mean - 1.2) <= 3.5 * stats.se_mean
        assert abs(stats.variance - var_ref) <= 3.5 * stats.se_variance

    def test_determinism(self, headline_market, poisson_hawkes):
        strat = StrategyField(market=headline_market, hawkes=poisson_hawkes,
                              theta_star=-1.0, xi=1.2, horizon=2.0)
        a = simulate_wealth(strat, poisson_hawkes, headline_market, 1.0, 500,
                            dt=0.01, seed=8)
        b = simulate_wealth(strat, poisson_hawkes, headline_market, 1.0, 500,
                            dt=0.01, seed=8)
        c = simulate_wealth(strat, poisson_hawkes, headline_market, 1.0, 500,
                            dt=0.01, seed=9)
        assert a == b
        assert a != c

    def test_validation(self, headline_market, poisson_hawkes):
        strat = StrategyField(market=headline_market, hawkes=poisson_hawkes,
                              theta_star=0.0, xi=RF, horizon=2.0)
        with pytest.raises(ValidationError):
            simulate_wealth(strat, poisson_hawkes, headline_market, 1.0, 1)
        with pytest.raises(ValidationError):
            simulate_wealth(strat, poisson_hawkes, headline_market, 1.0, 100,
                            dt=0.0)
