import numpy as np
import pytest

from mvhawkes import (HawkesParams, MarketParams, SolverSettings, solve_g)

HEADLINE_MARKET = dict(r=0.02, mu=0.09, sigma=0.20, J=1.0,
                     jump_mean=-0.02, jump_second=0.06)


@pytest.fixture(scope="session")
def headline_market() -> MarketParams:
    return MarketParams(**HEADLINE_MARKET)


@pytest.fixture(scope="session")
def headline_hawkes() -> HawkesParams:
    return HawkesParams(lambda0=0.48, lambda_inf=0.48, alpha=5.0, beta=0.1)


@pytest.fixture(scope="session")
def poisson_hawkes() -> HawkesParams:
    """No-excitation reduction with constant intensity 0.48."""
    return HawkesParams(lambda0=0.48, lambda_inf=0.48, alpha=5.0, beta=0.0)


@pytest.fixture(scope="session")
def quick_settings() -> SolverSettings:
    return SolverSettings(horizon=2.0, dt=0.05, dlam=0.05, lam_lo=0.1,
                          lam_hi=2.0, n_paths=300, seed=20240)


@pytest.fixture(scope="session")
def quick_table(headline_hawkes, headline_market, quick_settings):
    """Reduced-resolution solve shared by the unit tests."""
    return solve_g(headline_hawkes, headline_market, quick_settings)
