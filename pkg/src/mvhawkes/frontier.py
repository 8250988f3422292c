"""Efficient strategy, efficient frontier, and forward wealth validation.

With ``g0 = gtilde(0, lam0)`` from the solved factor surface, the minimum
terminal-wealth variance at target mean ``xi >= x0 e^{rT}`` and the dual
multiplier are

    Var[X(T)] = g0 / (1 - g0) * (x0 e^{rT} - xi)^2,
    theta     = g0 / (1 - g0) * (x0 e^{rT} - xi),

attained by the feedback strategy

    pi(t) = -Gamma(t, lam)^{-1} Zhat(t, lam) * (X(t-) - (xi - theta) e^{-r(T-t)}).

The deterministic-intensity market admits the same formulas with
``g0 = exp(-int_0^T B^T Gamma_P^{-1} B dt)`` and zero ratio adjustments.
``simulate_wealth`` integrates the wealth equation forward under the
strategy (exact event times, sampled jump marks, compensator drift applied
continuously) and reports sample statistics for validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, _rng
from .errors import (BlowupError, EventCapError, InvalidGError,
                     ValidationError)
from .gsolver import GTable, poisson_g
from .hawkes import EVENT_CAP, HawkesParams
from .market import MarketParams, gamma_zhat, risk_premium

#: wealth paths beyond this magnitude are flagged as numerically blown up
BLOWUP_LIMIT = 1e12

#: abort when more than this fraction of paths blow up
BLOWUP_FRACTION = 1e-3


def _check_g0(g0: float) -> float:
    g0 = float(g0)
    if not (0.0 < g0 < 1.0):
        raise InvalidGError(
            f"factor value {g0} outside (0, 1); the surface solve failed or "
            "the market is degenerate")
    return g0


def _check_xi(xi: float, x0: float, r: float, horizon: float) -> float:
    xi = float(xi)
    floor = x0 * math.exp(r * horizon)
    if xi < floor * (1.0 - 1e-12):
        raise ValidationError(
            f"target mean {xi} below the risk-free endowment {floor:.6f}",
            field="xi")
    return xi


def theta_star(g0: float, x0: float, r: float, horizon: float,
               xi: float) -> float:
    """Dual multiplier of the mean constraint; nonpositive for xi above
    the risk-free endowment."""
    g0 = _check_g0(g0)
    xi = _check_xi(xi, x0, r, horizon)
    return g0 / (1.0 - g0) * (x0 * math.exp(r * horizon) - xi)


@dataclass(frozen=True)
class FrontierPoint:
    """One point of the frontier: target mean, multiplier, variance."""

    xi: float
    theta_star: float
    variance: float
    g0: float

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


def efficient_frontier(g0: float, x0: float, r: float, horizon: float,
                       xi_list) -> list[FrontierPoint]:
    """Minimum variance per target mean; quadratic in the mean shortfall."""
    g0 = _check_g0(g0)
    out = []
    for xi in np.atleast_1d(np.asarray(xi_list, dtype=float)):
        theta = theta_star(g0, x0, r, horizon, float(xi))
        gap = x0 * math.exp(r * horizon) - float(xi)
        out.append(FrontierPoint(xi=float(xi), theta_star=theta,
                                 variance=g0 / (1.0 - g0) * gap * gap, g0=g0))
    return out


def poisson_frontier(market: MarketParams, lam_path, x0: float, r: float,
                     horizon: float, xi_list) -> list[FrontierPoint]:
    """Frontier in the deterministic-intensity market, in closed form."""
    g0 = math.exp(poisson_g(market, lam_path, horizon)(0.0))
    return efficient_frontier(g0, x0, r, horizon, xi_list)


@dataclass
class StrategyField:
    """Feedback strategy field: linear in the shifted wealth.

    ``gtable`` supplies the non-local ratio adjustments; ``None`` means the
    deterministic-intensity strategy with zero adjustments (the plain
    precision-times-premium rule).  ``hawkes`` carries the intensity
    dynamics the ratios refer to (its excitation columns are the post-jump
    shifts).
    """

    market: MarketParams
    hawkes: HawkesParams
    theta_star: float
    xi: float
    horizon: float
    gtable: GTable | None = None

    def ratio_adjustments(self, t: float, lam: np.ndarray) -> np.ndarray:
        if self.gtable is None:
            return np.zeros(self.market.m)
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        base = self.gtable.eval(t, lam)
        shifted = np.array([
            self.gtable.eval(t, lam + self.hawkes.beta[:, l])
            for l in range(self.market.m)])
        return shifted / base - 1.0

    def pi(self, t: float, x: float, lam) -> np.ndarray:
        """Dollar allocation to each risky asset at state (t, x, lam)."""
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        u = self.ratio_adjustments(t, lam)
        gamma, zhat = gamma_zhat(self.market, lam, u)
        shift = (self.xi - self.theta_star) * math.exp(
            -self.market.r * (self.horizon - t))
        return -np.linalg.solve(gamma, zhat) * (float(x) - shift)


@dataclass(frozen=True)
class WealthStats:
    """Terminal-wealth sample statistics with standard errors."""

    mean: float
    variance: float
    se_mean: float
    se_variance: float
    n_paths: int
    n_blowups: int


def simulate_wealth(strategy: StrategyField, hawkes: HawkesParams,
                    market: MarketParams, x0: float, n_paths: int,
                    dt: float = 0.002, seed: int = 0) -> WealthStats:
    """Forward-simulate terminal wealth under the strategy.

    Exact event times by thinning, Euler steps of at most ``dt`` between
    them on the discounted wealth (risk-free growth is exact, so the
    zero-exposure strategy reproduces the deterministic endowment path),
    jump marks freshly sampled from the configured laws.  Per-path streams
    derive from (seed, path index); aggregation uses exact summation, so
    results are independent of path scheduling.
    """
    if n_paths < 2:
        raise ValidationError("n_paths must be at least 2", field="n_paths")
    if dt <= 0 or dt > strategy.horizon:
        raise ValidationError("dt must lie in (0, horizon]", field="dt")
    if hawkes.m != market.m:
        raise ValidationError("hawkes and market component counts differ")
    use_table = strategy.gtable is not None
    if use_table:
        table = strategy.gtable
        tab_args = (table.n_slices, table.dt, table.lam_lo, table.dlam,
                    table.ns, table.offsets, table.values)
    else:
        tab_args = (1, 1.0, 1.0, 1.0, np.ones((1, market.m), dtype=np.int64),
                    np.array([0, 1], dtype=np.int64), np.ones(1))
    law_id, law_a, law_b = market.law_arrays()
    key = np.uint64(_rng.stream_key(seed, _rng.TAG_WEALTH_DIFFUSION))
    out_xt = np.empty(n_paths)
    out_status = np.empty(n_paths, dtype=np.int64)
    _kernels.wealth_terminal(
        n_paths, float(x0), market.r, strategy.horizon, float(dt),
        strategy.xi - strategy.theta_star, EVENT_CAP,
        hawkes.lambda0, hawkes.lambda_inf, hawkes.alpha, hawkes.beta,
        market.diffusion_cov(), market.sigma, risk_premium(market),
        market.J, market.jump_mean, market.jump_second,
        law_id, law_a, law_b,
        use_table, *tab_args,
        key, out_xt, out_status)
    if np.any(out_status == _kernels.STATUS_EVENT_CAP):
        raise EventCapError(
            f"event cap {EVENT_CAP} exceeded in a wealth path; the intensity "
            "parameters are likely supercritical")
    blown = int(np.sum(out_status == _kernels.STATUS_BLOWUP))
    if blown > BLOWUP_FRACTION * n_paths:
        raise BlowupError(
            f"{blown} of {n_paths} wealth paths exceeded {BLOWUP_LIMIT:.0e}")
    xt = out_xt[out_status == _kernels.STATUS_OK]
    n = xt.size
    mean = math.fsum(xt) / n
    centred = xt - mean
    m2 = math.fsum(centred ** 2) / n
    m4 = math.fsum(centred ** 4) / n
    variance = m2 * n / (n - 1)
    se_mean = math.sqrt(m2 / n)
    se_var = math.sqrt(max(m4 - m2 * m2, 0.0) / n)
    return WealthStats(mean=mean, variance=variance, se_mean=se_mean,
                       se_variance=se_var, n_paths=n, n_blowups=blown)
