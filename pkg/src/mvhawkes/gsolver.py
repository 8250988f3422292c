"""Backward Monte Carlo solver for the value-function factor surface.

The factor ``gtilde(t, lam) = exp(g(t, lam))`` satisfies a non-local PDE
whose probabilistic representation is

    gtilde(t, lam) = 1 - E[ int_t^T gtilde(s, lam(s)) * q(s, lam(s)) ds ],

where ``q = Zhat^T Gamma^{-1} Zhat`` is the jump-adjusted squared market
price of risk and the non-locality enters through the post-jump ratios
``gtilde(s, lam + beta_col_l) / gtilde(s, lam)``.  The solver discretises
time uniformly, initialises the terminal slice at one, and walks backward:
each grid node launches a batch of Euler-Bernoulli intensity paths, and
the time integral is accumulated by a left Riemann sum (trapezoid behind a
flag) using the already-solved later slices.  Spatial grids widen with the
slice index so post-jump lookups stay covered, up to a configurable cap
beyond which evaluation clamps to the boundary.

The deterministic-intensity (no-excitation) reduction has the closed form

    g(t) = - int_t^T B^T Gamma_P(lam_P(s))^{-1} B ds,

implemented in :func:`poisson_g`; it doubles as the solver's oracle.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import _kernels, _rng
from ._hashing import params_hash
from .errors import (CapabilityError, IllConditionedError, NumericalError,
                     ResourceError, SolverDivergenceError, StepSizeError,
                     ValidationError)
from .hawkes import HawkesParams, _steps_for
from .market import MarketParams, covariance, risk_premium

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

#: memory budget for the value/se arrays of one surface (bytes)
MEMORY_BUDGET = 2 * 1024 ** 3


@dataclass(frozen=True)
class SolverSettings:
    """Grid and Monte Carlo configuration of the backward solver.

    ``n_paths`` is the number of intensity paths per grid node.  With
    ``crn`` (common random numbers) the same path noise is reused across
    the nodes of one time slice, which sharpens monotonicity of the solved
    surface without biasing any single node; per-node independent streams
    are available by turning it off.
    """

    horizon: float = 2.0
    dt: float = 0.02
    dlam: float = 0.01
    lam_lo: float = 0.1
    lam_hi: float = 2.0
    n_paths: int = 5000
    seed: int = 12345
    growth_cap: float = 4.0
    trapezoid: bool = False
    crn: bool = True

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValidationError("horizon must be positive", field="horizon")
        if self.lam_lo <= 0:
            raise ValidationError("lam_lo must be positive", field="lam_lo")
        if self.lam_hi <= self.lam_lo:
            raise ValidationError("lam_hi must exceed lam_lo", field="lam_hi")
        if self.dlam <= 0:
            raise ValidationError("dlam must be positive", field="dlam")
        if self.n_paths < 2:
            raise ValidationError("n_paths must be at least 2", field="n_paths")
        if self.growth_cap < 1.0:
            raise ValidationError("growth_cap must be >= 1", field="growth_cap")
        _steps_for(self.horizon, self.dt)
        _steps_for(self.lam_hi - self.lam_lo, self.dlam)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon, "dt": self.dt, "dlam": self.dlam,
            "lam_lo": self.lam_lo, "lam_hi": self.lam_hi,
            "n_paths": self.n_paths, "seed": self.seed,
            "growth_cap": self.growth_cap, "trapezoid": self.trapezoid,
            "crn": self.crn,
        }


class GTable:
    """Solved factor surface on a time-indexed, variable-width grid.

    Values and Monte Carlo standard errors are stored flat with per-slice
    offsets; slice ``s`` holds ``ns[s]`` nodes per dimension on the uniform
    axis ``lam_lo + i * dlam`` (row-major for two components).
    """

    def __init__(self, times, ns, offsets, values, ses, lam_lo, dlam, meta):
        self.times = np.asarray(times, dtype=float)
        self.ns = np.asarray(ns, dtype=np.int64)
        self.offsets = np.asarray(offsets, dtype=np.int64)
        self.values = np.asarray(values, dtype=float)
        self.ses = np.asarray(ses, dtype=float)
        self.lam_lo = float(lam_lo)
        self.dlam = float(dlam)
        self.meta = dict(meta)

    # -- geometry ----------------------------------------------------------

    @property
    def n_slices(self) -> int:
        return self.times.shape[0]

    @property
    def m(self) -> int:
        return self.ns.shape[1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def axis(self, s: int, dim: int = 0) -> np.ndarray:
        return self.lam_lo + self.dlam * np.arange(self.ns[s, dim])

    def slice_values(self, s: int) -> np.ndarray:
        flat = self.values[self.offsets[s]:self.offsets[s + 1]]
        return flat.reshape(tuple(self.ns[s])) if self.m > 1 else flat

    def slice_ses(self, s: int) -> np.ndarray:
        flat = self.ses[self.offsets[s]:self.offsets[s + 1]]
        return flat.reshape(tuple(self.ns[s])) if self.m > 1 else flat

    def snap_time(self, t: float) -> int:
        s = int(round(float(t) / self.dt))
        return min(max(s, 0), self.n_slices - 1)

    # -- evaluation --------------------------------------------------------

    def eval(self, t: float, lam, with_se: bool = False):
        """Multilinear interpolation in lam on the slice nearest to ``t``.

        Out-of-grid coordinates clamp to the boundary (a warning is logged
        with the clamp count).
        """
        if self.values.size == 0:
            raise NumericalError("empty surface")
        t = float(t)
        if t < -1e-12 or t > self.times[-1] + 1e-12:
            raise ValidationError("t outside the solved horizon", field="t")
        s = self.snap_time(t)
        single = np.asarray(lam, dtype=float).ndim <= 1
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        if lam.shape[-1] != self.m:
            raise ValidationError(f"lam must have {self.m} components", field="lam")
        vals = self.slice_values(s)
        ses = self.slice_ses(s)
        pos = (lam - self.lam_lo) / self.dlam
        hi = (self.ns[s] - 1).astype(float)
        clamped = int(np.sum((pos < 0) | (pos > hi)))
        if clamped:
            logger.warning("%d lambda coordinate(s) outside the slice grid were "
                           "clamped to the boundary", clamped)
        pos = np.clip(pos, 0.0, hi)
        idx = np.minimum(pos.astype(np.int64), (self.ns[s] - 2).clip(min=0))
        w = pos - idx
        if self.m == 1:
            i0 = idx[:, 0]
            w0 = w[:, 0]
            if vals.shape[0] == 1:
                out = np.full(lam.shape[0], vals[0])
                out_se = np.full(lam.shape[0], ses[0])
            else:
                out = vals[i0] * (1 - w0) + vals[i0 + 1] * w0
                out_se = np.sqrt((ses[i0] * (1 - w0)) ** 2 + (ses[i0 + 1] * w0) ** 2)
        else:
            i0, i1 = idx[:, 0], idx[:, 1]
            w0, w1 = w[:, 0], w[:, 1]
            out = (vals[i0, i1] * (1 - w0) * (1 - w1)
                   + vals[i0, i1 + 1] * (1 - w0) * w1
                   + vals[i0 + 1, i1] * w0 * (1 - w1)
                   + vals[i0 + 1, i1 + 1] * w0 * w1)
            out_se = np.sqrt((ses[i0, i1] * (1 - w0) * (1 - w1)) ** 2
                             + (ses[i0, i1 + 1] * (1 - w0) * w1) ** 2
                             + (ses[i0 + 1, i1] * w0 * (1 - w1)) ** 2
                             + (ses[i0 + 1, i1 + 1] * w0 * w1) ** 2)
        if single:
            return (float(out[0]), float(out_se[0])) if with_se else float(out[0])
        return (out, out_se) if with_se else out

    def g0(self, lam0) -> tuple[float, float]:
        """Surface value and standard error at time zero."""
        return self.eval(0.0, np.atleast_1d(lam0), with_se=True)

    # -- diagnostics -------------------------------------------------------

    def check_bounds(self) -> dict:
        """Range diagnostics: all values must lie in (0, 1]."""
        return {
            "min": float(self.values.min()),
            "max": float(self.values.max()),
            "positive": bool(self.values.min() > 0.0),
            "at_most_one": bool(self.values.max() <= 1.0),
        }

    def check_monotone(self, n_se: float = 3.0) -> dict:
        """Count monotonicity violations beyond ``n_se`` combined errors.

        The surface should be nondecreasing in time and in each intensity
        coordinate; adjacent-node decreases are tolerated when within
        ``n_se`` times the root-sum-square of the two Monte Carlo errors.
        """
        viol_lam = 0
        worst_lam = 0.0
        viol_t = 0
        worst_t = 0.0
        for s in range(self.n_slices):
            vals = self.slice_values(s)
            ses = self.slice_ses(s)
            for axis in range(self.m):
                dv = np.diff(vals, axis=axis)
                tol = n_se * np.sqrt(
                    np.take(ses, np.arange(ses.shape[axis] - 1), axis=axis) ** 2
                    + np.take(ses, np.arange(1, ses.shape[axis]), axis=axis) ** 2)
                bad = dv < -tol
                viol_lam += int(bad.sum())
                if bad.any():
                    worst_lam = max(worst_lam, float((-dv - tol)[bad].max()))
        for s in range(self.n_slices - 1):
            a = self.slice_values(s)
            b = self.slice_values(s + 1)
            sa = self.slice_ses(s)
            sb = self.slice_ses(s + 1)
            common = tuple(slice(0, min(na, nb))
                           for na, nb in zip(self.ns[s], self.ns[s + 1]))
            dv = b[common] - a[common]
            tol = n_se * np.sqrt(sa[common] ** 2 + sb[common] ** 2)
            bad = dv < -tol
            viol_t += int(bad.sum())
            if bad.any():
                worst_t = max(worst_t, float((-dv - tol)[bad].max()))
        return {
            "lam_violations": viol_lam, "lam_worst_excess": worst_lam,
            "time_violations": viol_t, "time_worst_excess": worst_t,
            "monotone": viol_lam == 0 and viol_t == 0,
        }

    def pde_residual(self, hawkes: HawkesParams, market: MarketParams,
                     time_stride: int = 5, lam_stride: int = 5) -> dict:
        """Discrete residual of the non-local equation at interior nodes.

        Central differences for the derivatives of ``g = log(gtilde)``;
        single-component surfaces only.  Reported, not asserted: the
        residual mixes the scheme's O(dt) bias with amplified Monte Carlo
        noise from differencing.
        """
        if self.m != 1:
            raise CapabilityError("residual check implemented for one component")
        res = []
        dt = self.dt
        for s in range(1, self.n_slices - 1, time_stride):
            n_here = int(min(self.ns[s - 1, 0], self.ns[s, 0], self.ns[s + 1, 0]))
            # keep the post-jump lookup inside the slice grid
            n_shift = int(np.floor(n_here - 1 - hawkes.beta[0, 0] / self.dlam))
            n_here = max(3, min(n_here, n_shift))
            axis = self.axis(s)[:n_here]
            v_prev = np.log(self.slice_values(s - 1)[:n_here])
            v_here = np.log(self.slice_values(s)[:n_here])
            v_next = np.log(self.slice_values(s + 1)[:n_here])
            g_t = (v_next - v_prev) / (2 * dt)
            g_l = np.gradient(v_here, self.dlam)
            lam = axis
            shifted = self.eval(self.times[s],
                                (lam + hawkes.beta[0, 0])[:, None])
            ratio = shifted / np.exp(v_here) - 1.0
            gam = (market.diffusion_cov()[0, 0]
                   + (ratio + 1.0) * lam * market.jump_second[0]
                   * market.J[0, 0] ** 2)
            zh = risk_premium(market)[0] + lam * market.jump_mean[0] * ratio * market.J[0, 0]
            quad = zh * zh / gam
            r = (g_t + g_l * hawkes.alpha[0] * (hawkes.lambda_inf[0] - lam)
                 + ratio * lam - quad)
            inner = slice(1, max(1, n_here - 1), lam_stride)
            res.append(r[inner])
        r = np.concatenate(res) if res else np.array([])
        return {
            "n_points": int(r.size),
            "mean_abs": float(np.mean(np.abs(r))) if r.size else float("nan"),
            "rms": float(np.sqrt(np.mean(r ** 2))) if r.size else float("nan"),
            "max_abs": float(np.max(np.abs(r))) if r.size else float("nan"),
        }

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        header = json.dumps({"format_version": FORMAT_VERSION, "meta": self.meta},
                            sort_keys=True)
        with open(path, "wb") as fh:
            np.savez_compressed(
                fh, header=np.frombuffer(header.encode(), dtype=np.uint8),
                times=self.times, ns=self.ns, offsets=self.offsets,
                values=self.values, ses=self.ses,
                lam_lo=np.float64(self.lam_lo), dlam=np.float64(self.dlam))

    @classmethod
    def load(cls, path) -> "GTable":
        with np.load(path) as data:
            header = json.loads(bytes(data["header"]).decode())
            if header.get("format_version") != FORMAT_VERSION:
                raise ValidationError(
                    f"unsupported surface file version {header.get('format_version')}")
            return cls(times=data["times"], ns=data["ns"], offsets=data["offsets"],
                       values=data["values"], ses=data["ses"],
                       lam_lo=float(data["lam_lo"]), dlam=float(data["dlam"]),
                       meta=header["meta"])

    def to_csv(self, path_or_buf) -> None:
        """Long-format CSV: one row per (time, node) with value and error."""
        close = False
        if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
            fh = open(path_or_buf, "w")
            close = True
        else:
            fh = path_or_buf
        try:
            cols = [f"lambda_{d + 1}" for d in range(self.m)]
            fh.write(",".join(["t"] + cols + ["gtilde", "se"]) + "\n")
            for s in range(self.n_slices):
                t = self.times[s]
                vals = self.slice_values(s).ravel()
                ses = self.slice_ses(s).ravel()
                if self.m == 1:
                    coords = self.axis(s)[:, None]
                else:
                    a0, a1 = self.axis(s, 0), self.axis(s, 1)
                    coords = np.stack(np.meshgrid(a0, a1, indexing="ij"),
                                      axis=-1).reshape(-1, 2)
                for row, (v, e) in enumerate(zip(vals, ses)):
                    parts = [f"{t:.17g}"] + [f"{c:.17g}" for c in coords[row]]
                    parts += [f"{v:.17g}", f"{e:.17g}"]
                    fh.write(",".join(parts) + "\n")
        finally:
            if close:
                fh.close()


def _slice_node_counts(hawkes: HawkesParams, settings: SolverSettings,
                       n_slices: int) -> np.ndarray:
    """Per-slice, per-dimension node counts with capped envelope growth.

    Later slices are looked up along paths launched from earlier ones, so
    their grids must extend above ``lam_hi`` by the jump headroom gained
    per step (row sums of the excitation matrix) plus one post-jump shift
    for the non-local lookup, capped at ``growth_cap * lam_hi``.
    """
    m = hawkes.m
    base = round((settings.lam_hi - settings.lam_lo) / settings.dlam) + 1
    row_sum = hawkes.beta.sum(axis=1)
    row_max = hawkes.beta.max(axis=1) if m > 0 else np.zeros(m)
    ns = np.empty((n_slices, m), dtype=np.int64)
    cap = settings.growth_cap * settings.lam_hi
    for s in range(n_slices):
        for d in range(m):
            env = settings.lam_hi
            if s > 0 and (row_sum[d] > 0 or row_max[d] > 0):
                env = min(settings.lam_hi + s * row_sum[d] + row_max[d], cap)
            extra = max(0.0, env - settings.lam_hi)
            ns[s, d] = base + int(np.ceil(extra / settings.dlam - 1e-9))
    return ns


def solve_g(hawkes: HawkesParams, market: MarketParams,
            settings: SolverSettings) -> GTable:
    """Solve the factor surface backward in time; deterministic in the seed.

    Raises SolverDivergenceError when a node value leaves (0, 1] by more
    than three Monte Carlo standard errors (values above one but within
    noise are clamped to one), StepSizeError when the Bernoulli scheme is
    invalid at the configured ``dt``, and CapabilityError for three or
    more jump components.
    """
    if hawkes.m != market.m:
        raise ValidationError(
            f"hawkes has {hawkes.m} components but market expects {market.m}")
    if hawkes.m > 2:
        raise CapabilityError(
            "grid solver supports one or two jump components; higher "
            "dimensions are refused (cost grows with the dense product grid)")
    if np.any(hawkes.alpha * settings.dt >= 1.0):
        raise StepSizeError(
            "alpha * dt must stay below 1 for the Euler recursion; "
            f"use a smaller dt than {settings.dt}")
    n_steps = _steps_for(settings.horizon, settings.dt)
    n_slices = n_steps + 1
    times = np.linspace(0.0, settings.horizon, n_slices)
    ns = _slice_node_counts(hawkes, settings, n_slices)
    nodes_per_slice = ns.prod(axis=1)
    offsets = np.zeros(n_slices + 1, dtype=np.int64)
    np.cumsum(nodes_per_slice, out=offsets[1:])
    total = int(offsets[-1])
    if 16 * total > MEMORY_BUDGET:
        raise ResourceError(
            f"surface would need {16 * total / 1e9:.2f} GB "
            f"(> {MEMORY_BUDGET / 1e9:.2f} GB budget); coarsen the grid")
    if hawkes.m == 2:
        warnings.warn(
            f"two-component solve: {total} grid nodes x {settings.n_paths} "
            "paths; expect a long runtime (cost scales with the dense "
            "product grid)", stacklevel=2)

    values = np.zeros(total)
    ses = np.zeros(total)
    values[offsets[n_slices - 1]:offsets[n_slices]] = 1.0  # terminal condition

    bprem = risk_premium(market)
    ssq = market.diffusion_cov()
    scalar_case = hawkes.m == 1 and market.k == 1
    for i in range(n_slices - 2, -1, -1):
        n_nodes = int(nodes_per_slice[i])
        out_mean = np.empty(n_nodes)
        out_se = np.empty(n_nodes)
        out_status = np.empty(n_nodes, dtype=np.int64)
        slice_key = np.uint64(_rng.stream_key(settings.seed, _rng.TAG_SOLVER, i))
        if scalar_case:
            _kernels.solve_slice_m1k1(
                i, n_nodes, n_slices, settings.n_paths, settings.dt,
                settings.lam_lo, settings.dlam,
                float(hawkes.alpha[0]), float(hawkes.lambda_inf[0]),
                float(hawkes.beta[0, 0]),
                float(ssq[0, 0]), float(bprem[0]),
                float(market.J[0, 0] * market.jump_mean[0]),
                float(market.J[0, 0] ** 2 * market.jump_second[0]),
                ns, offsets, values, slice_key, settings.crn,
                settings.trapezoid, out_mean, out_se, out_status)
        else:
            _kernels.solve_slice_general(
                i, n_nodes, n_slices, settings.n_paths, settings.dt,
                settings.lam_lo, settings.dlam,
                hawkes.alpha, hawkes.lambda_inf, hawkes.beta,
                ssq, bprem, market.J, market.jump_mean, market.jump_second,
                ns, offsets, values, slice_key, settings.crn,
                settings.trapezoid, out_mean, out_se, out_status)
        if np.any(out_status == _kernels.STATUS_STEP_TOO_LARGE):
            raise StepSizeError(
                f"lambda * dt exceeded 1 at t={times[i]:.4g}; "
                f"use a smaller dt than {settings.dt}")
        if np.any(out_status == _kernels.STATUS_SINGULAR):
            raise IllConditionedError(
                f"adjusted covariance became singular at t={times[i]:.4g}")
        high = out_mean > 1.0
        if np.any(high):
            excess = out_mean[high] - 1.0
            if np.any(excess > 3.0 * out_se[high]):
                raise SolverDivergenceError(
                    f"surface value {out_mean[high].max():.6f} exceeds 1 beyond "
                    f"Monte Carlo noise at t={times[i]:.4g}")
            out_mean[high] = 1.0
        if np.any(out_mean <= 0.0):
            raise SolverDivergenceError(
                f"surface value {out_mean.min():.6f} is not positive at "
                f"t={times[i]:.4g}; the scheme diverged")
        values[offsets[i]:offsets[i + 1]] = out_mean
        ses[offsets[i]:offsets[i + 1]] = out_se
        logger.debug("slice %d/%d solved (%d nodes)", i, n_slices - 1, n_nodes)

    meta = {
        "settings": settings.to_dict(),
        "hawkes": hawkes.to_dict(),
        "market": market.to_dict(),
        "hawkes_hash": params_hash(hawkes.to_dict()),
        "market_hash": params_hash(market.to_dict()),
        "scheme": {
            "paths": "euler-bernoulli",
            "integral": "trapezoid" if settings.trapezoid else "left-riemann",
            "interpolation": "linear-clamped",
            "rng": "splitmix64-counter",
            "kernel": "m1k1" if scalar_case else "general",
            "crn": settings.crn,
        },
    }
    return GTable(times=times, ns=ns, offsets=offsets, values=values, ses=ses,
                  lam_lo=settings.lam_lo, dlam=settings.dlam, meta=meta)


def table_hash(hawkes: HawkesParams, market: MarketParams,
               settings: SolverSettings) -> str:
    """Cache key of a solve: exactly the inputs that influence the surface.

    The initial intensity is only an evaluation point, never a solver
    input, so sweeps over it share one cached surface.
    """
    return params_hash({
        "format": FORMAT_VERSION,
        "hawkes_surface": {
            "alpha": hawkes.alpha.tolist(),
            "lambda_inf": hawkes.lambda_inf.tolist(),
            "beta": hawkes.beta.tolist(),
        },
        "market": market.to_dict(),
        "settings": settings.to_dict(),
    })


def eval_g(table: GTable, t: float, lam) -> float | np.ndarray:
    """Interpolated surface value at (t, lam); see :meth:`GTable.eval`."""
    return table.eval(t, lam)


class PoissonG:
    """Closed-form factor for deterministic intensity (no excitation).

    ``lam_path`` may be a constant (scalar or length-m vector) or a
    callable ``t -> intensity vector``; the integrand is the squared
    market price of risk under the plain generalised covariance.
    """

    def __init__(self, market: MarketParams, lam_path, horizon: float):
        if horizon <= 0:
            raise ValidationError("horizon must be positive", field="horizon")
        self.market = market
        self.horizon = float(horizon)
        if callable(lam_path):
            self._fn = lambda s: np.broadcast_to(
                np.asarray(lam_path(s), dtype=float).ravel(), (market.m,))
            self._constant = None
        else:
            lam = np.broadcast_to(np.atleast_1d(np.asarray(lam_path, dtype=float)),
                                  (market.m,))
            if np.any(lam <= 0):
                raise ValidationError("lam_path must be positive", field="lam_path")
            self._fn = lambda s: lam
            self._constant = lam
        bprem = risk_premium(market)
        self._rate = lambda s: float(
            bprem @ np.linalg.solve(covariance(market, self._fn(s)), bprem))
        for s in (0.0, 0.5 * self.horizon, self.horizon):
            lam_s = self._fn(s)
            if np.any(lam_s <= 0):
                raise ValidationError("lam_path must be positive on [0, T]",
                                      field="lam_path")

    def __call__(self, t: float) -> float:
        t = float(t)
        if t < 0 or t > self.horizon + 1e-12:
            raise ValidationError("t outside [0, horizon]", field="t")
        if t >= self.horizon:
            return 0.0
        if self._constant is not None:
            return -(self.horizon - t) * self._rate(0.0)
        val, abserr = quad(self._rate, t, self.horizon, limit=200)
        if not np.isfinite(val) or abserr > max(1e-9, 1e-7 * abs(val)):
            raise NumericalError(
                f"quadrature failed (estimate {val}, error {abserr})")
        return -val

    def gtilde(self, t: float) -> float:
        return float(np.exp(self(t)))


def poisson_g(market: MarketParams, lam_path, horizon: float) -> PoissonG:
    """Closed-form ``t -> g(t)`` for the deterministic-intensity reduction."""
    return PoissonG(market, lam_path, horizon)
