"""Multivariate mutually exciting point process with exponential decay.

The intensity of component ``l`` mean-reverts at speed ``alpha_l`` towards
``lambda_inf_l`` and jumps up by ``beta[l, j]`` whenever component ``j``
fires:

    d lam_l = alpha_l (lambda_inf_l - lam_l) dt + sum_j beta[l, j] dN_j.

Two simulators are provided: an exact one (Ogata thinning with the
analytically evaluated intensity) and the Euler scheme with Bernoulli jump
indicators used by the grid solver.  ``expected_intensity`` solves the
first-moment ODE and serves as an independent oracle for both.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _kernels, _rng
from .errors import EventCapError, StepSizeError, ValidationError

#: hard per-path safety cap; exceeding it aborts with EventCapError
EVENT_CAP = 1_000_000

#: relative tolerance for checking that a horizon divides into whole steps
DT_DIVISIBILITY_RTOL = 1e-9


def _as_vector(x, m: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.shape != (m,):
        raise ValidationError(f"{name} must have shape ({m},), got {arr.shape}",
                              field=name)
    return arr


@dataclass(frozen=True)
class HawkesParams:
    """Intensity-model parameters; scalars are promoted for one component.

    ``beta[l, j]`` is the increment of component ``l``'s intensity when
    component ``j`` fires, so column ``j`` is the excitation profile of a
    type-``j`` event.
    """

    lambda0: np.ndarray
    lambda_inf: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        lam0 = np.atleast_1d(np.asarray(self.lambda0, dtype=float))
        m = lam0.shape[0]
        object.__setattr__(self, "lambda0", lam0)
        object.__setattr__(self, "lambda_inf",
                           _as_vector(self.lambda_inf, m, "lambda_inf"))
        object.__setattr__(self, "alpha", _as_vector(self.alpha, m, "alpha"))
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        if beta.shape != (m, m):
            raise ValidationError(f"beta must have shape ({m}, {m}), got {beta.shape}",
                                  field="beta")
        object.__setattr__(self, "beta", beta)
        if not np.all(self.lambda0 > 0):
            raise ValidationError("lambda0 must be strictly positive", field="lambda0")
        if not np.all(self.alpha > 0):
            raise ValidationError("alpha must be strictly positive", field="alpha")
        if not np.all(self.lambda_inf >= 0):
            raise ValidationError("lambda_inf must be nonnegative", field="lambda_inf")
        if not np.all(self.beta >= 0):
            raise ValidationError("beta entries must be nonnegative", field="beta")
        rho = self.branching_spectral_radius()
        if rho >= 1.0:
            warnings.warn(
                f"branching-ratio spectral radius {rho:.3f} >= 1: the process "
                "may be explosive (event cap still applies)", stacklevel=2)

    @property
    def m(self) -> int:
        return self.lambda0.shape[0]

    def branching_matrix(self) -> np.ndarray:
        """Expected-offspring matrix ``beta @ diag(1/alpha)``."""
        return self.beta / self.alpha[np.newaxis, :]

    def branching_spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.branching_matrix()))))

    def to_dict(self) -> dict:
        return {
            "lambda0": self.lambda0.tolist(),
            "lambda_inf": self.lambda_inf.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
        }


@dataclass
class IntensityPath:
    """One realised trajectory: event times with component marks, plus an
    optional uniform grid of left-continuous intensity values."""

    times: np.ndarray
    marks: np.ndarray
    horizon: float
    grid_times: np.ndarray | None = None
    grid_intensity: np.ndarray | None = None

    def counts(self, t: float | np.ndarray, m: int | None = None) -> np.ndarray:
        """Cumulative event counts N_l(t) (right-continuous), shape (..., m)."""
        t = np.asarray(t, dtype=float)
        if m is None:
            m = int(self.marks.max()) + 1 if self.marks.size else 1
        out = np.zeros(t.shape + (m,))
        for l in range(m):
            tl = self.times[self.marks == l]
            out[..., l] = np.searchsorted(tl, t, side="right")
        return out


def _check_horizon(horizon: float) -> float:
    horizon = float(horizon)
    if horizon <= 0:
        raise ValidationError("horizon must be positive", field="horizon")
    return horizon


def _steps_for(horizon: float, dt: float) -> int:
    if dt <= 0 or dt > horizon:
        raise ValidationError("dt must satisfy 0 < dt <= horizon", field="dt")
    n = round(horizon / dt)
    if n < 1 or abs(n * dt - horizon) > DT_DIVISIBILITY_RTOL * horizon:
        raise ValidationError(
            f"horizon {horizon} is not an integer multiple of dt {dt}", field="dt")
    return int(n)


def intensity_at(params: HawkesParams, path: IntensityPath,
                 t: float | np.ndarray) -> np.ndarray:
    """Left-continuous intensity reconstructed from the event list.

    Evaluates the closed form: exponential relaxation of the initial value
    plus one exponentially decayed kick per past event (events strictly
    before ``t`` count).  Shape (..., m).
    """
    t = np.asarray(t, dtype=float)
    flat_t = np.atleast_1d(t).ravel()
    dec = np.exp(-flat_t[:, None] * params.alpha[None, :])
    lam = dec * params.lambda0[None, :] + (1.0 - dec) * params.lambda_inf[None, :]
    for s, mark in zip(path.times, path.marks):
        live = flat_t > s
        if not np.any(live):
            continue
        kick = params.beta[:, mark][None, :]
        lam[live] += kick * np.exp(-(flat_t[live, None] - s) * params.alpha[None, :])
    return lam.reshape(t.shape + (params.m,)) if t.shape else lam[0]


def integrated_intensity(params: HawkesParams, path: IntensityPath,
                         horizon: float | None = None) -> np.ndarray:
    """Exact compensator ``int_0^T lam_l(u) du`` per component.

    Piecewise closed form between events; used as the oracle in the
    martingale check of the compensated counts.
    """
    horizon = path.horizon if horizon is None else float(horizon)
    lam = params.lambda0.copy()
    total = np.zeros(params.m)
    t_prev = 0.0
    breakpoints = list(zip(path.times, path.marks)) + [(horizon, -1)]
    for s, mark in breakpoints:
        if s > horizon:
            s = horizon
        dt_seg = s - t_prev
        if dt_seg > 0:
            decay = np.exp(-params.alpha * dt_seg)
            total += params.lambda_inf * dt_seg + (lam - params.lambda_inf) * (
                1.0 - decay) / params.alpha
            lam = params.lambda_inf + (lam - params.lambda_inf) * decay
        if mark >= 0:
            lam = lam + params.beta[:, mark]
        t_prev = s
        if t_prev >= horizon:
            break
    return total


def simulate_exact(params: HawkesParams, horizon: float, seed: int,
                   grid_dt: float | None = None) -> IntensityPath:
    """Exact simulation on [0, horizon] by Ogata thinning.

    Deterministic given ``seed``.  With ``grid_dt`` the left-continuous
    intensity is also evaluated on the uniform grid via the closed form.
    """
    horizon = _check_horizon(horizon)
    key = _rng.stream_key(seed, _rng.TAG_EXACT_SIM)
    times, marks, overflow = _kernels.hawkes_thinning(
        params.lambda0, params.lambda_inf, params.alpha, params.beta,
        horizon, np.uint64(key), EVENT_CAP)
    if overflow:
        raise EventCapError(
            f"event cap {EVENT_CAP} exceeded before t={horizon}; the parameter "
            "set is likely supercritical (check the branching spectral radius)")
    path = IntensityPath(times=times, marks=marks, horizon=horizon)
    if grid_dt is not None:
        n = _steps_for(horizon, grid_dt)
        path.grid_times = np.linspace(0.0, horizon, n + 1)
        path.grid_intensity = intensity_at(params, path, path.grid_times)
    return path


def simulate_discretized(params: HawkesParams, horizon: float, dt: float,
                         seed: int) -> IntensityPath:
    """Euler scheme with one Bernoulli jump indicator per component per step.

    Matches the grid dynamics used inside the backward solver; events are
    recorded at the end of the step in which they occur.  Raises
    StepSizeError when some ``lam_l * dt`` exceeds one.
    """
    horizon = _check_horizon(horizon)
    n = _steps_for(horizon, dt)
    key = _rng.stream_key(seed, _rng.TAG_DISCRETE_SIM)
    grid, times, marks, ok = _kernels.euler_bernoulli_path(
        params.lambda0, params.lambda_inf, params.alpha, params.beta,
        float(dt), n, np.uint64(key))
    if not ok:
        raise StepSizeError(
            f"lambda * dt exceeded 1 during the Bernoulli scheme; "
            f"use a smaller dt than {dt}")
    return IntensityPath(times=times, marks=marks, horizon=horizon,
                         grid_times=np.linspace(0.0, horizon, n + 1),
                         grid_intensity=grid)


def expected_intensity(params: HawkesParams, t: float | np.ndarray) -> np.ndarray:
    """E[lam(t)] from the first-moment linear ODE.

    The drift gives d E/dt = alpha*lambda_inf + (beta - diag(alpha)) E,
    solved exactly with the matrix exponential of the augmented affine
    system.  Shape (..., m).
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValidationError("t must be nonnegative", field="t")
    m = params.m
    aug = np.zeros((m + 1, m + 1))
    aug[:m, :m] = params.beta - np.diag(params.alpha)
    aug[:m, m] = params.alpha * params.lambda_inf
    state0 = np.append(params.lambda0, 1.0)
    out = np.empty((t_arr.size, m))
    for i, ti in enumerate(t_arr.ravel()):
        out[i] = (expm(aug * ti) @ state0)[:m]
    shape = np.asarray(t, dtype=float).shape
    return out.reshape(shape + (m,)) if shape else out[0]
