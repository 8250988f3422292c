"""Market model parameters and the shared jump-adjusted algebra.

Assets follow a jump-diffusion whose jumps are scaled by a matrix ``J`` of
factors in [0, 1] and marked by i.i.d. sizes ``Z_l`` supported on
(-1, inf).  Because the jump exposure is linear in ``Z``, every integral
the solver and strategy need reduces to the first two moments of ``Z``:

    covariance(lam)       = sigma sigma^T + sum_l lam_l E[Z_l^2] J_l J_l^T
    gamma_zhat(lam, u)    = (sigma sigma^T + sum_l (u_l+1) lam_l E[Z_l^2] J_l J_l^T,
                             B + sum_l lam_l E[Z_l] u_l J_l)

with ``B = mu - r 1`` the excess-return vector and ``u`` the non-local
ratio vector coming from the solved value-function factor (``u = 0``
recovers the plain covariance and premium).  A sampling law for ``Z`` is
configured separately and used only by the forward wealth simulator; the
solver provably depends on the two moments alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, _rng
from .errors import ConfigurationError, IllConditionedError, ValidationError

CONDITION_LIMIT = 1e12

JUMP_LAWS = ("two_point", "uniform", "lognormal", "constant")

_LAW_IDS = {
    "two_point": _kernels.LAW_TWO_POINT,
    "uniform": _kernels.LAW_UNIFORM,
    "lognormal": _kernels.LAW_LOGNORMAL,
    "constant": _kernels.LAW_CONSTANT,
}


def _law_params(kind: str, mean: float, second: float) -> tuple[float, float]:
    """Per-law parameters matching (E[Z], E[Z^2]) on support (-1, inf)."""
    var = second - mean * mean
    if kind == "two_point":
        s = np.sqrt(var)
        lo = mean - s
        if lo <= -1.0:
            raise ConfigurationError(
                f"two-point law with mean {mean} and second moment {second} "
                f"needs support point {lo:.4f} <= -1", field="jump_law")
        return lo, mean + s
    if kind == "uniform":
        h = np.sqrt(3.0 * var)
        if mean - h <= -1.0:
            raise ConfigurationError(
                f"uniform law with mean {mean} and second moment {second} "
                f"leaves the support (-1, inf)", field="jump_law")
        return mean - h, mean + h
    if kind == "lognormal":
        a1 = 1.0 + mean
        a2 = second + 2.0 * a1 - 1.0
        if a1 <= 0 or a2 <= a1 * a1:
            raise ConfigurationError(
                f"shifted lognormal cannot match mean {mean} and second "
                f"moment {second}", field="jump_law")
        sig2 = np.log(a2 / (a1 * a1))
        return np.log(a1) - 0.5 * sig2, np.sqrt(sig2)
    if kind == "constant":
        if abs(var) > 1e-12 * max(1.0, second):
            raise ConfigurationError(
                "constant law requires second moment == mean^2", field="jump_law")
        if mean <= -1.0:
            raise ConfigurationError("constant jump must exceed -1", field="jump_law")
        return mean, mean
    raise ConfigurationError(f"unknown jump law {kind!r}; choose from {JUMP_LAWS}",
                             field="jump_law")


@dataclass(frozen=True)
class MarketParams:
    """Risky-asset model: rates, volatilities, jump exposures and moments.

    Scalars are promoted to the one-asset, one-component shapes.  ``sigma``
    is k x n (Brownian dimension n), ``J`` is k x m with entries in [0, 1],
    and ``jump_mean`` / ``jump_second`` are the first two moments of the
    i.i.d. jump marks per component.
    """

    r: float
    mu: np.ndarray
    sigma: np.ndarray
    J: np.ndarray
    jump_mean: np.ndarray
    jump_second: np.ndarray
    jump_law: tuple[str, ...] = ("two_point",)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        k = mu.shape[0]
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if sigma.shape[0] != k:
            raise ValidationError(
                f"sigma must have {k} rows, got shape {sigma.shape}", field="sigma")
        J = np.atleast_2d(np.asarray(self.J, dtype=float))
        if J.shape[0] != k:
            raise ValidationError(
                f"J must have {k} rows, got shape {J.shape}", field="J")
        m = J.shape[1]
        jm = np.atleast_1d(np.asarray(self.jump_mean, dtype=float))
        js = np.atleast_1d(np.asarray(self.jump_second, dtype=float))
        if jm.shape != (m,) or js.shape != (m,):
            raise ValidationError(
                f"jump moments must have shape ({m},)", field="jump_mean")
        law = self.jump_law
        if isinstance(law, str):
            law = (law,) * m
        law = tuple(law)
        if len(law) == 1 and m > 1:
            law = law * m
        if len(law) != m:
            raise ValidationError(
                f"jump_law needs one entry (shared) or {m}", field="jump_law")
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "jump_mean", jm)
        object.__setattr__(self, "jump_second", js)
        object.__setattr__(self, "jump_law", law)

        if np.any(J < 0) or np.any(J > 1):
            raise ValidationError("J entries must lie in [0, 1]", field="J")
        if np.any(js < jm * jm - 1e-15):
            raise ValidationError(
                "jump_second must be >= jump_mean^2 (variance nonnegative)",
                field="jump_second")
        eig_min = float(np.linalg.eigvalsh(sigma @ sigma.T).min())
        if eig_min <= 0:
            raise ValidationError(
                f"sigma sigma^T must be positive definite "
                f"(min eigenvalue {eig_min:.3e})", field="sigma")
        for kind, mean, second in zip(law, jm, js):
            _law_params(kind, float(mean), float(second))  # feasibility check

    @property
    def k(self) -> int:
        return self.mu.shape[0]

    @property
    def n(self) -> int:
        return self.sigma.shape[1]

    @property
    def m(self) -> int:
        return self.J.shape[1]

    def diffusion_cov(self) -> np.ndarray:
        """sigma sigma^T."""
        return self.sigma @ self.sigma.T

    def law_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(law ids, param a, param b) per component for the kernels."""
        ids = np.empty(self.m, dtype=np.int64)
        a = np.empty(self.m)
        b = np.empty(self.m)
        for l, (kind, mean, second) in enumerate(
                zip(self.jump_law, self.jump_mean, self.jump_second)):
            ids[l] = _LAW_IDS[kind]
            a[l], b[l] = _law_params(kind, float(mean), float(second))
        return ids, a, b

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "J": self.J.tolist(),
            "jump_mean": self.jump_mean.tolist(),
            "jump_second": self.jump_second.tolist(),
            "jump_law": list(self.jump_law),
        }


def risk_premium(params: MarketParams) -> np.ndarray:
    """Excess return vector mu - r."""
    return params.mu - params.r


def jump_quadratic(params: MarketParams, lam: np.ndarray) -> np.ndarray:
    """Jump contribution to the instantaneous covariance at intensity lam.

    Entry (i, i') is sum_l J_il J_i'l lam_l E[Z_l^2]; positive semidefinite
    and linear in lam.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != (params.m,):
        raise ValidationError(f"lam must have shape ({params.m},)", field="lam")
    weights = lam * params.jump_second
    return (params.J * weights[np.newaxis, :]) @ params.J.T


def covariance(params: MarketParams, lam: np.ndarray) -> np.ndarray:
    """Generalised instantaneous covariance: diffusion plus jump part."""
    return params.diffusion_cov() + jump_quadratic(params, lam)


def gamma_zhat(params: MarketParams, lam: np.ndarray,
               u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Jump-adjusted covariance and premium entering the optimal control.

    ``u`` is the non-local ratio vector; every entry must exceed -1 (the
    value-function bounds guarantee this for ratios of the solved surface).
    With ``u = 0`` this reduces exactly to (covariance, risk premium).
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (params.m,):
        raise ValidationError(f"u must have shape ({params.m},)", field="u")
    if np.any(u <= -1.0):
        raise ValidationError("ratio adjustments must exceed -1", field="u")
    weights = (u + 1.0) * lam * params.jump_second
    gamma = params.diffusion_cov() + (params.J * weights[np.newaxis, :]) @ params.J.T
    zhat = risk_premium(params) + params.J @ (lam * params.jump_mean * u)
    cond = np.linalg.cond(gamma)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedError(
            f"adjusted covariance is numerically singular (cond {cond:.3e})")
    return gamma, zhat


def sample_jump(params: MarketParams, component: int, rng: np.random.Generator,
                size: int | None = None) -> float | np.ndarray:
    """Draw jump marks for one component from its configured law."""
    kind = params.jump_law[component]
    mean = float(params.jump_mean[component])
    second = float(params.jump_second[component])
    a, b = _law_params(kind, mean, second)
    if kind == "two_point":
        u = rng.random(size)
        return np.where(u < 0.5, a, b) if size is not None else (a if u < 0.5 else b)
    if kind == "uniform":
        return rng.uniform(a, b, size)
    if kind == "lognormal":
        return np.exp(a + b * rng.standard_normal(size)) - 1.0
    return a if size is None else np.full(size, a)


def mark_generator(seed: int, *indices: int) -> np.random.Generator:
    """Deterministic generator for jump-mark sampling streams."""
    return _rng.generator(seed, _rng.TAG_JUMP_MARKS, *indices)
