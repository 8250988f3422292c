"""Run configuration: YAML ingestion, dotted-path overrides, validation.

A run config bundles the intensity model, the market, solver resolution,
frontier targets and the sensitivity sweeps into one document that
round-trips through YAML unchanged.  Block validation happens eagerly on
construction and failures carry the offending dotted key path
(e.g. ``hawkes.alpha``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ValidationError
from .gsolver import SolverSettings
from .hawkes import HawkesParams
from .market import MarketParams

#: model parameters of the headline one-asset example
HEADLINE = {
    "r": 0.02, "mu": 0.09, "sigma": 0.20, "J": 1.0,
    "jump_mean": -0.02, "jump_second": 0.06,
    "alpha": 5.0, "beta": 0.1, "lambda_inf": 0.48,
    "horizon": 2.0, "x0": 1.0,
}


@dataclass(frozen=True)
class SweepSpec:
    """One sensitivity sweep: vary one intensity parameter over levels.

    ``tie_lam0`` pins the initial intensity to the swept level (used for
    the reversion-level sweep); ``lam0`` overrides the evaluation point
    (the rate sweeps use 1.0 so frontier differences are visible).
    ``direction`` is the expected variance ordering versus the level.
    """

    param: str
    levels: tuple[float, ...]
    direction: str
    lam0: float | None = None
    tie_lam0: bool = False

    def __post_init__(self):
        if self.param not in ("lambda0", "lambda_inf", "alpha", "beta"):
            raise ValidationError(f"unknown sweep parameter {self.param!r}",
                                  field="param")
        if self.direction not in ("increasing", "decreasing"):
            raise ValidationError("direction must be increasing|decreasing",
                                  field="direction")
        if len(self.levels) < 2:
            raise ValidationError("a sweep needs at least two levels",
                                  field="levels")
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))

    def to_dict(self) -> dict:
        d = {"param": self.param, "levels": list(self.levels),
             "direction": self.direction}
        if self.lam0 is not None:
            d["lam0"] = self.lam0
        if self.tie_lam0:
            d["tie_lam0"] = True
        return d


def default_sweeps() -> tuple[SweepSpec, ...]:
    return (
        SweepSpec("lambda0", (0.1, 0.48, 1.9), "increasing"),
        SweepSpec("lambda_inf", (0.3, 0.48, 0.8), "increasing", tie_lam0=True),
        SweepSpec("alpha", (1.0, 2.0, 5.0), "decreasing", lam0=1.0),
        SweepSpec("beta", (0.1, 0.5, 2.0), "increasing", lam0=1.0),
    )


@dataclass(frozen=True)
class FrontierSettings:
    """Frontier targets and wealth-validation controls."""

    x0: float = 1.0
    xi_start: float | None = None  # default: the risk-free endowment
    xi_stop: float = 1.5
    xi_count: int = 26
    validate_xi: float = 1.2
    wealth_paths: int = 100_000
    wealth_dt: float = 0.002

    def __post_init__(self):
        if self.x0 <= 0:
            raise ValidationError("x0 must be positive", field="x0")
        if self.xi_count < 2:
            raise ValidationError("xi_count must be at least 2", field="xi_count")
        if self.wealth_paths < 2:
            raise ValidationError("wealth_paths must be at least 2",
                                  field="wealth_paths")
        if self.wealth_dt <= 0:
            raise ValidationError("wealth_dt must be positive", field="wealth_dt")

    def xi_grid(self, r: float, horizon: float) -> np.ndarray:
        start = self.xi_start
        if start is None:
            start = self.x0 * math.exp(r * horizon)
        if self.xi_stop < start:
            raise ValidationError("xi_stop below the grid start", field="xi_stop")
        return np.linspace(start, self.xi_stop, self.xi_count)

    def to_dict(self) -> dict:
        return {"x0": self.x0, "xi_start": self.xi_start,
                "xi_stop": self.xi_stop, "xi_count": self.xi_count,
                "validate_xi": self.validate_xi,
                "wealth_paths": self.wealth_paths, "wealth_dt": self.wealth_dt}


@dataclass(frozen=True)
class OutputSettings:
    directory: str | None = None
    formats: tuple[str, ...] = ("csv",)

    def to_dict(self) -> dict:
        return {"directory": self.directory, "formats": list(self.formats)}


@dataclass(frozen=True)
class RunConfig:
    hawkes: HawkesParams
    market: MarketParams
    solver: SolverSettings
    frontier: FrontierSettings = field(default_factory=FrontierSettings)
    sweeps: tuple[SweepSpec, ...] = field(default_factory=default_sweeps)
    output: OutputSettings = field(default_factory=OutputSettings)

    def __post_init__(self):
        if self.hawkes.m != self.market.m:
            raise ValidationError(
                f"hawkes has {self.hawkes.m} jump components, market has "
                f"{self.market.m}", field="hawkes.lambda0")

    def to_dict(self) -> dict:
        return {
            "hawkes": self.hawkes.to_dict(),
            "market": self.market.to_dict(),
            "solver": self.solver.to_dict(),
            "frontier": self.frontier.to_dict(),
            "sweeps": [s.to_dict() for s in self.sweeps],
            "output": self.output.to_dict(),
        }


def default_config() -> RunConfig:
    """The headline example: one asset, one jump component."""
    t1 = HEADLINE
    return RunConfig(
        hawkes=HawkesParams(lambda0=t1["lambda_inf"], lambda_inf=t1["lambda_inf"],
                            alpha=t1["alpha"], beta=t1["beta"]),
        market=MarketParams(r=t1["r"], mu=t1["mu"], sigma=t1["sigma"], J=t1["J"],
                            jump_mean=t1["jump_mean"],
                            jump_second=t1["jump_second"]),
        solver=SolverSettings(horizon=t1["horizon"]),
        frontier=FrontierSettings(x0=t1["x0"]),
    )


def _build(path: str, ctor, kwargs: dict):
    try:
        return ctor(**kwargs)
    except ValidationError as err:
        key = f"{path}.{err.field}" if err.field else path
        raise ValidationError(f"{key}: {err}", field=key) from None
    except TypeError as err:
        raise ValidationError(f"{path}: {err}", field=path) from None


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig; errors name the offending key path."""
    if not isinstance(data, dict):
        raise ValidationError("config root must be a mapping")
    known = {"hawkes", "market", "solver", "frontier", "sweeps", "output"}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config block(s): {sorted(unknown)}")
    for block in ("hawkes", "market"):
        if block not in data:
            raise ValidationError(f"missing config block {block!r}", field=block)
    hawkes = _build("hawkes", HawkesParams, dict(data["hawkes"]))
    mkt = dict(data["market"])
    if isinstance(mkt.get("jump_law"), list):
        mkt["jump_law"] = tuple(mkt["jump_law"])
    market = _build("market", MarketParams, mkt)
    solver = _build("solver", SolverSettings, dict(data.get("solver", {})))
    fr = _build("frontier", FrontierSettings, dict(data.get("frontier", {})))
    sweeps_data = data.get("sweeps")
    if sweeps_data is None:
        sweeps = default_sweeps()
    else:
        sweeps = tuple(
            _build(f"sweeps[{i}]", SweepSpec,
                   {**sw, "levels": tuple(sw.get("levels", ()))})
            for i, sw in enumerate(sweeps_data))
    out_data = dict(data.get("output", {}))
    if isinstance(out_data.get("formats"), list):
        out_data["formats"] = tuple(out_data["formats"])
    output = _build("output", OutputSettings, out_data)
    return _build("config", RunConfig,
                  dict(hawkes=hawkes, market=market, solver=solver,
                       frontier=fr, sweeps=sweeps, output=output))


def load_config(path) -> RunConfig:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return config_from_dict(data or {})


def dump_config(config: RunConfig, path=None) -> str:
    """Serialise to YAML (sorted keys, round-trip stable)."""
    text = yaml.safe_dump(config.to_dict(), sort_keys=True,
                          default_flow_style=False)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply ``key.path=value`` overrides onto a raw config dict.

    Values are parsed as YAML, so numbers, lists and booleans type
    naturally; intermediate mappings are created as needed.
    """
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not of form key=value")
        key, raw = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ValidationError(f"override {item!r} has an empty key")
        node = data
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = yaml.safe_load(raw)
    return data
