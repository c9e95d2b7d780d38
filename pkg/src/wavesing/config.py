"""Run configuration: a schema-versioned TOML document validated by pydantic.

Defaults that depend on other fields (stencil order and ``k_max`` depend on
the dimension; the box length on the data) are resolved at validation time,
so ``RunConfig.model_dump()`` is the complete set of settings actually used.
"""

from __future__ import annotations

import copy
import itertools
from typing import Any, Literal

import tomli
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator, model_validator

from .data import DEFAULT_PROFILE, PROFILES, suggested_domain_length
from .shock1d import SHOCK_PROFILES
from .weights import MAX_POWER

SCHEMA_VERSION = 1
MODES = ("ode_blowup", "baseline_compare", "shock", "certify_weights", "sweep")


class ConfigError(ValueError):
    """Invalid configuration; ``problems`` lists one message per defect."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class WeightConfig(_Strict):
    family: Literal["power_inverse", "power_shifted", "exponential"] = "power_shifted"
    power: int | None = Field(default=None, ge=1, le=MAX_POWER)
    alpha_hint: float = Field(default=1.0, gt=0)

    @model_validator(mode="after")
    def _power(self):
        if self.family == "exponential":
            if self.power is not None:
                raise ValueError("the exponential family takes no power")
        elif self.power is None:
            object.__setattr__(self, "power", 1)
        return self


class GridConfig(_Strict):
    dimension: int = Field(default=1, ge=1, le=3)
    points: int = Field(default=1024, ge=8, le=4096)
    length: float | None = Field(default=None, gt=0)


class DataConfig(_Strict):
    family: Literal["bump", "homogeneous", "zero", "snapshot"] = "bump"
    profile: str = DEFAULT_PROFILE
    kappa: float = Field(default=1.0, ge=-0.25)
    lam: float = Field(default=8.0, ge=1.0, alias="lambda")
    spatial_amplitude: float = 1.0
    spatial_radius: float = Field(default=8.0, gt=0)
    delta: float = Field(default=1.0, gt=-0.25)
    psi0_path: str | None = None
    psi_i_paths: list[str] | None = None
    phi0_path: str | None = None
    support_radius: float | None = Field(default=None, gt=0)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @field_validator("profile")
    @classmethod
    def _profile(cls, v):
        if v not in PROFILES:
            raise ValueError(f"unknown profile {v!r}; expected one of {sorted(PROFILES)}")
        return v

    @model_validator(mode="after")
    def _snapshot_paths(self):
        if self.family == "snapshot" and (self.psi0_path is None or not self.psi_i_paths):
            raise ValueError("snapshot data need psi0_path and psi_i_paths")
        return self


class IntegratorConfig(_Strict):
    cfl: float = Field(default=0.4, gt=0, le=1.0)
    order: Literal[2, 4] | None = None
    ifact_stop: float = Field(default=1e-2, gt=0, lt=1)
    t_max: float | None = Field(default=None, gt=0)
    k_max: int | None = Field(default=None, ge=2, le=5)
    friction_orders: list[int] = Field(default_factory=lambda: [0])
    ifact_fraction: float = Field(default=0.1, gt=0, le=1)
    fixed_dt: float | None = Field(default=None, gt=0)
    u_blowup: float = Field(default=1e3, gt=1)
    invariant_constant: float = Field(default=10.0, gt=0)
    check_domain: bool = True

    @field_validator("friction_orders")
    @classmethod
    def _orders(cls, v):
        if not v or any(not 0 <= k <= 2 for k in v):
            raise ValueError("friction_orders must be a nonempty list drawn from 0, 1, 2")
        return sorted(set(v))


class ShockConfig(_Strict):
    profile: str = "sin4"
    epsilon_target: float = Field(default=0.01, gt=0, lt=0.5)
    points: int = Field(default=2048, ge=64, le=65536)
    mu_floor: float = Field(default=0.05, gt=0, lt=1)
    t_max: float = Field(default=2.0, gt=0)
    cfl: float = Field(default=0.4, gt=0, le=1.0)
    invariant_constant: float = Field(default=10.0, gt=0)

    @field_validator("profile")
    @classmethod
    def _profile(cls, v):
        if v not in SHOCK_PROFILES:
            raise ValueError(f"unknown shock profile {v!r}; expected one of {sorted(SHOCK_PROFILES)}")
        return v


class WeightSpec(_Strict):
    family: Literal["power_inverse", "power_shifted", "exponential"]
    power: int | None = Field(default=None, ge=1, le=MAX_POWER)
    alpha_hint: float = Field(default=1.0, gt=0)


class CertifyConfig(_Strict):
    weights: list[WeightSpec] | None = None
    y_max: float = Field(default=1e4, ge=2)
    samples: int = Field(default=2000, ge=100)
    tol: float = Field(default=1e-8, gt=0)


class SweepConfig(_Strict):
    base_mode: Literal["ode_blowup", "baseline_compare", "shock"] = "ode_blowup"
    axes: dict[str, list[Any]] = Field(default_factory=dict)
    workers: int = Field(default=1, ge=1, le=64)

    @field_validator("axes")
    @classmethod
    def _axes(cls, v):
        for key, values in v.items():
            if "." not in key:
                raise ValueError(f"sweep axis {key!r} must be a dotted path like 'data.lambda'")
            if not values:
                raise ValueError(f"sweep axis {key!r} has no values")
        return v


class OutputConfig(_Strict):
    directory: str = "wavesing_out"
    snapshot_times: list[float] = Field(default_factory=list)
    snapshot_final: bool = True
    snapshot_format: Literal["bin", "csv"] = "bin"
    figures: bool = True

    @field_validator("snapshot_times")
    @classmethod
    def _times(cls, v):
        if any(t < 0 for t in v):
            raise ValueError("snapshot times must be nonnegative")
        return sorted(v)


class RunConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    mode: Literal["ode_blowup", "baseline_compare", "shock", "certify_weights", "sweep"]
    seed: int = 0
    weight: WeightConfig = Field(default_factory=WeightConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    shock: ShockConfig = Field(default_factory=ShockConfig)
    certify: CertifyConfig = Field(default_factory=CertifyConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    _raw: dict = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def _resolve(self):
        dim = self.grid.dimension
        integ = self.integrator
        if integ.order is None:
            integ.order = 4 if dim == 1 else 2
        if integ.k_max is None:
            integ.k_max = 5 if dim == 1 else 2
        if self.grid.length is None and self.data.family in ("bump", "homogeneous", "zero"):
            if self.data.family == "bump":
                a_star = max(self.data.kappa, 0.0) or 1.0
                length = suggested_domain_length(self.data.lam, self.data.spatial_radius, a_star)
            else:
                length = 10.0
            self.grid.length = float(length)
        if self.mode == "sweep" and not self.sweep.axes:
            raise ValueError("sweep mode needs at least one entry in sweep.axes")
        return self

    def dump(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


def _format_errors(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        msg = e["msg"]
        if e["type"] == "extra_forbidden":
            msg = "unknown key"
        out.append(f"{loc}: {msg}")
    return out


def config_from_dict(raw: dict) -> RunConfig:
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None
    cfg._raw = copy.deepcopy(raw)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse TOML text into a validated :class:`RunConfig`."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as err:
        raise ConfigError([f"malformed TOML: {err}"]) from None
    return config_from_dict(raw)


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_config(text)


def _set_path(tree: dict, dotted: str, value):
    node = tree
    parts = dotted.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def expand_sweep(cfg: RunConfig) -> list[tuple[str, RunConfig]]:
    """Cartesian product of the sweep axes applied to the user's settings.

    Axes override the original document rather than the resolved one, so
    defaults that depend on a swept value are derived again for each run.
    """
    base = copy.deepcopy(cfg._raw) if cfg._raw else cfg.dump()
    base.pop("sweep", None)
    base["mode"] = cfg.sweep.base_mode
    keys = list(cfg.sweep.axes)
    runs = []
    for i, combo in enumerate(itertools.product(*(cfg.sweep.axes[k] for k in keys))):
        tree = copy.deepcopy(base)
        for k, v in zip(keys, combo):
            _set_path(tree, k, v)
        label = "_".join(f"{k.split('.')[-1]}={v}" for k, v in zip(keys, combo))
        runs.append((f"run{i:03d}_{label}", config_from_dict(tree)))
    return runs
