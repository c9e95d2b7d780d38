"""Initial data families and their size parameters.

Data consist of the initial time derivative ``psi0_init`` and the initial
spatial gradient ``psi_i_init`` of the potential.  Bump data are built from a
radial profile ``g(s)`` of ``s = |x|**2 / R**2``, supported in ``s <= 1``:

    psi0_init(x)   = kappa * g(|x|^2 / lam^2)
    phi0(x)        = (amp / lam) * g(|x|^2 / R^2)
    psi_i_init(x)  = d_i phi0(x)        (closed form, not a stencil)

Dilating ``lam`` keeps the amplitude of ``psi0_init`` fixed while its
derivatives shrink, and scales the gradient data by ``1 / lam``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fields import Grid, ScalarField, read_snapshot

#: Lower bound on the initial time derivative.
PSI0_FLOOR = -0.25
#: Values at or above this size outside the stated support are rejected.
SUPPORT_TOL = 1e-14


class DataConstraintError(ValueError):
    pass


class SupportOverflowError(DataConstraintError):
    pass


# --------------------------------------------------------------------------
# radial profiles
# --------------------------------------------------------------------------


def _poly(m):
    def g(s):
        t = np.clip(1.0 - s, 0.0, None)
        return t**m

    def dg(s):
        t = np.clip(1.0 - s, 0.0, None)
        return -m * t ** (m - 1)

    return g, dg


def _smooth_g(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return out


def _smooth_dg(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = s < 1.0
    si = s[inside]
    out[inside] = -np.exp(1.0 - 1.0 / (1.0 - si)) / (1.0 - si) ** 2
    return out


def _gauss_g(s):
    return np.exp(-4.0 * np.asarray(s, dtype=float)) * _smooth_g(s)


def _gauss_dg(s):
    s = np.asarray(s, dtype=float)
    e = np.exp(-4.0 * s)
    return e * (_smooth_dg(s) - 4.0 * _smooth_g(s))


@dataclass(frozen=True)
class RadialProfile:
    """Profile ``g(s)`` with ``g(0) = 1 = max g`` and ``g = 0`` for ``s >= 1``."""

    name: str
    g: object = field(repr=False)
    dg: object = field(repr=False)


PROFILES = {
    "poly8": RadialProfile("poly8", *_poly(8)),
    "poly4": RadialProfile("poly4", *_poly(4)),
    "smooth": RadialProfile("smooth", _smooth_g, _smooth_dg),
    "gauss_cutoff": RadialProfile("gauss_cutoff", _gauss_g, _gauss_dg),
}
DEFAULT_PROFILE = "poly8"


def get_profile(name: str) -> RadialProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown profile {name!r}; expected one of {sorted(PROFILES)}") from None


# --------------------------------------------------------------------------
# containers
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DataSizeParams:
    eps_ring: float
    a_ring: float
    a_star: float
    terms: dict = field(default_factory=dict)
    breakdown: dict = field(default_factory=dict)

    @property
    def eps_times_a(self) -> float:
        return self.eps_ring * self.a_ring

    @property
    def eps_over_a_star(self) -> float:
        return self.eps_ring / self.a_star if self.a_star > 0 else math.inf

    @property
    def self_consistent(self) -> bool:
        """False when the weighted gradient term, evaluated at ``eps_ring``, still exceeds it.

        That happens when ``sqrt(eps) * |grad psi0|_L2 > 1`` at every candidate
        value, so no finite ``eps`` satisfies the size assumption.
        """
        return self.terms.get("weighted_grad_psi0", 0.0) <= self.eps_ring * (1.0 + 1e-9)

    def to_dict(self) -> dict:
        return {
            "eps_ring": self.eps_ring,
            "a_ring": self.a_ring,
            "a_star": self.a_star,
            "eps_times_a": self.eps_times_a,
            "eps_over_a_star": self.eps_over_a_star,
            "self_consistent": self.self_consistent,
            "terms": dict(self.terms),
            "breakdown": dict(self.breakdown),
        }


@dataclass(frozen=True)
class InitialData:
    grid: Grid
    psi0_init: ScalarField
    psi_i_init: tuple
    params: DataSizeParams
    phi0: ScalarField | None = None
    support_radius: float | None = None
    family: str = "custom"
    settings: dict = field(default_factory=dict)

    @property
    def compact(self) -> bool:
        return self.support_radius is not None

    @property
    def psi_stack(self) -> np.ndarray:
        return np.stack([f.values for f in self.psi_i_init])

    @property
    def min_psi0(self) -> float:
        return float(np.min(self.psi0_init.values))


def _check_floor(psi0: np.ndarray):
    low = float(np.min(psi0))
    if low < PSI0_FLOOR:
        raise DataConstraintError(f"initial time derivative has minimum {low:.6g} < -1/4")


def _check_support(grid: Grid, arrays, radius: float):
    if radius >= 0.5 * grid.domain_length:
        raise SupportOverflowError(
            f"support radius {radius:.6g} does not fit in a box of side {grid.domain_length:.6g}"
        )
    outside = grid.radius > radius
    for a in arrays:
        if np.any(np.abs(a[outside]) >= SUPPORT_TOL):
            raise SupportOverflowError(f"data exceed {SUPPORT_TOL} outside radius {radius:.6g}")


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------


def make_bump_data(
    profile: str | RadialProfile,
    kappa: float,
    lam: float,
    grid: Grid,
    spatial_amplitude: float = 1.0,
    spatial_radius: float = 8.0,
) -> InitialData:
    """Dilated bump family; see the module docstring for the formulas."""
    prof = get_profile(profile) if isinstance(profile, str) else profile
    if lam < 1:
        raise ValueError("lambda must be at least 1")
    if spatial_radius <= 0:
        raise ValueError("spatial_radius must be positive")
    if kappa < PSI0_FLOOR:
        raise DataConstraintError(f"kappa = {kappa} puts the minimum below -1/4")
    r2 = grid.radius**2
    psi0 = kappa * prof.g(r2 / lam**2)
    rad2 = spatial_radius**2
    s = r2 / rad2
    scale = spatial_amplitude / lam
    phi0 = scale * prof.g(s)
    dg = prof.dg(s)
    psi_i = [scale * dg * 2.0 * x / rad2 for x in grid.coordinates]

    _check_floor(psi0)
    support = max(lam, spatial_radius)
    _check_support(grid, [psi0, phi0, *psi_i], support)

    psi0_f = ScalarField(grid, psi0)
    psi_f = tuple(ScalarField(grid, p) for p in psi_i)
    params = measure_parameters_raw(grid, psi0, np.stack(psi_i))
    return InitialData(
        grid=grid,
        psi0_init=psi0_f,
        psi_i_init=psi_f,
        params=params,
        phi0=ScalarField(grid, phi0),
        support_radius=float(support),
        family="bump",
        settings={
            "profile": prof.name,
            "kappa": float(kappa),
            "lambda": float(lam),
            "spatial_amplitude": float(spatial_amplitude),
            "spatial_radius": float(spatial_radius),
        },
    )


def homogeneous_data(delta: float, grid: Grid) -> InitialData:
    """Spatially constant data; not compactly supported."""
    if not delta > PSI0_FLOOR:
        raise DataConstraintError(f"delta = {delta} must exceed -1/4")
    psi0 = np.full(grid.shape, float(delta))
    zeros = np.zeros((grid.dimension,) + grid.shape)
    return InitialData(
        grid=grid,
        psi0_init=ScalarField(grid, psi0),
        psi_i_init=tuple(ScalarField(grid, z) for z in zeros),
        params=measure_parameters_raw(grid, psi0, zeros),
        phi0=ScalarField(grid, np.zeros(grid.shape)),
        support_radius=None,
        family="homogeneous",
        settings={"delta": float(delta)},
    )


def zero_data(grid: Grid) -> InitialData:
    z = np.zeros(grid.shape)
    zs = np.zeros((grid.dimension,) + grid.shape)
    return InitialData(
        grid=grid,
        psi0_init=ScalarField(grid, z),
        psi_i_init=tuple(ScalarField(grid, a) for a in zs),
        params=measure_parameters_raw(grid, z, zs),
        phi0=ScalarField(grid, z),
        support_radius=0.0,
        family="zero",
    )


def data_from_snapshots(psi0_path, psi_i_paths, phi0_path=None, support_radius=None) -> InitialData:
    """Load arbitrary data written in the field snapshot format."""
    psi0 = read_snapshot(psi0_path)
    grid = psi0.grid
    psi = tuple(read_snapshot(p) for p in psi_i_paths)
    if len(psi) != grid.dimension:
        raise DataConstraintError(f"need {grid.dimension} gradient components, got {len(psi)}")
    for p in psi:
        if p.grid != grid:
            raise DataConstraintError("snapshot grids disagree")
    phi0 = read_snapshot(phi0_path) if phi0_path is not None else None
    if phi0 is not None and phi0.grid != grid:
        raise DataConstraintError("snapshot grids disagree")
    _check_floor(psi0.values)
    stack = np.stack([p.values for p in psi])
    if support_radius is not None:
        arrays = [psi0.values, *stack] + ([phi0.values] if phi0 is not None else [])
        _check_support(grid, arrays, support_radius)
    return InitialData(
        grid=grid,
        psi0_init=psi0,
        psi_i_init=psi,
        params=measure_parameters_raw(grid, psi0.values, stack),
        phi0=phi0,
        support_radius=support_radius,
        family="snapshot",
        settings={"psi0": str(psi0_path), "psi_i": [str(p) for p in psi_i_paths]},
    )


# --------------------------------------------------------------------------
# size parameters
# --------------------------------------------------------------------------


def _stack_norm2(grid: Grid, stack: np.ndarray, k: int, order: int) -> np.ndarray:
    return sum(grid.derivative_norm_squared(c, k, order) for c in stack)


def measure_parameters_raw(grid: Grid, psi0: np.ndarray, psi: np.ndarray, order: int = 2,
                           fixed_point_passes: int = 2) -> DataSizeParams:
    k_top = 5
    while k_top > 0:
        try:
            grid.check_derivative_order(k_top, order)
            break
        except ValueError:
            k_top -= 1

    psi0_sq = [grid.derivative_norm_squared(psi0, k, order) for k in range(k_top + 1)]
    psi_sq = [_stack_norm2(grid, psi, k, order) for k in range(k_top + 1)]
    l2_0 = [math.sqrt(grid.integrate(a)) for a in psi0_sq]
    l2_i = [math.sqrt(grid.integrate(a)) for a in psi_sq]
    sup_0 = [math.sqrt(float(np.max(a))) for a in psi0_sq]
    sup_i = [math.sqrt(float(np.max(a))) for a in psi_sq]

    terms = {
        "sup_psi_i_upto2": max(sup_i[: min(3, k_top + 1)]),
        "sup_psi0_1to3": max(sup_0[1 : min(4, k_top + 1)], default=0.0),
        "h5_psi_i": math.sqrt(sum(v * v for v in l2_i)),
        "h3_hess_psi0": math.sqrt(sum(v * v for v in l2_0[2:])),
    }
    others = max(terms.values())
    grad_l2 = l2_0[1] if k_top >= 1 else 0.0
    eps = others
    for _ in range(fixed_point_passes):
        eps = max(others, eps**1.5 * grad_l2)
    terms["weighted_grad_psi0"] = eps**1.5 * grad_l2

    a_ring = float(np.max(np.abs(psi0))) if psi0.size else 0.0
    a_star = max(float(np.max(psi0)), 0.0)
    breakdown = {f"l2_grad{k}_psi0": v for k, v in enumerate(l2_0)}
    breakdown.update({f"l2_grad{k}_psi_i": v for k, v in enumerate(l2_i)})
    breakdown.update({f"sup_grad{k}_psi0": v for k, v in enumerate(sup_0)})
    breakdown.update({f"sup_grad{k}_psi_i": v for k, v in enumerate(sup_i)})
    breakdown["sum_of_terms"] = sum(terms.values())
    breakdown["max_derivative_order"] = k_top
    return DataSizeParams(eps_ring=float(eps), a_ring=a_ring, a_star=a_star, terms=terms, breakdown=breakdown)


def measure_parameters(data: InitialData, grid: Grid | None = None, order: int = 2) -> DataSizeParams:
    """Data-size parameters of ``data``; reports, never rejects."""
    grid = grid or data.grid
    return measure_parameters_raw(grid, data.psi0_init.values, data.psi_stack, order)


def suggested_domain_length(lam: float, spatial_radius: float, a_star: float, pad: float = 2.0) -> float:
    """Box side that keeps the support away from the periodic seam until 2/a_star."""
    return 2.0 * max(lam, spatial_radius) + 4.0 / a_star + pad
