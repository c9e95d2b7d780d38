"""Plane-symmetric shock formation in characteristic coordinates.

For the weight ``w = 1/(1 + Phi0)`` the time derivative ``Phi0`` of the
potential obeys a closed quasilinear wave equation.  In the coordinates
``(t, u)`` adapted to the outgoing characteristics, with ``L = d/dt`` at
fixed ``u`` and ``mu Lbar = mu d/dt + 2 d/du``, the unknowns

    Phi0,   P = L Phi0,   V = mu Lbar Phi0,   mu (inverse foliation density)

satisfy a first-order system in which only ``P`` is transported in ``u``.
A shock is the vanishing of ``mu``: ``Phi0`` stays small while
``Lbar Phi0 = V / mu`` blows up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .diagnostics import lifespan_predict, write_records_csv

DEFAULT_POINTS = 2048
DEFAULT_MU_FLOOR = 0.05
TARGET_LBAR = 4.0
MIN_SUPPORT_CELLS = 16


class ShockBreakdown(RuntimeError):
    pass


# --------------------------------------------------------------------------
# profiles on [0, 1]
# --------------------------------------------------------------------------


def _sin4(z):
    z = np.asarray(z, dtype=float)
    inside = (z >= 0) & (z <= 1)
    return np.where(inside, np.sin(np.pi * z) ** 4, 0.0)


def _sin4_prime(z):
    z = np.asarray(z, dtype=float)
    inside = (z >= 0) & (z <= 1)
    s, c = np.sin(np.pi * z), np.cos(np.pi * z)
    return np.where(inside, 4.0 * np.pi * s**3 * c, 0.0)


def _poly(z):
    z = np.asarray(z, dtype=float)
    inside = (z >= 0) & (z <= 1)
    return np.where(inside, (4.0 * z * (1.0 - z)) ** 4, 0.0)


def _poly_prime(z):
    z = np.asarray(z, dtype=float)
    inside = (z >= 0) & (z <= 1)
    b = 4.0 * z * (1.0 - z)
    return np.where(inside, 4.0 * b**3 * 4.0 * (1.0 - 2.0 * z), 0.0)


def _zero(z):
    return np.zeros_like(np.asarray(z, dtype=float))


@dataclass(frozen=True)
class ShockProfile:
    """Profile ``f`` supported in ``[0, 1]`` with its derivative."""

    name: str
    f: object = field(repr=False)
    df: object = field(repr=False)


SHOCK_PROFILES = {
    "sin4": ShockProfile("sin4", _sin4, _sin4_prime),
    "poly": ShockProfile("poly", _poly, _poly_prime),
    "zero": ShockProfile("zero", _zero, _zero),
}


def get_shock_profile(name: str) -> ShockProfile:
    try:
        return SHOCK_PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown shock profile {name!r}; expected one of {sorted(SHOCK_PROFILES)}") from None


# --------------------------------------------------------------------------
# lattice and state
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ULattice:
    """``points`` equally spaced nodes on ``[0, 1]``, endpoints included."""

    points: int = DEFAULT_POINTS

    def __post_init__(self):
        if self.points < 8:
            raise ValueError("need at least 8 lattice points")

    @property
    def spacing(self) -> float:
        return 1.0 / (self.points - 1)

    @property
    def u(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.points)


@dataclass(frozen=True)
class CharacteristicState:
    time: float
    lattice: ULattice
    phi0: np.ndarray
    p: np.ndarray
    v: np.ndarray
    mu: np.ndarray
    #: initial Lbar Phi0, the frozen reference for the invariants
    lbar0: np.ndarray | None = None
    setup: dict = field(default_factory=dict)

    @property
    def u(self) -> np.ndarray:
        return self.lattice.u

    @property
    def mu_min(self) -> float:
        return float(np.min(self.mu))


def _lbar_initial(profile: ShockProfile, kappa: float, lam: float, u: np.ndarray) -> np.ndarray:
    z = lam * (1.0 - u)
    return -2.0 * kappa * lam * profile.df(z) / np.sqrt(1.0 + kappa * profile.f(z))


def shock_initial_data(profile: str | ShockProfile, epsilon_target: float,
                       lattice: ULattice | None = None, tol: float = 1e-12,
                       max_iter: int = 200) -> CharacteristicState:
    """Normalized data: ``sup|Phi0| <= epsilon_target``, ``max|Lbar Phi0| = 4`` on the lattice.

    ``Phi0(0, u) = kappa f(lam (1 - u))`` with ``|kappa| max f = epsilon_target``;
    ``lam`` is found by fixed-point iteration on the sampled maximum, and the
    sign of ``kappa`` is chosen so that ``Lbar Phi0`` is negative at a
    maximizer of its modulus.
    """
    prof = get_shock_profile(profile) if isinstance(profile, str) else profile
    lat = lattice or ULattice()
    u = lat.u
    fine = np.linspace(0.0, 1.0, 20001)
    fmax = float(np.max(np.abs(prof.f(fine))))
    dfmax = float(np.max(np.abs(prof.df(fine))))
    if fmax == 0.0:
        zeros = np.zeros_like(u)
        return CharacteristicState(0.0, lat, zeros, zeros.copy(), zeros.copy(), np.ones_like(u), zeros.copy(),
                                   {"kappa": 0.0, "lambda": 1.0, "epsilon": 0.0, "profile": prof.name})
    if not 0 < epsilon_target < 0.5:
        raise ValueError("epsilon_target must lie in (0, 1/2)")

    chosen = None
    for sign in (1.0, -1.0):
        kappa = sign * epsilon_target / fmax
        lam = TARGET_LBAR / (2.0 * abs(kappa) * dfmax)
        for _ in range(max_iter):
            if lam < 1.0 or 1.0 / lam < MIN_SUPPORT_CELLS * lat.spacing:
                raise ValueError(
                    f"epsilon_target={epsilon_target} needs lambda={lam:.6g}, "
                    f"which the {lat.points}-point lattice cannot resolve"
                )
            lb = _lbar_initial(prof, kappa, lam, u)
            peak = float(np.max(np.abs(lb)))
            new = lam * TARGET_LBAR / peak
            if abs(new - lam) <= tol * lam:
                lam = new
                break
            lam = new
        lb = _lbar_initial(prof, kappa, lam, u)
        if lb[int(np.argmax(np.abs(lb)))] < 0:
            chosen = (kappa, lam, lb)
            break
    if chosen is None:
        raise ValueError("no sign of kappa makes Lbar Phi0 negative at its maximum modulus")
    kappa, lam, lb = chosen
    phi0 = kappa * prof.f(lam * (1.0 - u))
    mu = np.sqrt(1.0 + phi0)
    return CharacteristicState(
        time=0.0,
        lattice=lat,
        phi0=phi0,
        p=np.zeros_like(u),
        v=mu * lb,
        mu=mu,
        lbar0=lb,
        setup={
            "kappa": float(kappa),
            "lambda": float(lam),
            "epsilon": float(np.max(np.abs(phi0))),
            "epsilon_target": float(epsilon_target),
            "profile": prof.name,
            "max_abs_lbar": float(np.max(np.abs(lb))),
        },
    )


# --------------------------------------------------------------------------
# right-hand side
# --------------------------------------------------------------------------


def upwind_du(p: np.ndarray, h: float) -> np.ndarray:
    """Backward (toward smaller u) second-order difference; first order next to u = 0."""
    d = np.zeros_like(p)
    d[1] = (p[1] - p[0]) / h
    d[2:] = (3.0 * p[2:] - 4.0 * p[1:-1] + p[:-2]) / (2.0 * h)
    return d


def coupling(phi0):
    """``G = Phi0 (1 + 1.5 Phi0) / (1 + Phi0)``."""
    return phi0 * (1.0 + 1.5 * phi0) / (1.0 + phi0)


def shock_rhs(state: CharacteristicState, mu_floor: float = 0.0):
    """Time derivatives at fixed ``u`` of ``(Phi0, P, V, mu)``.

    The vacuum node ``u = 0`` is held fixed.
    """
    phi0, p, v, mu = state.phi0, state.p, state.v, state.mu
    if np.min(mu) <= mu_floor:
        raise ShockBreakdown(f"mu reached {np.min(mu):.6g} <= {mu_floor}")
    if np.min(1.0 + phi0) <= 0.5:
        raise ShockBreakdown("1 + Phi0 fell below 1/2")
    inv = 1.0 / (1.0 + phi0)
    g = coupling(phi0)
    dphi0 = p.copy()
    dv = -0.5 * inv * p * v + mu * g * p + g * v
    dp = (-0.25 * mu * inv * p * p - 0.75 * inv * p * v + mu * g * p + g * v
          - 2.0 * upwind_du(p, state.lattice.spacing)) / mu
    dmu = 0.25 * inv * (mu * p + v)
    for arr in (dphi0, dp, dv, dmu):
        arr[0] = 0.0
    out = (dphi0, dp, dv, dmu)
    if not all(np.all(np.isfinite(a)) for a in out):
        raise ShockBreakdown("non-finite time derivative")
    return out


def _shift(state, k, h):
    return replace(state, phi0=state.phi0 + h * k[0], p=state.p + h * k[1], v=state.v + h * k[2],
                   mu=state.mu + h * k[3])


def step_shock(state: CharacteristicState, dt: float, mu_floor: float = 0.0) -> CharacteristicState:
    k1 = shock_rhs(state, mu_floor)
    k2 = shock_rhs(_shift(state, k1, 0.5 * dt), mu_floor)
    k3 = shock_rhs(_shift(state, k2, 0.5 * dt), mu_floor)
    k4 = shock_rhs(_shift(state, k3, dt), mu_floor)
    c = dt / 6.0
    inc = [c * (a + 2.0 * b + 2.0 * d + e) for a, b, d, e in zip(k1, k2, k3, k4)]
    return replace(state, time=state.time + dt, phi0=state.phi0 + inc[0], p=state.p + inc[1],
                   v=state.v + inc[2], mu=state.mu + inc[3])


# --------------------------------------------------------------------------
# runner
# --------------------------------------------------------------------------


@dataclass
class ShockSettings:
    cfl: float = 0.4
    mu_floor: float = DEFAULT_MU_FLOOR
    t_max: float = 2.0
    max_steps: int = 2_000_000


@dataclass(frozen=True)
class ShockRecord:
    t: float
    mu_min: float
    sup_v: float
    sup_v_over_mu: float
    sup_phi0: float
    sup_p: float
    v_freeze_deviation: float
    mu_law_deviation: float
    bootstrap_breaches: int
    vacuum_deviation: float


@dataclass
class ShockReport:
    records: list
    final_state: CharacteristicState
    stop_reason: str
    t_shock: float | None
    epsilon: float
    setup: dict

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def max_of(self, name: str) -> float:
        return float(np.max(self.column(name)))

    def summary(self) -> dict:
        last = self.records[-1]
        return {
            "stop_reason": self.stop_reason,
            "t_shock": self.t_shock,
            "epsilon": self.epsilon,
            "steps": len(self.records) - 1,
            "t_stop": last.t,
            "mu_min_at_stop": last.mu_min,
            "sup_v_over_mu_at_stop": last.sup_v_over_mu,
            "max_sup_phi0": self.max_of("sup_phi0"),
            "max_sup_p": self.max_of("sup_p"),
            "max_phi0_plus_p": float(np.max(self.column("sup_phi0") + self.column("sup_p"))),
            "max_v_freeze_deviation": self.max_of("v_freeze_deviation"),
            "max_mu_law_deviation": self.max_of("mu_law_deviation"),
            "bootstrap_breaches": int(self.column("bootstrap_breaches").sum()),
            "max_vacuum_deviation": self.max_of("vacuum_deviation"),
            **{k: v for k, v in self.setup.items() if k != "profile"},
            "profile": self.setup.get("profile"),
        }

    def write_csv(self, path):
        trailer = {"t_shock_extrapolated": self.t_shock if self.t_shock is not None else float("nan")}
        write_records_csv(path, self.records, schema="shock/1", trailer=trailer)


def _record(state: CharacteristicState, eps: float) -> ShockRecord:
    lb0 = state.lbar0 if state.lbar0 is not None else np.zeros_like(state.mu)
    root = math.sqrt(eps) if eps > 0 else 0.0
    breaches = int(
        np.count_nonzero(state.mu > 3.0)
        + np.count_nonzero(np.abs(state.phi0) > root)
        + np.count_nonzero(np.abs(state.p) > root)
        + np.count_nonzero(np.abs(state.v) > 5.0)
    )
    vac = max(abs(state.phi0[0]), abs(state.p[0]), abs(state.v[0]), abs(state.mu[0] - 1.0))
    return ShockRecord(
        t=state.time,
        mu_min=state.mu_min,
        sup_v=float(np.max(np.abs(state.v))),
        sup_v_over_mu=float(np.max(np.abs(state.v / state.mu))),
        sup_phi0=float(np.max(np.abs(state.phi0))),
        sup_p=float(np.max(np.abs(state.p))),
        v_freeze_deviation=float(np.max(np.abs(state.v - lb0))),
        mu_law_deviation=float(np.max(np.abs(state.mu - (1.0 + 0.25 * lb0 * state.time)))),
        bootstrap_breaches=breaches,
        vacuum_deviation=float(vac),
    )


def run_shock(state0: CharacteristicState, settings: ShockSettings | None = None) -> ShockReport:
    """Integrate until ``min mu <= mu_floor`` or ``t_max``; extrapolate the shock time."""
    s = settings or ShockSettings()
    eps = float(np.max(np.abs(state0.phi0)))
    h = state0.lattice.spacing
    state = state0
    records = [_record(state, eps)]
    stop_reason = "max_steps"
    for _ in range(s.max_steps):
        if state.mu_min <= s.mu_floor:
            stop_reason = "mu_floor"
            break
        if state.time >= s.t_max * (1.0 - 1e-14):
            stop_reason = "t_max"
            break
        # transport speed in u is 2/mu; the same factor keeps mu from overshooting
        dt = min(s.cfl * h * state.mu_min / 2.0, s.t_max - state.time)
        try:
            state = step_shock(state, dt)
        except ShockBreakdown:
            stop_reason = "breakdown"
            break
        records.append(_record(state, eps))
    t_shock = None
    times = [r.t for r in records]
    mus = [r.mu_min for r in records]
    try:
        t_shock = lifespan_predict(times, mus).t_pred
    except ValueError:
        t_shock = None
    return ShockReport(records, state, stop_reason, t_shock, eps, dict(state0.setup))
