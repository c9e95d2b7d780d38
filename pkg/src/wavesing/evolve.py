"""Time integration of the renormalized system and of the raw wave equation.

Renormalized variables: with ``I`` the integrating factor (``I(0) = 1``,
``dI/dt = -I * dPhi/dt``) and ``Psi_a = I * d_a Phi``, the evolution reads

    dPsi0/dt = w(y) sum_a d_a Psi_a + I^{-1} w(y) sum_a Psi_a^2 - w(y) sum_a Psi0ring_a Psi_a
    dPsi_i/dt = d_i Psi0 - Psi0ring_i Psi0
    dI/dt = -Psi0

where ``y = Psi0 / I`` and ``Psi0ring_a`` are the frozen initial data.  The
field ``Phi`` itself is never evolved: ``Phi = Phi(0) - ln I``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import diagnostics as diag
from .data import InitialData
from .fields import Grid, NonFiniteFieldError, ScalarField

HYPERBOLICITY_GUARD = -0.45
DEFAULT_CFL = 0.4
DEFAULT_IFACT_STOP = 1e-2
DEFAULT_U_BLOWUP = 1e3
THETA_FRACTION = 1e-3
#: relative tolerance when deciding that the stopping threshold was reached
STOP_SLACK = 1e-9


class InvariantBreach(RuntimeError):
    """A state left the regime where the evolution is meaningful."""

    def __init__(self, kind: str, message: str, time: float | None = None, location=None, value=None):
        self.kind = kind
        self.time = time
        self.location = location
        self.value = value
        where = f" at t={time:.17g}" if time is not None else ""
        if location is not None:
            where += f", index {tuple(int(i) for i in location)}"
        super().__init__(f"{kind}: {message}{where}")


class SolverBreakdown(InvariantBreach, NonFiniteFieldError):
    pass


class DomainMarginError(ValueError):
    pass


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RenormalizedState:
    """One time level.  Arrays are plain ndarrays shaped like ``data.grid``.

    ``psi`` has a leading axis of length ``dimension``.
    """

    time: float
    psi0: np.ndarray
    psi: np.ndarray
    ifact: np.ndarray
    data: InitialData
    phi0: np.ndarray | None = None

    @property
    def grid(self) -> Grid:
        return self.data.grid

    @property
    def psi_ring(self) -> np.ndarray:
        return self.data.psi_stack

    @property
    def ifact_star(self) -> float:
        return float(np.min(self.ifact))

    @property
    def y(self) -> np.ndarray:
        return self.psi0 / self.ifact

    def fields(self) -> dict[str, ScalarField]:
        g = self.grid
        out = {"psi0": ScalarField(g, self.psi0), "ifact": ScalarField(g, self.ifact)}
        for a in range(g.dimension):
            out[f"psi{a + 1}"] = ScalarField(g, self.psi[a])
        return out


def initial_state(data: InitialData) -> RenormalizedState:
    phi0 = data.phi0.values.copy() if data.phi0 is not None else None
    return RenormalizedState(
        time=0.0,
        psi0=data.psi0_init.values.copy(),
        psi=data.psi_stack.copy(),
        ifact=np.ones(data.grid.shape),
        data=data,
        phi0=phi0,
    )


@dataclass(frozen=True)
class BaselineState:
    time: float
    phi: np.ndarray
    phidot: np.ndarray
    grid: Grid


# --------------------------------------------------------------------------
# right-hand side
# --------------------------------------------------------------------------


def inverse_weight_product(psi0, ifact, w, theta: float = 0.0, ifact_stop: float | None = None):
    """``w(psi0/ifact) / ifact`` evaluated without dividing by a tiny ``ifact``.

    Where ``|psi0| > theta`` the identity ``w(y)/I = y*w(y)/psi0`` is used,
    which stays bounded as ``I -> 0`` because ``y*w(y)`` does; elsewhere the
    direct quotient is taken.  Raises if a point has both ``|psi0| <= theta``
    and ``ifact < ifact_stop``.
    """
    psi0 = np.asarray(psi0, dtype=float)
    ifact = np.asarray(ifact, dtype=float)
    y = psi0 / ifact
    wy = w._value(y)
    big = np.abs(psi0) > theta
    if ifact_stop is not None:
        bad = ~big & (ifact < ifact_stop)
        if np.any(bad):
            idx = np.unravel_index(int(np.argmax(bad)), bad.shape) if bad.ndim else None
            raise InvariantBreach(
                "ill_conditioned_weight_product",
                "integrating factor below the stop threshold where the time derivative is tiny",
                location=idx,
            )
    safe_psi0 = np.where(big, psi0, 1.0)
    return np.where(big, y * wy / safe_psi0, wy / ifact)


def stable_inverse_weight_product(psi0: float, ifact: float, w, theta: float = THETA_FRACTION,
                                  ifact_stop: float = DEFAULT_IFACT_STOP) -> float:
    if not ifact > 0:
        raise ValueError("ifact must be positive")
    if not psi0 / ifact > -0.5:
        raise ValueError("psi0/ifact must exceed -1/2")
    return float(inverse_weight_product(psi0, ifact, w, theta, ifact_stop))


def _guard(y: np.ndarray, time: float, guard: float):
    if not np.all(np.isfinite(y)):
        idx = np.unravel_index(int(np.argmax(~np.isfinite(y))), y.shape)
        raise SolverBreakdown("non_finite", "non-finite renormalized field", time, idx)
    low = np.min(y)
    if low <= guard:
        idx = np.unravel_index(int(np.argmin(y)), y.shape)
        raise InvariantBreach("hyperbolicity", f"y = {low:.6g} <= {guard}", time, idx, float(low))


def regularized_rhs(state: RenormalizedState, w, order: int = 2, theta: float | None = None,
                    guard: float = HYPERBOLICITY_GUARD, ifact_stop: float | None = None):
    """Time derivatives ``(dpsi0, dpsi, difact)`` of the renormalized system."""
    grid = state.grid
    psi0, psi, ifact, ring = state.psi0, state.psi, state.ifact, state.psi_ring
    if np.any(ifact <= 0):
        idx = np.unravel_index(int(np.argmin(ifact)), ifact.shape)
        raise InvariantBreach("ifact_nonpositive", "integrating factor reached zero", state.time, idx)
    y = psi0 / ifact
    _guard(y, state.time, guard)
    if theta is None:
        theta = THETA_FRACTION * state.data.params.a_star
    wy = w._value(y)
    g = inverse_weight_product(psi0, ifact, w, theta, ifact_stop)
    div = grid.div(psi, order)
    sq = np.sum(psi * psi, axis=0)
    dot = np.sum(ring * psi, axis=0)
    dpsi0 = wy * div + g * sq - wy * dot
    dpsi = grid.grad(psi0, order) - ring * psi0
    difact = -psi0
    if not (np.all(np.isfinite(dpsi0)) and np.all(np.isfinite(dpsi))):
        raise SolverBreakdown("non_finite", "non-finite time derivative", state.time)
    return dpsi0, dpsi, difact


def _advance(state, k, dt):
    return replace(
        state,
        psi0=state.psi0 + dt * k[0],
        psi=state.psi + dt * k[1],
        ifact=state.ifact + dt * k[2],
    )


def step_rk4(state: RenormalizedState, dt: float, w, order: int = 2, **rhs_kw) -> RenormalizedState:
    """One classical four-stage Runge-Kutta step."""
    k1 = regularized_rhs(state, w, order, **rhs_kw)
    s2 = replace(_advance(state, k1, 0.5 * dt), time=state.time + 0.5 * dt)
    k2 = regularized_rhs(s2, w, order, **rhs_kw)
    s3 = replace(_advance(state, k2, 0.5 * dt), time=state.time + 0.5 * dt)
    k3 = regularized_rhs(s3, w, order, **rhs_kw)
    s4 = replace(_advance(state, k3, dt), time=state.time + dt)
    k4 = regularized_rhs(s4, w, order, **rhs_kw)
    c = dt / 6.0
    return replace(
        state,
        time=state.time + dt,
        psi0=state.psi0 + c * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        psi=state.psi + c * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ifact=state.ifact + c * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    )


def cfl_timestep(state: RenormalizedState, w, cfl: float = DEFAULT_CFL) -> float:
    speed2 = float(np.max(w._value(state.y)))
    return cfl * state.grid.spacing / max(math.sqrt(speed2), 1.0)


def recover_phi(state: RenormalizedState):
    """``Phi = Phi(0) - ln I`` and ``(d_t Phi, d_1 Phi, ...) = Psi / I``."""
    if state.phi0 is None:
        raise ValueError("state carries no initial potential; Phi cannot be recovered")
    g = state.grid
    if np.any(state.ifact <= 0):
        raise InvariantBreach("ifact_nonpositive", "cannot take log of a nonpositive factor", state.time)
    phi = ScalarField(g, state.phi0 - np.log(state.ifact))
    dphi = [ScalarField(g, state.psi0 / state.ifact)]
    dphi += [ScalarField(g, state.psi[a] / state.ifact) for a in range(g.dimension)]
    return phi, dphi


# --------------------------------------------------------------------------
# runner
# --------------------------------------------------------------------------


def default_order(dimension: int) -> int:
    return 4 if dimension == 1 else 2


def default_k_max(dimension: int) -> int:
    return 5 if dimension == 1 else 2


@dataclass
class EvolveSettings:
    order: int | None = None
    cfl: float = DEFAULT_CFL
    ifact_stop: float = DEFAULT_IFACT_STOP
    t_max: float | None = None
    theta: float | None = None
    guard: float = HYPERBOLICITY_GUARD
    #: largest allowed relative decrease of I per step
    ifact_fraction: float = 0.1
    fixed_dt: float | None = None
    snapshot_times: tuple = ()
    max_steps: int = 1_000_000
    require_blowup: bool = False
    check_domain: bool = True
    k_max: int | None = None
    friction_orders: tuple = (0,)
    spectral_drift: bool = True
    invariant_constant: float = 10.0


@dataclass
class Trajectory:
    records: list
    final_state: RenormalizedState
    stop_reason: str
    snapshots: dict = field(default_factory=dict)
    breach: InvariantBreach | None = None
    settings: EvolveSettings | None = None
    lifespan: object = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def t_est(self) -> float | None:
        return None if self.lifespan is None else self.lifespan.t_pred


def max_wave_speed(data: InitialData, w) -> float:
    low = min(data.min_psi0, 0.0)
    return max(1.0, math.sqrt(float(w.value(low))))


def check_domain_margin(data: InitialData, w, t_max: float):
    if data.support_radius is None:
        return
    need = 2.0 * data.support_radius + 2.0 * max_wave_speed(data, w) * t_max
    if data.grid.domain_length < need:
        raise DomainMarginError(
            f"domain length {data.grid.domain_length:.6g} < {need:.6g} needed to keep the support "
            f"off the periodic seam until t = {t_max:.6g}"
        )


def resolve_t_max(data: InitialData, t_max: float | None) -> float:
    if t_max is not None:
        return float(t_max)
    a_star = data.params.a_star
    return 2.0 / a_star if a_star > 0 else 1.0


def _choose_dt(state, w, s: EvolveSettings, t_max: float, pending_snaps) -> float:
    if s.fixed_dt is not None:
        dt = s.fixed_dt
    else:
        dt = cfl_timestep(state, w, s.cfl)
        pos = state.psi0 > 0
        if np.any(pos):
            ratio = state.ifact[pos] / state.psi0[pos]
            dt = min(dt, s.ifact_fraction * float(np.min(ratio)))
            dt_land = float(np.min((state.ifact[pos] - s.ifact_stop) / state.psi0[pos]))
            if dt_land > 0:
                dt = min(dt, dt_land)
    dt = min(dt, t_max - state.time)
    for ts in pending_snaps:
        if state.time < ts < state.time + dt:
            dt = ts - state.time
            break
    return dt


def run_regularized(data: InitialData, w, settings: EvolveSettings | None = None, progress=None) -> Trajectory:
    """Integrate until I_* reaches ``ifact_stop``, ``t_max``, or a breach."""
    s = replace(settings or EvolveSettings())
    dim = data.grid.dimension
    if s.order is None:
        s.order = default_order(dim)
    if s.k_max is None:
        s.k_max = default_k_max(dim)
    if s.require_blowup and not data.params.a_star > 0:
        raise ValueError("blowup runs need data with a positive maximum time derivative")
    t_max = resolve_t_max(data, s.t_max)
    if s.check_domain:
        check_domain_margin(data, w, t_max)
    theta = s.theta if s.theta is not None else THETA_FRACTION * data.params.a_star
    rhs_kw = {"theta": theta, "guard": s.guard, "ifact_stop": s.ifact_stop}

    monitor = diag.RunMonitor(data, w, order=s.order, k_max=s.k_max, friction_orders=s.friction_orders,
                              ifact_stop=s.ifact_stop, theta=theta, spectral_drift=s.spectral_drift)
    state = initial_state(data)
    monitor.observe(state, 0.0)
    pending = sorted(t for t in s.snapshot_times if 0 <= t <= t_max)
    snapshots = {}
    if pending and pending[0] == 0.0:
        snapshots[0.0] = state
        pending.pop(0)

    stop_reason = "t_max"
    breach = None
    stop_level = s.ifact_stop * (1.0 + STOP_SLACK)
    for _ in range(s.max_steps):
        if state.ifact_star <= stop_level:
            stop_reason = "ifact_stop"
            break
        if state.time >= t_max * (1.0 - 1e-14):
            stop_reason = "t_max"
            break
        dt = _choose_dt(state, w, s, t_max, pending)
        if dt < 1e-14:
            stop_reason = "dt_underflow"
            break
        try:
            new = step_rk4(state, dt, w, s.order, **rhs_kw)
            if np.any(new.ifact <= 0):
                raise InvariantBreach("ifact_nonpositive", "integrating factor crossed zero", new.time)
            _guard(new.psi0 / new.ifact, new.time, s.guard)
        except InvariantBreach as exc:
            breach = exc
            stop_reason = f"breach:{exc.kind}"
            break
        state = new
        monitor.observe(state, dt)
        if pending and abs(state.time - pending[0]) <= 1e-12 * max(1.0, pending[0]):
            snapshots[pending.pop(0)] = state
        if progress is not None:
            progress(state)
    else:
        stop_reason = "max_steps"

    lifespan = None
    if data.params.a_star > 0:
        try:
            lifespan = diag.lifespan_predict(monitor.times, monitor.ifact_stars)
        except ValueError:
            lifespan = None
    return Trajectory(
        records=monitor.records,
        final_state=state,
        stop_reason=stop_reason,
        snapshots=snapshots,
        breach=breach,
        settings=s,
        lifespan=lifespan,
    )


# --------------------------------------------------------------------------
# raw-variable baseline
# --------------------------------------------------------------------------


@dataclass
class BaselineSettings:
    order: int = 2
    cfl: float = DEFAULT_CFL
    u_blowup: float = DEFAULT_U_BLOWUP
    t_max: float | None = None
    #: cap on dt * sup|u| so the Riccati growth is resolved
    growth_fraction: float = 0.1
    dt_min: float = 1e-12
    guard: float = HYPERBOLICITY_GUARD
    max_steps: int = 1_000_000
    seminorm_order: int = 2


@dataclass(frozen=True)
class BaselineRecord:
    time: float
    dt: float
    sup_u: float
    seminorm_u: float
    sup_phi: float


@dataclass
class BaselineTrajectory:
    records: list
    final_state: BaselineState
    stop_reason: str

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def t_stop(self) -> float:
        return self.final_state.time


def baseline_rhs(state: BaselineState, w, order: int = 2, guard: float = HYPERBOLICITY_GUARD):
    u = state.phidot
    if not np.all(np.isfinite(u)):
        raise SolverBreakdown("non_finite", "non-finite time derivative", state.time)
    if np.min(u) <= guard:
        idx = np.unravel_index(int(np.argmin(u)), u.shape)
        raise InvariantBreach("hyperbolicity", f"u = {np.min(u):.6g} <= {guard}", state.time, idx)
    return u, w._value(u) * state.grid.lap(state.phi, order) + u * u


def step_baseline(state: BaselineState, dt: float, w, order: int = 2, guard: float = HYPERBOLICITY_GUARD):
    def shifted(k, h):
        return replace(state, phi=state.phi + h * k[0], phidot=state.phidot + h * k[1])

    k1 = baseline_rhs(state, w, order, guard)
    k2 = baseline_rhs(shifted(k1, 0.5 * dt), w, order, guard)
    k3 = baseline_rhs(shifted(k2, 0.5 * dt), w, order, guard)
    k4 = baseline_rhs(shifted(k3, dt), w, order, guard)
    c = dt / 6.0
    return BaselineState(
        time=state.time + dt,
        phi=state.phi + c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        phidot=state.phidot + c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        grid=state.grid,
    )


def run_baseline(data: InitialData, w, settings: BaselineSettings | None = None) -> BaselineTrajectory:
    """Integrate the raw equation until ``sup|u|`` exceeds ``u_blowup``."""
    s = settings or BaselineSettings()
    grid = data.grid
    phi0 = data.phi0.values if data.phi0 is not None else np.zeros(grid.shape)
    state = BaselineState(0.0, phi0.copy(), data.psi0_init.values.copy(), grid)
    t_max = resolve_t_max(data, s.t_max)

    def record(st, dt):
        return BaselineRecord(
            time=st.time,
            dt=dt,
            sup_u=float(np.max(np.abs(st.phidot))),
            seminorm_u=grid.seminorm(st.phidot, s.seminorm_order, s.order),
            sup_phi=float(np.max(np.abs(st.phi))),
        )

    records = [record(state, 0.0)]
    stop_reason = "max_steps"
    for _ in range(s.max_steps):
        sup_u = records[-1].sup_u
        if sup_u > s.u_blowup:
            stop_reason = "u_blowup"
            break
        if state.time >= t_max * (1.0 - 1e-14):
            stop_reason = "t_max"
            break
        speed = math.sqrt(float(np.max(w._value(state.phidot))))
        dt = s.cfl * grid.spacing / max(speed, 1.0)
        if sup_u > 0:
            dt = min(dt, s.growth_fraction / sup_u)
        dt = min(dt, t_max - state.time)
        if dt < s.dt_min:
            stop_reason = "dt_underflow"
            break
        try:
            state = step_baseline(state, dt, w, s.order, s.guard)
        except InvariantBreach as exc:
            stop_reason = f"breach:{exc.kind}"
            break
        records.append(record(state, dt))
    return BaselineTrajectory(records, state, stop_reason)
