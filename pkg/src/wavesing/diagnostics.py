"""Energies, friction integrals, lifespan fits and invariant monitors.

Functions accept any object exposing ``time, psi0, psi, ifact, grid,
psi_ring`` and ``data`` (see :class:`wavesing.evolve.RenormalizedState`).
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

SCHEMA = "diagnostics/1"
IMPLICATION_TOL = 1e-10


# --------------------------------------------------------------------------
# pointwise helpers
# --------------------------------------------------------------------------


def derivative_sums(state, k_max: int, order: int = 2) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """For k = 0..k_max: pointwise ``|nabla^k psi0|^2`` and ``sum_a |nabla^k psi_a|^2``."""
    g = state.grid
    out = {}
    for k in range(k_max + 1):
        d0 = g.derivative_norm_squared(state.psi0, k, order)
        da = sum(g.derivative_norm_squared(p, k, order) for p in state.psi)
        out[k] = (d0, da)
    return out


def friction_factor(y: np.ndarray, w) -> np.ndarray:
    """``y**2 * w'(y)``; nonpositive wherever the weight decreases."""
    return y * y * w._derivative(y)


def indicator_mask(ifact: np.ndarray, a_star: float) -> np.ndarray:
    return ifact <= 0.25 * min(1.0, a_star)


def inverse_square_weight_derivative(psi0, ifact, w, theta: float = 0.0) -> np.ndarray:
    """``I**-2 |w'(y)|`` as ``y**2 |w'(y)| / psi0**2`` where ``|psi0| > theta``."""
    y = psi0 / ifact
    absdw = np.abs(w._derivative(y))
    big = np.abs(psi0) > theta
    safe = np.where(big, psi0, 1.0)
    return np.where(big, y * y * absdw / (safe * safe), absdw / (ifact * ifact))


# --------------------------------------------------------------------------
# energies
# --------------------------------------------------------------------------


def basic_energy(state, w) -> float:
    """Discrete integral of ``V0**2 + w(y) sum_a V_a**2`` with ``V = (psi0, psi)``."""
    wy = w._value(state.psi0 / state.ifact)
    dens = state.psi0**2 + wy * np.sum(state.psi**2, axis=0)
    return state.grid.integrate(dens)


def controlling_quantity(state, w, eps_ring: float, k_max: int = 5, order: int = 2, sums=None) -> float:
    """Top-order L2 quantity with the weak ``eps_ring**3`` low-order term."""
    if not 2 <= k_max <= 5:
        raise ValueError("k_max must lie in 2..5")
    state.grid.check_derivative_order(k_max, order)
    sums = sums or derivative_sums(state, k_max, order)
    wy = w._value(state.psi0 / state.ifact)
    g = state.grid
    total = 0.0
    for k in range(2, k_max + 1):
        d0, da = sums[k]
        total += g.integrate(d0 + wy * da)
    for k in range(1, k_max):
        total += g.integrate(sums[k][1])
    total += eps_ring**3 * g.integrate(sums[1][0] + sums[0][1])
    return total


def friction_rates(state, w, a_star: float, orders=(0,), indicator_orders=(2,), order: int = 2,
                   theta: float = 0.0, sums=None) -> tuple[float, float]:
    """Instantaneous integrands of the two friction accumulators.

    The first is ``int sum_a y^2 w'(y) |nabla^k psi_a|^2`` summed over
    ``orders``.  The second is the indicator-weighted term
    ``(a_star^2/20) int 1{I <= min(1, a_star)/4} I^-2 |w'| |nabla^k psi_a|^2``
    summed over ``indicator_orders``.
    """
    g = state.grid
    k_need = max(max(orders, default=0), max(indicator_orders, default=0))
    sums = sums or derivative_sums(state, k_need, order)
    y = state.psi0 / state.ifact
    fac = friction_factor(y, w)
    r1 = sum(g.integrate(fac * sums[k][1]) for k in orders)
    mask = indicator_mask(state.ifact, a_star)
    r2 = 0.0
    if np.any(mask):
        weight = np.zeros(state.ifact.shape)
        weight[mask] = inverse_square_weight_derivative(state.psi0[mask], state.ifact[mask], w, theta)
        r2 = (a_star**2 / 20.0) * sum(g.integrate(weight * sums[k][1]) for k in indicator_orders)
    return float(r1), float(r2)


def friction_step(state, w, dt: float, a_star: float | None = None, orders=(0,), indicator_orders=(2,),
                  order: int = 2) -> tuple[float, float]:
    """Left-endpoint increments ``dt * rate`` of both accumulators."""
    if a_star is None:
        a_star = state.data.params.a_star
    r1, r2 = friction_rates(state, w, a_star, orders, indicator_orders, order)
    return dt * r1, dt * r2


# --------------------------------------------------------------------------
# energy identity
# --------------------------------------------------------------------------


def energy_identity_rhs(state, w, order: int = 2) -> float:
    """Right side of the basic energy identity with ``V = (psi0, psi)``.

    Every integral is assembled separately with the solver's stencils; the
    inhomogeneities are ``F0 = I^-1 w sum Psi_a^2 - w sum ring_a Psi_a`` and
    ``F_i = -ring_i Psi0``.
    """
    g = state.grid
    psi0, psi, ifact, ring = state.psi0, state.psi, state.ifact, state.psi_ring
    y = psi0 / ifact
    wy = w._value(y)
    dw = w._derivative(y)
    inv = 1.0 / ifact
    sq = np.sum(psi * psi, axis=0)
    dot = np.sum(ring * psi, axis=0)
    div = g.div(psi, order)
    grad0 = g.grad(psi0, order)
    grad_dot = np.sum(grad0 * psi, axis=0)

    terms = [
        g.integrate(y * y * dw * sq),
        g.integrate(inv * dw * wy * div * sq),
        g.integrate(inv * inv * dw * wy * sq * sq),
        -g.integrate(inv * dw * wy * dot * sq),
        -2.0 * g.integrate(inv * dw * grad_dot * psi0),
        -2.0 * g.integrate(inv * inv * psi0 * dw * sq * psi0),
        2.0 * g.integrate(inv * psi0 * dw * dot * psi0),
    ]
    f0 = inv * wy * sq - wy * dot
    fi = -ring * psi0
    terms.append(2.0 * g.integrate(psi0 * f0) + 2.0 * g.integrate(wy * np.sum(psi * fi, axis=0)))
    return float(math.fsum(terms))


def energy_identity_residual_pair(state_a, state_b, w, order: int = 2, rhs_a=None, rhs_b=None) -> float:
    """Midpoint check of the energy identity between two adjacent states."""
    dt = state_b.time - state_a.time
    if dt <= 0:
        raise ValueError("states must be in increasing time order")
    e_a, e_b = basic_energy(state_a, w), basic_energy(state_b, w)
    r_a = energy_identity_rhs(state_a, w, order) if rhs_a is None else rhs_a
    r_b = energy_identity_rhs(state_b, w, order) if rhs_b is None else rhs_b
    return abs((e_b - e_a) / dt - 0.5 * (r_a + r_b)) / (abs(0.5 * (e_a + e_b)) + 1.0)


def energy_identity_residual(state, w, dt_probe: float, order: int = 2, **rhs_kw) -> float:
    """Symmetric check around ``state`` from one RK4 step each way.

    Compares ``E(t + dt) - E(t - dt)`` with the Simpson integral of the right
    side, so the quadrature error is O(dt^4) and the residual measures the
    spatial consistency of the identity.
    """
    from .evolve import step_rk4

    if not dt_probe > 0:
        raise ValueError("dt_probe must be positive")
    fwd = step_rk4(state, dt_probe, w, order, **rhs_kw)
    bwd = step_rk4(state, -dt_probe, w, order, **rhs_kw)
    e_m, e_0, e_p = basic_energy(bwd, w), basic_energy(state, w), basic_energy(fwd, w)
    r_m, r_0, r_p = (energy_identity_rhs(s, w, order) for s in (bwd, state, fwd))
    simpson = (r_m + 4.0 * r_0 + r_p) / 6.0
    return abs((e_p - e_m) / (2.0 * dt_probe) - simpson) / (abs(e_0) + 1.0)


# --------------------------------------------------------------------------
# identities and monitors
# --------------------------------------------------------------------------


def derivative_identity_drift(state, order: int = 2, spectral: bool = True) -> float:
    """``sup |d_i I + Psi_i - I ring_i|``, the defect of an exact identity.

    With ``spectral`` the derivative of ``I`` is taken by FFT, independent of
    the stencil that drives the evolution; the stencil version is preserved
    by the scheme up to rounding and only checks the bookkeeping.
    """
    g = state.grid
    worst = 0.0
    for a in range(g.dimension):
        d_i = g.spectral_diff(state.ifact, a) if spectral else g.diff(state.ifact, a, order)
        defect = d_i + state.psi[a] - state.ifact * state.psi_ring[a]
        worst = max(worst, float(np.max(np.abs(defect))))
    return worst


def implication_violations(state, a_star: float, level: float = 0.125) -> int:
    """Points with ``I <= level`` but ``psi0 < level * a_star``."""
    bad = (state.ifact <= level) & (state.psi0 < level * a_star)
    return int(np.count_nonzero(bad))


def implication_quarter_violations(state, a_star: float, tol: float | None = None) -> int:
    tol = IMPLICATION_TOL * max(1.0, a_star) if tol is None else tol
    bad = (state.ifact <= 0.25) & (state.psi0 < 0.25 * a_star - tol)
    return int(np.count_nonzero(bad))


def hyperbolicity_violations(state, guard: float = -0.45) -> int:
    return int(np.count_nonzero(state.psi0 / state.ifact <= guard))


def friction_sign_violations(state, w) -> int:
    y = state.psi0 / state.ifact
    far = y >= 1.0
    return int(np.count_nonzero(friction_factor(y[far], w) > 0))


# --------------------------------------------------------------------------
# lifespan
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LifespanPrediction:
    t_pred: float
    slope: float
    intercept: float
    closed_form: float | None
    samples_used: int


def lifespan_predict(times, ifact_stars, a_star: float | None = None) -> LifespanPrediction:
    """Affine least-squares fit of the last quartile of ``(t, I_*)``; returns its root."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(ifact_stars, dtype=float)
    if t.shape != v.shape or t.size < 3:
        raise ValueError("need at least three samples")
    if not v[-1] < v[0]:
        raise ValueError("I_* series is not decreasing")
    m = max(3, int(math.ceil(t.size / 4)))
    tt, vv = t[-m:], v[-m:]
    if np.any(np.diff(vv) >= 0):
        raise ValueError("I_* series is not decreasing over the fitted window")
    slope, intercept = np.polyfit(tt, vv, 1)
    closed = 1.0 / a_star if a_star else None
    return LifespanPrediction(float(-intercept / slope), float(slope), float(intercept), closed, m)


def blowup_rate_constants(times, ifact_stars, sup_dtphi, t_est: float, window=(1e-2, 1e-1)) -> np.ndarray:
    """``(t_est - t) * sup d_t Phi`` over samples with ``I_*`` in ``window``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(ifact_stars, dtype=float)
    s = np.asarray(sup_dtphi, dtype=float)
    lo, hi = window
    sel = (v >= lo * (1 - 1e-9)) & (v <= hi)
    return (t_est - t[sel]) * s[sel]


# --------------------------------------------------------------------------
# per-step records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    time: float
    dt: float
    ifact_star: float
    basic_energy: float
    controlling_q: float
    friction_accumulated: float
    indicator_friction_accumulated: float
    sup_psi0: float
    sup_grad_psi0: float
    sup_psi_i: float
    sup_dtphi: float
    energy_identity_residual: float
    implication_violations: int
    implication_quarter_violations: int
    hyperbolicity_violations: int
    friction_sign_violations: int
    psi0_deviation: float
    ifact_law_deviation: float
    derivative_identity_drift: float


COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))


class RunMonitor:
    """Accumulates one :class:`DiagnosticsRecord` per accepted step."""

    def __init__(self, data, w, order: int = 2, k_max: int = 2, friction_orders=(0,),
                 ifact_stop: float = 1e-2, theta: float = 0.0, spectral_drift: bool = True,
                 guard: float = -0.45):
        self.data = data
        self.w = w
        self.order = order
        self.k_max = k_max
        self.friction_orders = tuple(friction_orders)
        self.indicator_orders = tuple(range(2, k_max + 1))
        self.theta = theta
        self.spectral_drift = spectral_drift
        self.guard = guard
        self.a_star = data.params.a_star
        self.eps_ring = data.params.eps_ring
        self.records: list[DiagnosticsRecord] = []
        self.times: list[float] = []
        self.ifact_stars: list[float] = []
        self._prev = None
        self._friction = 0.0
        self._indicator = 0.0
        data.grid.check_derivative_order(max(k_max, *self.friction_orders), order)

    def observe(self, state, dt: float) -> DiagnosticsRecord:
        g = state.grid
        k_need = max(self.k_max, *self.friction_orders)
        sums = derivative_sums(state, k_need, self.order)
        q = controlling_quantity(state, self.w, self.eps_ring, self.k_max, self.order, sums)
        rates = friction_rates(state, self.w, self.a_star, self.friction_orders, self.indicator_orders,
                               self.order, self.theta, sums)
        rhs = energy_identity_rhs(state, self.w, self.order)
        energy = basic_energy(state, self.w)
        residual = 0.0
        if self._prev is not None:
            prev_state, prev_rhs, prev_rates = self._prev
            residual = energy_identity_residual_pair(prev_state, state, self.w, self.order, prev_rhs, rhs)
            self._friction += 0.5 * dt * (prev_rates[0] + rates[0])
            self._indicator += 0.5 * dt * (prev_rates[1] + rates[1])
        self._prev = (state, rhs, rates)

        ring0 = self.data.psi0_init.values
        rec = DiagnosticsRecord(
            step=len(self.records),
            time=state.time,
            dt=dt,
            ifact_star=state.ifact_star,
            basic_energy=energy,
            controlling_q=q,
            friction_accumulated=self._friction,
            indicator_friction_accumulated=self._indicator,
            sup_psi0=float(np.max(np.abs(state.psi0))),
            sup_grad_psi0=math.sqrt(float(np.max(sums[1][0]))),
            sup_psi_i=math.sqrt(float(np.max(sums[0][1]))),
            sup_dtphi=float(np.max(state.psi0 / state.ifact)),
            energy_identity_residual=residual,
            implication_violations=implication_violations(state, self.a_star),
            implication_quarter_violations=implication_quarter_violations(state, self.a_star),
            hyperbolicity_violations=hyperbolicity_violations(state, self.guard),
            friction_sign_violations=friction_sign_violations(state, self.w),
            psi0_deviation=float(np.max(np.abs(state.psi0 - ring0))),
            ifact_law_deviation=float(np.max(np.abs(state.ifact - (1.0 - state.time * ring0)))),
            derivative_identity_drift=derivative_identity_drift(state, self.order, self.spectral_drift),
        )
        self.records.append(rec)
        self.times.append(state.time)
        self.ifact_stars.append(rec.ifact_star)
        return rec


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def write_records_csv(path, records, columns=None, schema: str = SCHEMA, trailer: dict | None = None):
    """One row per record, floats at 17 significant digits."""
    if columns is None:
        columns = [f.name for f in fields(records[0])] if records else list(COLUMNS)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in records:
            row = asdict(r) if not isinstance(r, dict) else r
            writer.writerow([_fmt(row[c]) for c in columns])
        for key, value in (trailer or {}).items():
            fh.write(f"# {key},{_fmt(value)}\n")


def read_records_csv(path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    rows = [list(map(float, row)) for row in reader if row]
    arr = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}
