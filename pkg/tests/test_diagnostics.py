import math
from dataclasses import replace

import numpy as np
import pytest

from wavesing.data import homogeneous_data, make_bump_data, suggested_domain_length, zero_data
from wavesing.diagnostics import (
    COLUMNS,
    basic_energy,
    blowup_rate_constants,
    controlling_quantity,
    derivative_identity_drift,
    energy_identity_residual,
    friction_factor,
    friction_step,
    implication_violations,
    lifespan_predict,
    read_records_csv,
    write_records_csv,
)
from wavesing.evolve import EvolveSettings, initial_state, run_regularized, step_rk4
from wavesing.fields import Grid


def unit_state(dimension=1, n=16):
    """State on a unit-measure box."""
    return initial_state(zero_data(Grid(dimension, n, 1.0)))


class TestEnergies:
    def test_zero_state(self, shifted1):
        s = unit_state()
        assert basic_energy(s, shifted1) == 0.0
        assert controlling_quantity(s, shifted1, 0.0, k_max=2) == 0.0

    def test_unit_time_derivative(self, shifted1):
        s = unit_state(2)
        s = replace(s, psi0=np.ones_like(s.psi0))
        assert basic_energy(s, shifted1) == pytest.approx(1.0, rel=1e-14)

    def test_weighted_spatial_part(self, shifted1):
        s = unit_state()
        # psi0 = I = 1 gives y = 1; the psi0^2 part contributes exactly 1
        s = replace(s, psi0=np.ones_like(s.psi0), psi=np.ones_like(s.psi))
        assert basic_energy(s, shifted1) - 1.0 == pytest.approx(0.5, rel=1e-14)

    def test_homogeneous_controlling_quantity(self, shifted1):
        s = initial_state(homogeneous_data(1.0, Grid(1, 64, 10.0)))
        assert controlling_quantity(s, shifted1, 0.3, k_max=5, order=4) == 0.0

    def test_initial_q_bounded_by_data(self, shifted1, small_bump):
        s = initial_state(small_bump)
        p = small_bump.params
        q = controlling_quantity(s, shifted1, p.eps_ring, k_max=5, order=4)
        assert 0 < q <= 10 * p.eps_ring**2

    def test_k_max_range(self, shifted1):
        with pytest.raises(ValueError):
            controlling_quantity(unit_state(n=64), shifted1, 0.0, k_max=6)


class TestFriction:
    def test_factor_at_one(self, shifted1):
        assert friction_factor(np.array([1.0]), shifted1)[0] == -0.25

    def test_zero_spatial_part(self, shifted1):
        s = initial_state(homogeneous_data(1.0, Grid(1, 64, 10.0)))
        s = replace(s, ifact=np.full(s.ifact.shape, 0.1))
        assert friction_step(s, shifted1, 0.01, orders=(0, 1, 2), indicator_orders=(2,)) == (0.0, 0.0)

    def test_sign_on_bump_run(self, shifted1, small_bump):
        traj = run_regularized(small_bump, shifted1)
        assert traj.column("friction_sign_violations").max() == 0
        assert np.all(np.diff(traj.column("friction_accumulated")) <= 1e-15)


class TestLifespan:
    def test_affine_samples(self):
        lp = lifespan_predict([0.0, 0.1, 0.2], [1.0, 0.9, 0.8])
        assert lp.t_pred == pytest.approx(1.0, rel=1e-14)

    def test_homogeneous_delta2(self, shifted1):
        traj = run_regularized(homogeneous_data(2.0, Grid(1, 64, 10.0)), shifted1)
        lp = lifespan_predict(traj.column("time"), traj.column("ifact_star"), a_star=2.0)
        assert lp.t_pred == pytest.approx(0.5, abs=1e-6)
        assert lp.closed_form == 0.5

    def test_needs_decrease(self):
        with pytest.raises(ValueError):
            lifespan_predict([0, 1, 2], [1.0, 1.0, 1.0])
        with pytest.raises(ValueError):
            lifespan_predict([0, 1], [1.0, 0.5])

    def test_blowup_rate_exact_for_riccati(self):
        t = np.linspace(0.0, 0.99, 100)
        c = blowup_rate_constants(t, 1.0 - t, 1.0 / (1.0 - t), 1.0)
        np.testing.assert_allclose(c, 1.0, rtol=1e-12)
        assert c.size > 0


class TestEnergyIdentity:
    def test_zero_state(self, shifted1):
        assert energy_identity_residual(unit_state(), shifted1, 0.1) == 0.0

    def test_homogeneous(self, shifted1):
        s = initial_state(homogeneous_data(1.0, Grid(1, 64, 10.0)))
        assert energy_identity_residual(s, shifted1, 1e-2) <= 1e-12

    def test_converges_under_refinement(self, exponential):
        # joint (h, dt) refinement; dt alone stalls at the spatial error
        length = suggested_domain_length(8.0, 8.0, 1.0)
        res = []
        for n in (128, 256, 512):
            s = initial_state(make_bump_data("poly8", 1.0, 8.0, Grid(1, n, length)))
            steps = int(round(0.6 / (0.3 * length / n)))
            dt = 0.6 / steps
            for _ in range(steps):
                s = step_rk4(s, dt, exponential, 2)
            res.append(energy_identity_residual(s, exponential, dt, 2))
        rates = [math.log2(a / b) for a, b in zip(res, res[1:])]
        assert min(rates) >= 2.0


class TestMonitors:
    def test_drift_zero_at_start(self, small_bump):
        assert derivative_identity_drift(initial_state(small_bump)) < 1e-10

    def test_implication_counts(self):
        s = initial_state(homogeneous_data(1.0, Grid(1, 16, 10.0)))
        s = replace(s, ifact=np.full(16, 0.1), psi0=np.r_[np.full(8, 1.0), np.full(8, 0.1)])
        assert implication_violations(s, 1.0) == 8

    def test_records_round_trip(self, tmp_path, shifted1):
        traj = run_regularized(homogeneous_data(1.0, Grid(1, 64, 10.0)), shifted1, EvolveSettings())
        path = tmp_path / "d.csv"
        write_records_csv(path, traj.records, trailer={"t_est": traj.t_est})
        text = path.read_text().splitlines()
        assert text[0] == "# schema: diagnostics/1"
        assert text[-1].startswith("# t_est,")
        back = read_records_csv(path)
        assert tuple(back) == COLUMNS
        np.testing.assert_array_equal(back["time"], traj.column("time"))
        assert math.isclose(back["ifact_star"][-1], 0.01, rel_tol=1e-8)
