import numpy as np
import pytest
import sympy as sp

from wavesing.shock1d import (
    CharacteristicState,
    ShockSettings,
    ULattice,
    run_shock,
    shock_initial_data,
    shock_rhs,
    step_shock,
    upwind_du,
)


def reference_rhs():
    """The characteristic system transcribed directly, with d_u P as a free symbol."""
    phi, p, v, mu, dup = sp.symbols("phi p v mu dup", real=True)
    g = phi / (1 + phi) * (1 + sp.Rational(3, 2) * phi)
    dv = -p * v / (2 * (1 + phi)) + mu * g * p + g * v
    mu_lbar_p = -mu * p**2 / (4 * (1 + phi)) - 3 * p * v / (4 * (1 + phi)) + mu * g * p + g * v
    # mu Lbar = mu d_t + 2 d_u
    dp = (mu_lbar_p - 2 * dup) / mu
    dmu = mu * p / (4 * (1 + phi)) + v / (4 * (1 + phi))
    return sp.lambdify((phi, p, v, mu, dup), (p, dp, dv, dmu), "numpy")


class TestInitialData:
    def test_zero_profile(self):
        s = shock_initial_data("zero", 0.01, ULattice(64))
        assert np.all(s.mu == 1.0)
        assert not np.any(s.phi0) and not np.any(s.p) and not np.any(s.v)

    @pytest.mark.parametrize("profile", ["sin4", "poly"])
    @pytest.mark.parametrize("eps", [0.04, 0.02, 0.01])
    def test_normalization(self, profile, eps):
        s = shock_initial_data(profile, eps, ULattice(2048))
        assert np.max(np.abs(s.lbar0)) == pytest.approx(4.0, abs=1e-6)
        assert np.max(np.abs(s.phi0)) <= eps * (1 + 1e-12)
        assert s.lbar0[np.argmax(np.abs(s.lbar0))] < 0
        np.testing.assert_allclose(s.mu, np.sqrt(1.0 + s.phi0))
        np.testing.assert_allclose(s.v, s.mu * s.lbar0)

    def test_halving_eps_doubles_lambda(self):
        lam = [shock_initial_data("sin4", e, ULattice(2048)).setup["lambda"] for e in (0.04, 0.02, 0.01)]
        for a, b in zip(lam, lam[1:]):
            assert b / a == pytest.approx(2.0, rel=0.02)

    def test_support_inside_unit_interval(self):
        s = shock_initial_data("sin4", 0.02, ULattice(2048))
        lam = s.setup["lambda"]
        assert np.all(s.phi0[s.u < 1.0 - 1.0 / lam - 1e-12] == 0.0)

    def test_unresolvable(self):
        with pytest.raises(ValueError):
            shock_initial_data("sin4", 0.001, ULattice(256))

    def test_target_range(self):
        with pytest.raises(ValueError):
            shock_initial_data("sin4", 0.6)


class TestRhs:
    def test_trivial(self):
        s = shock_initial_data("zero", 0.01, ULattice(64))
        for part in shock_rhs(s):
            assert not np.any(part)

    def test_pure_v(self):
        lat = ULattice(64)
        z = np.zeros(lat.points)
        v = np.sin(3 * lat.u)
        s = CharacteristicState(0.0, lat, z, z.copy(), v, np.ones(lat.points))
        dphi, dp, dv, dmu = shock_rhs(s)
        assert not np.any(dphi) and not np.any(dp) and not np.any(dv)
        np.testing.assert_allclose(dmu[1:], v[1:] / 4)

    def test_matches_transcription(self):
        ref = reference_rhs()
        rng = np.random.default_rng(7)
        lat = ULattice(32)
        u = lat.u
        # P linear in u, so every upwind difference is exact and d_u P = slope
        slope = 0.37
        p = 0.05 + slope * u
        phi = rng.uniform(-0.2, 0.3, lat.points)
        v = rng.uniform(-4, 4, lat.points)
        mu = rng.uniform(0.2, 1.5, lat.points)
        got = shock_rhs(CharacteristicState(0.0, lat, phi, p, v, mu))
        for i in rng.choice(np.arange(1, lat.points), size=5, replace=False):
            want = ref(phi[i], p[i], v[i], mu[i], slope)
            for g, w in zip(got, want):
                assert g[i] == pytest.approx(float(w), rel=1e-12, abs=1e-14)

    def test_upwind_second_order(self):
        errs = []
        for n in (257, 513):
            u = np.linspace(0, 1, n)
            d = upwind_du(np.sin(2 * u), 1.0 / (n - 1))
            errs.append(np.max(np.abs(d[2:] - 2 * np.cos(2 * u[2:]))))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)

    def test_floor(self):
        s = shock_initial_data("sin4", 0.04, ULattice(512))
        with pytest.raises(RuntimeError):
            shock_rhs(s, mu_floor=2.0)


class TestRun:
    def test_trivial_runs_to_t_max(self):
        rep = run_shock(shock_initial_data("zero", 0.01, ULattice(64)), ShockSettings(t_max=0.5))
        assert rep.stop_reason == "t_max"
        assert np.all(rep.final_state.mu == 1.0)
        assert rep.t_shock is None

    def test_coarse_shock(self):
        rep = run_shock(shock_initial_data("sin4", 0.04, ULattice(512)))
        assert rep.stop_reason == "mu_floor"
        assert abs(rep.t_shock - 1.0) <= 10 * rep.epsilon
        last = rep.records[-1]
        assert last.sup_v_over_mu >= 0.8 / 0.05
        assert rep.max_of("sup_phi0") + rep.max_of("sup_p") <= 10 * rep.epsilon
        assert rep.max_of("vacuum_deviation") == 0.0

    def test_step_keeps_vacuum_node(self):
        s = shock_initial_data("sin4", 0.04, ULattice(512))
        n = step_shock(s, 1e-3)
        assert (n.phi0[0], n.p[0], n.v[0], n.mu[0]) == (s.phi0[0], s.p[0], s.v[0], s.mu[0])

    def test_csv(self, tmp_path):
        rep = run_shock(shock_initial_data("sin4", 0.04, ULattice(256)))
        rep.write_csv(tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "# schema: shock/1"
        assert lines[-1].startswith("# t_shock_extrapolated,")
