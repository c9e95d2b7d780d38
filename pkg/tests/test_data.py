import numpy as np
import pytest

from wavesing.data import (
    PROFILES,
    DataConstraintError,
    SupportOverflowError,
    data_from_snapshots,
    get_profile,
    homogeneous_data,
    make_bump_data,
    measure_parameters,
    suggested_domain_length,
    zero_data,
)
from wavesing.fields import Grid, ScalarField, write_snapshot

from conftest import bump_grid


class TestProfiles:
    @pytest.mark.parametrize("name", sorted(PROFILES))
    def test_peak_one_at_origin(self, name):
        prof = get_profile(name)
        s = np.linspace(0, 2, 2001)
        assert prof.g(np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-15)
        assert np.max(prof.g(s)) <= 1.0 + 1e-15
        assert np.all(prof.g(s[s >= 1.0]) == 0.0)

    @pytest.mark.parametrize("name", sorted(PROFILES))
    def test_derivative_matches(self, name):
        prof = get_profile(name)
        s = np.linspace(0.01, 0.95, 200)
        fd = (prof.g(s + 1e-6) - prof.g(s - 1e-6)) / 2e-6
        np.testing.assert_allclose(prof.dg(s), fd, rtol=1e-5, atol=1e-8)

    def test_unknown(self):
        with pytest.raises(ValueError):
            get_profile("tophat")


class TestBump:
    @pytest.mark.parametrize("lam", [4.0, 8.0, 16.0])
    def test_a_star_lambda_independent(self, lam):
        d = make_bump_data("poly8", 1.0, lam, bump_grid(lam, 512))
        assert d.params.a_star == pytest.approx(1.0, abs=1e-12)
        assert d.params.a_ring == d.params.a_star

    def test_negative_kappa_rejected(self):
        with pytest.raises(DataConstraintError):
            make_bump_data("poly8", -0.3, 8.0, bump_grid(8.0, 256))

    def test_support_overflow(self):
        with pytest.raises(SupportOverflowError):
            make_bump_data("poly8", 1.0, 16.0, Grid(1, 256, 20.0))

    def test_lambda_below_one(self):
        with pytest.raises(ValueError):
            make_bump_data("poly8", 1.0, 0.5, bump_grid(8.0, 256))

    def test_compact_support_recorded(self, small_bump):
        d = small_bump
        assert d.compact and d.support_radius == 8.0
        outside = d.grid.radius > d.support_radius
        assert np.all(d.psi0_init.values[outside] == 0.0)

    def test_spatial_part_is_gradient_of_phi0(self):
        g = bump_grid(8.0, 2048)
        d = make_bump_data("poly8", 1.0, 8.0, g)
        grad = g.spectral_diff(d.phi0.values, 0)
        np.testing.assert_allclose(d.psi_i_init[0].values, grad, atol=1e-8)

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_scaling_exponents_1d(self, k):
        # |nabla^k psi0| scales like lam^(d/2 - k)
        g = Grid(1, 2048, suggested_domain_length(16.0, 8.0, 1.0) + 20.0)
        norms = [g.seminorm(make_bump_data("poly8", 1.0, lam, g).psi0_init.values, k, 4) for lam in (4, 8, 16)]
        for a, b in zip(norms, norms[1:]):
            assert b / a == pytest.approx(2.0 ** (0.5 - k), rel=0.02)

    def test_scaling_3d_hessian(self):
        g = Grid(3, 48, 20.0)
        r = [g.seminorm(make_bump_data("poly8", 1.0, lam, g).psi0_init.values, 2, 4) for lam in (4.0, 8.0)]
        assert r[1] / r[0] == pytest.approx(2.0**-0.5, rel=0.02)

    def test_spatial_part_scales_like_inverse_lambda(self):
        g = bump_grid(16.0, 1024)
        s = [make_bump_data("poly8", 1.0, lam, g).params.breakdown["l2_grad0_psi_i"] for lam in (8.0, 16.0)]
        assert s[1] / s[0] == pytest.approx(0.5, rel=1e-12)

    def test_eps_shrinks_with_lambda(self):
        eps = [make_bump_data("poly8", 1.0, lam, bump_grid(lam, 2048)).params.eps_ring for lam in (8, 16, 32)]
        # at least as fast as 1/lam once the hessian terms stop dominating
        for a, b in zip(eps, eps[1:]):
            assert a / b >= 1.9


class TestSimpleFamilies:
    def test_homogeneous(self):
        d = homogeneous_data(0.5, Grid(1, 64, 10.0))
        p = d.params
        assert (p.a_star, p.a_ring, p.eps_ring) == (0.5, 0.5, 0.0)
        assert not d.compact

    def test_homogeneous_zero_delta(self):
        assert homogeneous_data(0.0, Grid(1, 64, 10.0)).params.a_star == 0.0

    def test_homogeneous_floor(self):
        with pytest.raises(DataConstraintError):
            homogeneous_data(-0.25, Grid(1, 64, 10.0))

    def test_zero(self):
        p = zero_data(Grid(2, 16, 4.0)).params
        assert (p.eps_ring, p.a_ring, p.a_star) == (0.0, 0.0, 0.0)

    def test_homogeneous_measure(self):
        d = homogeneous_data(1.0, Grid(1, 64, 10.0))
        p = measure_parameters(d)
        assert p.eps_ring == 0.0 and p.a_star == 1.0
        assert p.self_consistent


class TestSelfConsistency:
    def test_resolved_lambda_is_consistent(self):
        assert make_bump_data("poly8", 1.0, 16.0, bump_grid(16.0, 1024)).params.self_consistent

    def test_small_lambda_has_no_fixed_point(self):
        # sqrt(eps) * |grad psi0| exceeds 1 for every eps at least the other terms
        p = make_bump_data("poly8", 1.0, 4.0, bump_grid(4.0, 1024)).params
        assert not p.self_consistent
        assert p.terms["weighted_grad_psi0"] > p.eps_ring


class TestSnapshots:
    def test_round_trip_through_files(self, tmp_path, small_bump):
        d = small_bump
        p0 = write_snapshot(tmp_path / "psi0.bin", d.psi0_init)
        p1 = write_snapshot(tmp_path / "psi1.bin", d.psi_i_init[0])
        back = data_from_snapshots(p0, [p1], support_radius=d.support_radius)
        assert back.params.eps_ring == pytest.approx(d.params.eps_ring, rel=1e-14)

    def test_component_count(self, tmp_path, small_bump):
        p0 = write_snapshot(tmp_path / "psi0.bin", small_bump.psi0_init)
        with pytest.raises(DataConstraintError):
            data_from_snapshots(p0, [p0, p0])

    def test_floor_checked(self, tmp_path):
        g = Grid(1, 16, 4.0)
        bad = write_snapshot(tmp_path / "bad.csv", ScalarField(g, np.full(g.shape, -0.3)))
        zero = write_snapshot(tmp_path / "z.csv", ScalarField(g, np.zeros(g.shape)))
        with pytest.raises(DataConstraintError):
            data_from_snapshots(bad, [zero])
