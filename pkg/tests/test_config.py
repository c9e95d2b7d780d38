import pytest

from wavesing.config import ConfigError, expand_sweep, parse_config


class TestDefaults:
    def test_minimal_ode_config(self):
        cfg = parse_config('mode = "ode_blowup"\n')
        assert cfg.integrator.cfl == 0.4
        assert cfg.integrator.order == 4
        assert cfg.integrator.ifact_stop == 1e-2
        assert cfg.integrator.k_max == 5
        assert cfg.grid.length is not None

    def test_three_dimensional_defaults(self):
        cfg = parse_config('mode = "ode_blowup"\n[grid]\ndimension = 3\npoints = 32\n')
        assert (cfg.integrator.order, cfg.integrator.k_max) == (2, 2)

    def test_dump_is_explicit(self):
        d = parse_config('mode = "ode_blowup"\n').dump()
        assert d["integrator"]["order"] == 4
        assert d["data"]["lambda"] == 8.0
        assert d["schema_version"] == 1

    def test_lambda_alias(self):
        cfg = parse_config('mode = "ode_blowup"\n[data]\nlambda = 16.0\n')
        assert cfg.data.lam == 16.0


class TestRejection:
    def test_dimension_four(self):
        with pytest.raises(ConfigError) as exc:
            parse_config('mode = "ode_blowup"\n[grid]\ndimension = 4\n')
        assert any(p.startswith("grid.dimension") for p in exc.value.problems)

    def test_every_problem_itemized(self):
        with pytest.raises(ConfigError) as exc:
            parse_config('mode = "ode_blowup"\nbogus = 1\n[grid]\ndimension = 0\n[data]\nprofile = "tophat"\n')
        locs = [p.split(":")[0] for p in exc.value.problems]
        assert "bogus" in locs and "grid.dimension" in locs and "data.profile" in locs

    def test_malformed_toml(self):
        with pytest.raises(ConfigError):
            parse_config("mode = \n")

    def test_schema_version(self):
        with pytest.raises(ConfigError):
            parse_config('schema_version = 2\nmode = "shock"\n')

    def test_sweep_needs_axes(self):
        with pytest.raises(ConfigError):
            parse_config('mode = "sweep"\n')

    def test_exponential_takes_no_power(self):
        with pytest.raises(ConfigError):
            parse_config('mode = "ode_blowup"\n[weight]\nfamily = "exponential"\npower = 2\n')


class TestSweep:
    def test_cartesian_product_keeps_user_values(self):
        cfg = parse_config(
            'mode = "sweep"\n[grid]\npoints = 128\n'
            '[sweep]\n[sweep.axes]\n"data.lambda" = [8.0, 16.0]\n"weight.family" = ["power_shifted", "exponential"]\n'
        )
        runs = expand_sweep(cfg)
        assert len(runs) == 4
        for _, sub in runs:
            assert sub.mode == "ode_blowup" and sub.grid.points == 128
        lengths = {sub.data.lam: sub.grid.length for _, sub in runs}
        assert lengths[16.0] > lengths[8.0]

    def test_axis_must_be_dotted(self):
        with pytest.raises(ConfigError):
            parse_config('mode = "sweep"\n[sweep.axes]\nlambda = [1.0]\n')
