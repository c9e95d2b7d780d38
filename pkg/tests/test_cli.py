import json

import pytest

from wavesing.cli import EXIT_CONFIG, EXIT_IO, EXIT_OK, execute, main
from wavesing.config import parse_config

HOMOGENEOUS = """
mode = "ode_blowup"
[grid]
points = 64
[data]
family = "homogeneous"
delta = 1.0
[output]
figures = false
"""

BUMP = """
mode = "baseline_compare"
[grid]
points = 256
[data]
lambda = 8.0
[output]
figures = false
"""

SHOCK = """
mode = "shock"
[shock]
epsilon_target = 0.04
points = 256
[output]
figures = false
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestExecute:
    def test_homogeneous_lifespan(self, tmp_path):
        res = execute(parse_config(HOMOGENEOUS), tmp_path)
        assert res.status == EXIT_OK
        assert res.summary["t_est"] == pytest.approx(1.0, abs=1e-6)
        for name in ("manifest.json", "diagnostics.csv", "summary.json"):
            assert (tmp_path / name).is_file()
        assert any((tmp_path / "snapshots").iterdir())

    def test_manifest_lists_filled_defaults(self, tmp_path):
        execute(parse_config(HOMOGENEOUS), tmp_path)
        m = json.loads((tmp_path / "manifest.json").read_text())
        cfg = m["config"]
        assert cfg["integrator"]["order"] == 4 and cfg["integrator"]["k_max"] == 5
        assert cfg["integrator"]["cfl"] == 0.4 and cfg["grid"]["length"] == 10.0
        assert "numpy" in m["versions"]

    def test_baseline_contrast(self, tmp_path):
        res = execute(parse_config(BUMP), tmp_path)
        s = res.summary
        assert res.status == EXIT_OK
        assert s["t_stop"] > 0 and s["baseline_t_stop"] > 0
        assert s["baseline_seminorm_ratio"] > 1e3
        assert s["contrast_table"] and "q_ratio" in s["contrast_table"][0]

    def test_shock_lambda_in_manifest(self, tmp_path):
        res = execute(parse_config(SHOCK), tmp_path)
        m = json.loads((tmp_path / "manifest.json").read_text())
        assert m["shock_setup"]["lambda"] > 1.0
        assert res.summary["t_shock"] == pytest.approx(1.0, abs=0.4)

    def test_certify_all_pass(self, tmp_path):
        res = execute(parse_config('mode = "certify_weights"\n[output]\nfigures = false\n'), tmp_path)
        assert res.status == EXIT_OK
        assert all(r["passed"] for r in res.summary["reports"])

    def test_deterministic_csv(self, tmp_path):
        cfg = parse_config(BUMP)
        a = execute(cfg, tmp_path / "a")
        b = execute(cfg, tmp_path / "b")
        for name in ("diagnostics.csv", "baseline.csv"):
            assert (a.outdir / name).read_bytes() == (b.outdir / name).read_bytes()

    def test_figures_written(self, tmp_path):
        execute(parse_config(HOMOGENEOUS.replace("figures = false", "figures = true")), tmp_path)
        assert (tmp_path / "figures" / "ifact_star.png").stat().st_size > 0


class TestMain:
    def test_run(self, tmp_path, capsys):
        cfg = write(tmp_path, HOMOGENEOUS)
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
        assert "t_est=" in capsys.readouterr().out

    def test_quiet(self, tmp_path, capsys):
        cfg = write(tmp_path, HOMOGENEOUS)
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_OK
        assert capsys.readouterr().out == ""

    def test_certify_without_config(self, tmp_path):
        assert main(["certify-weights", "--out", str(tmp_path), "--quiet"]) == EXIT_OK
        assert (tmp_path / "diagnostics.csv").is_file()

    def test_bad_config(self, tmp_path, capsys):
        cfg = write(tmp_path, 'mode = "ode_blowup"\n[grid]\ndimension = 4\n')
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
        assert "grid.dimension" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.toml"), "--quiet"]) == EXIT_IO

    def test_data_without_blowup_rejected(self, tmp_path):
        cfg = write(tmp_path, 'mode = "ode_blowup"\n[data]\nkappa = -0.2\n[output]\nfigures = false\n')
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_CONFIG

    def test_sweep(self, tmp_path):
        cfg = write(tmp_path, 'mode = "sweep"\n[grid]\npoints = 64\n[data]\nfamily = "homogeneous"\n'
                              '[output]\nfigures = false\n[sweep.axes]\n"data.delta" = [0.5, 2.0]\n')
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == EXIT_OK
        s = json.loads((tmp_path / "o" / "summary.json").read_text())
        t = sorted(r["t_est"] for r in s["runs"].values())
        assert t == pytest.approx([0.5, 2.0], abs=1e-6)
