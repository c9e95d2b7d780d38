"""Command-line entry point and run orchestration.

    wavesing run --config run.toml --out results/
    wavesing certify-weights --out results/
    wavesing sweep --config sweep.toml --out results/

Every run writes ``manifest.json`` (resolved configuration, measured data
parameters, versions), ``diagnostics.csv``, ``summary.json`` and, when
requested, ``snapshots/`` and ``figures/``.  The exit status is 0 exactly when
no invariant was violated.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as diag
from .config import ConfigError, RunConfig, config_from_dict, expand_sweep, load_config
from .data import DataConstraintError, data_from_snapshots, homogeneous_data, make_bump_data, zero_data
from .evolve import (
    BaselineSettings,
    DomainMarginError,
    EvolveSettings,
    recover_phi,
    run_baseline,
    run_regularized,
)
from .fields import Grid, ScalarField, write_snapshot
from .shock1d import ShockSettings, ULattice, run_shock, shock_initial_data
from .weights import certify_weight, make_weight, shipped_weights

log = logging.getLogger("wavesing")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_IO = 3

#: absolute slack added to the C * eps checks so exact runs are not failed by rounding
ABS_SLACK = 1e-9


@dataclass
class RunResult:
    status: int
    outdir: Path
    summary: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------


def build_weight(cfg: RunConfig):
    return make_weight(cfg.weight.family, cfg.weight.power, cfg.weight.alpha_hint)


def build_grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.grid.dimension, cfg.grid.points, cfg.grid.length)


def build_data(cfg: RunConfig, grid: Grid | None):
    d = cfg.data
    if d.family == "snapshot":
        return data_from_snapshots(d.psi0_path, d.psi_i_paths, d.phi0_path, d.support_radius)
    if d.family == "homogeneous":
        return homogeneous_data(d.delta, grid)
    if d.family == "zero":
        return zero_data(grid)
    return make_bump_data(d.profile, d.kappa, d.lam, grid, d.spatial_amplitude, d.spatial_radius)


def evolve_settings(cfg: RunConfig, require_blowup: bool) -> EvolveSettings:
    i = cfg.integrator
    return EvolveSettings(
        order=i.order,
        cfl=i.cfl,
        ifact_stop=i.ifact_stop,
        t_max=i.t_max,
        ifact_fraction=i.ifact_fraction,
        fixed_dt=i.fixed_dt,
        snapshot_times=tuple(cfg.output.snapshot_times),
        require_blowup=require_blowup,
        check_domain=i.check_domain,
        k_max=i.k_max,
        friction_orders=tuple(i.friction_orders),
        invariant_constant=i.invariant_constant,
    )


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, payload: dict):
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def versions() -> dict:
    import matplotlib
    import pydantic
    import sympy

    return {
        "wavesing": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "sympy": sympy.__version__,
        "pydantic": pydantic.VERSION,
        "matplotlib": matplotlib.__version__,
        "platform": platform.platform(),
    }


def write_manifest(outdir: Path, cfg: RunConfig, extra: dict | None = None):
    payload = {"schema": "manifest/1", "config": cfg.dump(), "versions": versions()}
    payload.update(extra or {})
    write_json(outdir / "manifest.json", payload)


def _write_state_snapshots(outdir: Path, label: str, state, fmt: str):
    snap = outdir / "snapshots"
    snap.mkdir(parents=True, exist_ok=True)
    for name, f in state.fields().items():
        write_snapshot(snap / f"{label}_{name}.{fmt}", f)
    if state.phi0 is not None:
        phi, _ = recover_phi(state)
        write_snapshot(snap / f"{label}_phi.{fmt}", phi)


def _check(value: float, limit: float) -> dict:
    return {"value": value, "limit": limit, "ok": bool(value <= limit)}


# --------------------------------------------------------------------------
# mode runners
# --------------------------------------------------------------------------


def regularized_checks(traj, data, constant: float) -> dict:
    eps = data.params.eps_ring
    limit = constant * eps + ABS_SLACK
    checks = {
        "breach": _check(0 if traj.breach is None else 1, 0),
        "implication_eighth": _check(int(traj.column("implication_violations").sum()), 0),
        "implication_quarter": _check(int(traj.column("implication_quarter_violations").sum()), 0),
        "hyperbolicity": _check(int(traj.column("hyperbolicity_violations").sum()), 0),
        "friction_sign": _check(int(traj.column("friction_sign_violations").sum()), 0),
        "psi0_near_constancy": _check(float(traj.column("psi0_deviation").max()), limit),
        "ifact_law": _check(float(traj.column("ifact_law_deviation").max()), limit),
    }
    return checks


def regularized_summary(traj, data) -> dict:
    p = data.params
    q = traj.column("controlling_q")
    rec = traj.records[-1]
    out = {
        "stop_reason": traj.stop_reason,
        "t_stop": rec.time,
        "ifact_star_at_stop": rec.ifact_star,
        "steps": len(traj.records) - 1,
        "eps_ring": p.eps_ring,
        "eps_ring_self_consistent": p.self_consistent,
        "a_ring": p.a_ring,
        "a_star": p.a_star,
        "t_closed_form": 1.0 / p.a_star if p.a_star > 0 else None,
        "max_energy_identity_residual": float(traj.column("energy_identity_residual").max()),
        "max_derivative_identity_drift": float(traj.column("derivative_identity_drift").max()),
        "max_sup_dtphi": float(traj.column("sup_dtphi").max()),
        "q_initial": float(q[0]),
        "q_ratio_max": float(q.max() / q[0]) if q[0] > 0 else None,
        "friction_accumulated": rec.friction_accumulated,
        "indicator_friction_accumulated": rec.indicator_friction_accumulated,
    }
    if traj.breach is not None:
        out["breach"] = str(traj.breach)
    if traj.lifespan is not None:
        t_est = traj.lifespan.t_pred
        out["t_est"] = t_est
        out["t_est_times_a_star_minus_one"] = t_est * p.a_star - 1.0
        c = diag.blowup_rate_constants(traj.column("time"), traj.column("ifact_star"),
                                       traj.column("sup_dtphi"), t_est,
                                       (traj.settings.ifact_stop, 10 * traj.settings.ifact_stop))
        if c.size:
            med = float(np.median(c))
            out["blowup_rate_constant"] = med
            out["blowup_rate_spread"] = float(np.max(np.abs(c / med - 1.0)))
    return out


def _run_ode(cfg: RunConfig, outdir: Path, require_blowup: bool = True):
    w = build_weight(cfg)
    grid = build_grid(cfg) if cfg.data.family != "snapshot" else None
    data = build_data(cfg, grid)
    traj = run_regularized(data, w, evolve_settings(cfg, require_blowup))
    diag.write_records_csv(outdir / "diagnostics.csv", traj.records)
    for t, st in traj.snapshots.items():
        _write_state_snapshots(outdir, f"t{t:.6f}", st, cfg.output.snapshot_format)
    if cfg.output.snapshot_final:
        _write_state_snapshots(outdir, "final", traj.final_state, cfg.output.snapshot_format)
    extra = {"data_params": data.params.to_dict(), "data_settings": data.settings,
             "grid": {"dimension": data.grid.dimension, "points_per_axis": data.grid.points_per_axis,
                      "domain_length": data.grid.domain_length, "spacing": data.grid.spacing}}
    return w, data, traj, extra


def run_ode_mode(cfg: RunConfig, outdir: Path) -> RunResult:
    w, data, traj, extra = _run_ode(cfg, outdir)
    write_manifest(outdir, cfg, extra)
    checks = regularized_checks(traj, data, cfg.integrator.invariant_constant)
    summary = {"mode": cfg.mode, "weight": w.name, **regularized_summary(traj, data), "invariant_checks": checks}
    if cfg.output.figures:
        from .plotting import plot_regularized

        plot_regularized(traj, outdir / "figures", summary.get("t_est"))
    return _finish(outdir, summary, checks)


def contrast_table(traj, base, rows: int = 8) -> list[dict]:
    """Q/Q(0) and the raw second seminorm ratio at matched times."""
    tq, q = traj.column("time"), traj.column("controlling_q")
    tb, sb = base.column("time"), base.column("seminorm_u")
    t_end = min(tq[-1], tb[-1])
    times = list(np.linspace(0.0, t_end, rows))
    if tb[-1] > t_end:
        times.append(tb[-1])
    table = []
    for t in times:
        row = {"t": float(t), "raw_seminorm_ratio": float(np.interp(t, tb, sb) / sb[0]) if sb[0] > 0 else None}
        row["q_ratio"] = float(np.interp(t, tq, q) / q[0]) if q[0] > 0 and t <= tq[-1] else None
        table.append(row)
    return table


def run_baseline_mode(cfg: RunConfig, outdir: Path) -> RunResult:
    w, data, traj, extra = _run_ode(cfg, outdir, require_blowup=False)
    bs = BaselineSettings(order=cfg.integrator.order, cfl=cfg.integrator.cfl, u_blowup=cfg.integrator.u_blowup,
                          t_max=cfg.integrator.t_max)
    base = run_baseline(data, w, bs)
    diag.write_records_csv(outdir / "baseline.csv", base.records, schema="baseline/1")
    write_manifest(outdir, cfg, extra)
    checks = regularized_checks(traj, data, cfg.integrator.invariant_constant)
    sb = base.column("seminorm_u")
    summary = {
        "mode": cfg.mode,
        "weight": w.name,
        **regularized_summary(traj, data),
        "baseline_stop_reason": base.stop_reason,
        "baseline_t_stop": base.t_stop,
        "baseline_seminorm_ratio": float(sb[-1] / sb[0]) if sb[0] > 0 else None,
        "contrast_table": contrast_table(traj, base),
        "invariant_checks": checks,
    }
    if cfg.output.figures:
        from .plotting import plot_baseline_contrast, plot_regularized

        plot_regularized(traj, outdir / "figures", summary.get("t_est"))
        plot_baseline_contrast(traj, base, outdir / "figures")
    return _finish(outdir, summary, checks)


def shock_checks(report, constant: float) -> dict:
    eps = report.epsilon
    limit = constant * eps + ABS_SLACK
    s = report.summary()
    return {
        "breakdown": _check(1 if report.stop_reason == "breakdown" else 0, 0),
        "bootstrap": _check(s["bootstrap_breaches"], 0),
        "v_freezing": _check(s["max_v_freeze_deviation"], limit),
        "mu_law": _check(s["max_mu_law_deviation"], limit),
        "bounded_solution": _check(s["max_phi0_plus_p"], limit),
        "vacuum": _check(s["max_vacuum_deviation"], 1e-14),
    }


def run_shock_mode(cfg: RunConfig, outdir: Path) -> RunResult:
    sc = cfg.shock
    state0 = shock_initial_data(sc.profile, sc.epsilon_target, ULattice(sc.points))
    report = run_shock(state0, ShockSettings(cfl=sc.cfl, mu_floor=sc.mu_floor, t_max=sc.t_max))
    report.write_csv(outdir / "diagnostics.csv")
    snap = outdir / "snapshots"
    if cfg.output.snapshot_final:
        snap.mkdir(parents=True, exist_ok=True)
        st = report.final_state
        lattice_grid = Grid(1, st.lattice.points, 1.0)
        for name in ("phi0", "p", "v", "mu"):
            write_snapshot(snap / f"final_{name}.{cfg.output.snapshot_format}",
                           ScalarField(lattice_grid, getattr(st, name)))
    write_manifest(outdir, cfg, {"shock_setup": state0.setup})
    checks = shock_checks(report, sc.invariant_constant)
    summary = {"mode": cfg.mode, **report.summary(), "invariant_checks": checks}
    if cfg.output.figures:
        from .plotting import plot_shock

        plot_shock(report, outdir / "figures")
    return _finish(outdir, summary, checks)


def run_certify_mode(cfg: RunConfig, outdir: Path) -> RunResult:
    c = cfg.certify
    if c.weights is None:
        weights = shipped_weights()
    else:
        weights = [make_weight(s.family, s.power, s.alpha_hint) for s in c.weights]
    reports = [certify_weight(w, c.y_max, c.samples, c.tol) for w in weights]
    rows = []
    for r in reports:
        row = {"weight": r.weight, "passed": int(r.passed), "minimal_alpha": r.minimal_alpha,
               "alpha_hint": r.alpha_hint}
        row.update({f"check_{k}": int(v) for k, v in r.checks.items()})
        row.update({f"bound_c{k}": v for k, v in enumerate(r.bound_constants)})
        rows.append(row)
    _write_table(outdir / "diagnostics.csv", rows, "certify/1")
    write_manifest(outdir, cfg)
    checks = {r.weight: {"value": len(r.failures), "limit": 0, "ok": r.passed, "failures": r.failures}
              for r in reports}
    summary = {"mode": cfg.mode, "reports": [r.to_dict() for r in reports], "invariant_checks": checks}
    if cfg.output.figures:
        from .plotting import plot_certification

        plot_certification(reports, outdir / "figures")
    return _finish(outdir, summary, checks)


def _write_table(path: Path, rows: list[dict], schema: str):
    cols = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {schema}\n")
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_cell(row[c]) for c in cols) + "\n")


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if v is None:
        return ""
    return format(float(v), ".17g")


def _sweep_worker(job):
    name, payload, outdir = job
    cfg = config_from_dict(payload)
    result = execute(cfg, Path(outdir))
    return name, result.status, result.summary


SWEEP_COLUMNS = ("t_est", "t_shock", "eps_ring", "epsilon", "a_star", "t_est_times_a_star_minus_one",
                 "q_ratio_max", "max_energy_identity_residual", "stop_reason")


def run_sweep_mode(cfg: RunConfig, outdir: Path) -> RunResult:
    runs = expand_sweep(cfg)
    jobs = [(name, sub.dump(), str(outdir / name)) for name, sub in runs]
    if cfg.sweep.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    rows = []
    for name, status, summ in results:
        row = {"run": name, "status": status}
        row.update({c: summ.get(c) for c in SWEEP_COLUMNS})
        rows.append(row)
    _write_table(outdir / "diagnostics.csv", rows, "sweep/1")
    write_manifest(outdir, cfg, {"runs": [name for name, _ in runs]})
    checks = {name: {"value": status, "limit": 0, "ok": status == EXIT_OK} for name, status, _ in results}
    summary = {"mode": cfg.mode, "runs": {name: summ for name, _, summ in results}, "invariant_checks": checks}
    return _finish(outdir, summary, checks)


def _finish(outdir: Path, summary: dict, checks: dict) -> RunResult:
    failed = sorted(k for k, v in checks.items() if not v["ok"])
    status = EXIT_OK if not failed else EXIT_VIOLATION
    summary["violations"] = failed
    summary["status"] = status
    write_json(outdir / "summary.json", summary)
    return RunResult(status, outdir, summary)


RUNNERS = {
    "ode_blowup": run_ode_mode,
    "baseline_compare": run_baseline_mode,
    "shock": run_shock_mode,
    "certify_weights": run_certify_mode,
    "sweep": run_sweep_mode,
}


def execute(cfg: RunConfig, outdir: Path | str | None = None) -> RunResult:
    """Run ``cfg`` and write its artifacts; returns the exit status and summary."""
    outdir = Path(outdir if outdir is not None else cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    return RUNNERS[cfg.mode](cfg, outdir)


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavesing", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext, need in (
        ("run", "execute the run described by a configuration file", True),
        ("certify-weights", "check the weight assumptions for the shipped or configured families", False),
        ("sweep", "execute every combination of the configured sweep axes", True),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", type=Path, required=need, help="TOML configuration file")
        sp.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
        sp.add_argument("--quiet", action="store_true", help="only report errors")
    return p


def _report(result: RunResult, quiet: bool):
    if quiet:
        return
    s = result.summary
    keys = ("mode", "t_est", "t_shock", "baseline_t_stop", "stop_reason")
    parts = [f"{k}={s[k]}" for k in keys if s.get(k) is not None]
    parts.append(f"violations={','.join(s['violations']) or 'none'}")
    print(f"[{result.outdir}] " + " ".join(parts))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        if args.config is not None:
            cfg = load_config(args.config)
        else:
            cfg = config_from_dict({"mode": "certify_weights"})
        if args.command == "certify-weights" and cfg.mode != "certify_weights":
            raw = dict(cfg._raw)
            raw["mode"] = "certify_weights"
            cfg = config_from_dict(raw)
        if args.command == "sweep" and cfg.mode != "sweep":
            raw = dict(cfg._raw)
            raw["mode"] = "sweep"
            cfg = config_from_dict(raw)
    except ConfigError as err:
        print(str(err), file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"cannot read configuration: {err}", file=sys.stderr)
        return EXIT_IO

    outdir = args.out if args.out is not None else Path(cfg.output.directory)
    try:
        result = execute(cfg, outdir)
    except (DataConstraintError, DomainMarginError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return EXIT_IO
    _report(result, args.quiet)
    if result.status != EXIT_OK and not args.quiet:
        print("invariant violations: " + ", ".join(result.summary["violations"]), file=sys.stderr)
    return result.status


if __name__ == "__main__":
    sys.exit(main())
