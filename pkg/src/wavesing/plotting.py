"""PNG figures rendered next to the CSV outputs (Agg backend, no display)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.bbox": "tight",
    "font.size": 10,
}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_regularized(traj, outdir, t_est: float | None = None) -> list[Path]:
    """Integrating factor, blowup of d_t Phi, and the controlling quantity."""
    outdir = Path(outdir)
    t = traj.column("time")
    paths = []
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, traj.column("ifact_star"), lw=1.5, label="min I")
        if t_est is not None and traj.lifespan is not None:
            lp = traj.lifespan
            tt = np.linspace(0.0, t_est, 50)
            ax.plot(tt, lp.slope * tt + lp.intercept, "--", lw=1, label=f"affine fit, T = {t_est:.6f}")
        ax.set_xlabel("t")
        ax.set_ylabel("min I")
        ax.legend(frameon=False)
        paths.append(_save(fig, outdir / "ifact_star.png"))

        fig, ax = plt.subplots()
        ax.semilogy(t, traj.column("sup_dtphi"), lw=1.5, label="max d_t Phi")
        ax.semilogy(t, traj.column("sup_psi0"), lw=1.5, label="max |Psi0|")
        ax.set_xlabel("t")
        ax.legend(frameon=False)
        paths.append(_save(fig, outdir / "time_derivative.png"))

        q = traj.column("controlling_q")
        fig, ax = plt.subplots()
        if q[0] > 0:
            ax.plot(t, q / q[0], lw=1.5, label="Q / Q(0)")
            ax.plot(t, traj.column("indicator_friction_accumulated") / q[0], lw=1.5,
                    label="indicator friction / Q(0)")
            ax.legend(frameon=False)
        ax.set_xlabel("t")
        paths.append(_save(fig, outdir / "controlling_quantity.png"))
    return paths


def plot_baseline_contrast(traj, base, outdir) -> list[Path]:
    outdir = Path(outdir)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        s = base.column("seminorm_u")
        if s[0] > 0:
            ax.semilogy(base.column("time"), s / s[0], lw=1.5, label="raw: |nabla^2 d_t Phi| / initial")
        q = traj.column("controlling_q")
        if q[0] > 0:
            ax.semilogy(traj.column("time"), q / q[0], lw=1.5, label="renormalized: Q / Q(0)")
        ax.set_xlabel("t")
        if ax.get_legend_handles_labels()[0]:
            ax.legend(frameon=False)
        return [_save(fig, outdir / "baseline_contrast.png")]


def plot_shock(report, outdir) -> list[Path]:
    outdir = Path(outdir)
    t = report.column("t")
    paths = []
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, report.column("mu_min"), lw=1.5, label="min mu")
        if report.t_shock is not None:
            ax.axvline(report.t_shock, ls="--", lw=1, color="k", label=f"t_shock = {report.t_shock:.5f}")
        ax.set_xlabel("t")
        ax.legend(frameon=False)
        paths.append(_save(fig, outdir / "mu_min.png"))

        fig, ax = plt.subplots()
        ax.semilogy(t, report.column("sup_v_over_mu"), lw=1.5, label="max |Lbar Phi0|")
        ax.semilogy(t, report.column("sup_phi0"), lw=1.5, label="max |Phi0|")
        ax.semilogy(t, np.maximum(report.column("sup_p"), 1e-300), lw=1.5, label="max |L Phi0|")
        ax.set_xlabel("t")
        ax.legend(frameon=False)
        paths.append(_save(fig, outdir / "shock_norms.png"))
    return paths


def plot_two_blowups(ode_traj, shock_report, outpath) -> Path:
    """Side by side: the solution itself diverges versus only its derivative."""
    with plt.rc_context({**STYLE, "figure.figsize": (10.0, 4.0)}):
        fig, (a, b) = plt.subplots(1, 2)
        a.semilogy(ode_traj.column("time"), ode_traj.column("sup_dtphi"), lw=1.5, label="max |Phi0|")
        a.set_title("ODE-type blowup")
        a.set_xlabel("t")
        a.legend(frameon=False)
        t = shock_report.column("t")
        b.semilogy(t, shock_report.column("sup_phi0"), lw=1.5, label="max |Phi0|")
        b.semilogy(t, shock_report.column("sup_v_over_mu"), lw=1.5, label="max |Lbar Phi0|")
        b.set_title("shock")
        b.set_xlabel("t")
        b.legend(frameon=False)
        return _save(fig, Path(outpath))


def plot_certification(reports, outdir) -> list[Path]:
    outdir = Path(outdir)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        names = [r.weight for r in reports]
        alphas = [r.minimal_alpha for r in reports]
        colors = ["tab:green" if r.passed else "tab:red" for r in reports]
        ax.bar(range(len(names)), alphas, color=colors)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=30, ha="right")
        ax.set_ylabel("minimal alpha")
        return [_save(fig, outdir / "certification.png")]
