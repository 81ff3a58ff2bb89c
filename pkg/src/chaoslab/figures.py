"""Figure rendering for the report paths.

Every figure is written next to the delimited output with PNG metadata
stripped of timestamps, so fixed-seed runs stay byte-identical.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import DiagnosticsReport
from .sphere import SphereReport

_SAVE_KW = dict(dpi=110, metadata={"Date": None})


def _save(fig, path: str) -> str:
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def battery_figures(report: DiagnosticsReport, outdir: str) -> list[str]:
    """Three figures: exact condition columns, MC distance columns with their
    noise floors, and the covariance entries over l (the headline cycle)."""
    os.makedirs(outdir, exist_ok=True)
    ls = np.array(report.indices)
    k = report.k
    paths = []

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for j in range(1, k + 1):
        if report.orders[j - 1] > 1:
            contr = [
                max(r.raw_sq for r in report.contractions if r.l == l and r.j == j)
                for l in ls
            ]
            ax.semilogy(ls, np.clip(contr, 1e-300, None), "o-", label=f"max contraction$^2$ j={j}")
        k4 = [abs(r.kappa4) for r in report.scalars if r.j == j]
        mal = [r.malliavin_var for r in report.scalars if r.j == j]
        ax.semilogy(ls, np.clip(k4, 1e-300, None), "s--", label=f"|kappa4| j={j}")
        ax.semilogy(ls, np.clip(mal, 1e-300, None), "^:", label=f"malliavin var j={j}")
    ax.set_xlabel("l")
    ax.set_ylabel("exact column value")
    ax.set_title(f"{report.family_name}: exact condition columns")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    paths.append(_save(fig, os.path.join(outdir, "fig_conditions_exact.png")))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ecf = [r.ecf for r in report.distances]
    ax.semilogy(ls, ecf, "o-", label="ecf")
    for j in range(1, k + 1):
        ax.semilogy(ls, [r.beta[j - 1] for r in report.distances], "s--", label=f"beta j={j}")
        ax.semilogy(ls, [r.ks[j - 1] for r in report.distances], "^:", label=f"ks j={j}")
    mult = report.config.floor_multiplier
    last = report.distances[-1]
    ax.axhline(mult * last.ecf_floor, color="C0", lw=0.8, ls="-.", label="ecf floor")
    ax.axhline(mult * last.beta_floor, color="C1", lw=0.8, ls="-.", label="beta floor")
    ax.axhline(mult * last.ks_floor, color="C2", lw=0.8, ls="-.", label="ks floor")
    ax.set_xlabel("l")
    ax.set_ylabel("distance")
    ax.set_title(f"{report.family_name}: Monte Carlo distances (N={report.config.mc_samples})")
    ax.legend(fontsize=8, ncol=2)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    paths.append(_save(fig, os.path.join(outdir, "fig_distances.png")))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i in range(k):
        for j in range(i, k):
            ax.plot(ls, [r.cov[i][j] for r in report.distances], "o-", label=f"cov[{i + 1},{j + 1}]")
    ax.set_xlabel("l")
    ax.set_ylabel("covariance entry")
    ax.set_title(f"{report.family_name}: exact covariance over l")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    paths.append(_save(fig, os.path.join(outdir, "fig_covariance.png")))
    return paths


def sphere_figures(report: SphereReport, outdir: str) -> list[str]:
    """Two figures: marginal diagnostics over l, and estimated versus exact
    Legendre covariance at the probe pairs."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    rows = [r for r in report.rows if not r.degenerate]

    fig, ax = plt.subplots(figsize=(7, 4.5))
    if rows:
        ls = [r.l for r in rows]
        ax.plot(ls, [abs(r.kappa4) for r in rows], "o-", label="|kappa4|")
        ax.plot(ls, [r.kolmogorov for r in rows], "s--", label="kolmogorov vs N(0,1)")
        ax.plot(ls, [r.ecf for r in rows], "^:", label="ecf (3 probes)")
    ax.set_xlabel("component degree l")
    ax.set_ylabel("diagnostic")
    ax.set_title(f"subordinated field (q={report.q}): marginal diagnostics")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    paths.append(_save(fig, os.path.join(outdir, "fig_sphere_marginals.png")))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for r in rows:
        exact = [p.exact for p in r.pairs]
        est = [p.estimate for p in r.pairs]
        err = [4 * p.std_error for p in r.pairs]
        ax.errorbar(exact, est, yerr=err, fmt="o", capsize=3, label=f"l={r.l}")
    lim = ax.get_xlim()
    grid = np.linspace(min(lim[0], -1.05), max(lim[1], 1.05), 2)
    ax.plot(grid, grid, "k-", lw=0.8)
    ax.set_xlabel("$P_l(\\cos\\,\\gamma)$ (exact)")
    ax.set_ylabel("empirical covariance")
    ax.set_title(f"probe-pair covariance vs Legendre prediction (ensemble {report.ensemble})")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    paths.append(_save(fig, os.path.join(outdir, "fig_sphere_pairs.png")))
    return paths
