"""Curve data and figures for the CLI reports.

Every figure is written twice: the curve as CSV and the rendering as PNG.
"""

from __future__ import annotations

import csv
import math
import os

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
FIG_WIDTH = 4.5  # inches

PARAMS = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "figure.figsize": (FIG_WIDTH, FIG_WIDTH * GOLDEN),
    "figure.dpi": 150,
    "savefig.bbox": "tight",
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(PARAMS)
    return plt


def _write_csv(path, header, columns):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _save(fig, plt, path):
    fig.savefig(path)
    plt.close(fig)


def kernel_profiles(out_dir, n=601):
    """``psi``, its two monotone parts and ``chi`` on ``[0, 1.2]``."""
    from .kernel import R_STAR, chi, psi, psi_split

    r = np.linspace(0.0, 1.2, n)
    p1, p2 = psi_split(r)
    cols = [r, psi(r), p1, p2, chi(r)]
    base = os.path.join(out_dir, "kernel_profiles")
    _write_csv(base + ".csv", ["r", "psi", "psi1", "psi2", "chi"], cols)
    plt = _pyplot()
    fig, ax = plt.subplots()
    for y, lab in zip(cols[1:], ("psi", "psi1", "psi2", "chi")):
        ax.plot(r, y, label=lab)
    ax.axvline(R_STAR, color="0.6", lw=0.8, ls=":")
    ax.set_xlabel("r")
    ax.legend(frameon=False)
    _save(fig, plt, base + ".png")
    return [base + ".csv", base + ".png"]


def k_curve_figure(out_dir, T_values=None):
    """``K(T)`` with its minimiser marked."""
    from .maximal import k_curve, minimize_k

    if T_values is None:
        T_values = np.geomspace(0.02, 5.0, 121)
    curve = k_curve(T_values)
    t_star, k_min = minimize_k()
    base = os.path.join(out_dir, "k_curve")
    _write_csv(base + ".csv", ["T", "K"], [curve.T, curve.K_of_T])
    plt = _pyplot()
    fig, ax = plt.subplots()
    ax.semilogx(curve.T, curve.K_of_T)
    ax.plot([t_star], [k_min], "o", ms=4)
    ax.annotate(f"T={t_star:.4f}, K={k_min:.5f}", (t_star, k_min), textcoords="offset points", xytext=(6, 8))
    ax.set_ylim(0.9 * k_min, 3.0 * k_min)
    ax.set_xlabel("T")
    ax.set_ylabel("K(T)")
    _save(fig, plt, base + ".png")
    return [base + ".csv", base + ".png"]


def w_decay_figure(out_dir, lattice, radii=None):
    """``|W|`` along three directions on log-log axes."""
    from .jellium import screened_potential

    if radii is None:
        radii = np.geomspace(2.0, 20.0, 25)
    dirs = {"100": (1.0, 0.0, 0.0), "110": (1.0, 1.0, 0.0), "111": (1.0, 1.0, 1.0)}
    # an irrational tilt keeps sample points off lattice sites
    tilt = np.array([0.0, 0.1234, 0.0567])
    cols = [radii]
    plt = _pyplot()
    fig, ax = plt.subplots()
    for name, d in dirs.items():
        u = np.array(d) / np.linalg.norm(d) + tilt
        u /= np.linalg.norm(u)
        w = np.abs([screened_potential(lattice, r * u) for r in radii])
        cols.append(w)
        ax.loglog(radii, w, label=f"[{name}]")
    ax.loglog(radii, cols[1][0] * (radii / radii[0]) ** -4, "k:", lw=0.8, label="r^-4")
    ax.set_xlabel("|x|")
    ax.set_ylabel("|W(x)|")
    ax.legend(frameon=False)
    base = os.path.join(out_dir, f"w_decay_{lattice.kind.lower()}")
    _write_csv(base + ".csv", ["r", "w_100", "w_110", "w_111"], cols)
    _save(fig, plt, base + ".png")
    return [base + ".csv", base + ".png"]


def chain_margin_figure(out_dir, rows):
    """Certificate margins against alpha, one line per density and inequality."""
    rows = [r for r in rows if r.status != "skipped"]
    base = os.path.join(out_dir, "chain_margins")
    _write_csv(base + ".csv", ["density", "inequality", "alpha", "margin"],
               [[r.density for r in rows], [r.inequality for r in rows], [r.alpha for r in rows],
                [r.margin for r in rows]])
    plt = _pyplot()
    fig, ax = plt.subplots()
    keys = sorted({(r.density, r.inequality) for r in rows})
    for dens, ineq in keys:
        sel = [r for r in rows if r.density == dens and r.inequality == ineq]
        ax.semilogy([r.alpha for r in sel], [max(r.margin, 1e-16) for r in sel], marker=".",
                    ls="-" if ineq == "grad_l1" else "--", label=f"{dens} {ineq}")
    ax.set_xlabel("alpha")
    ax.set_ylabel("Corr - lower bound")
    ax.legend(frameon=False, fontsize=5, ncol=2)
    _save(fig, plt, base + ".png")
    return [base + ".csv", base + ".png"]


def lemma_ratio_figure(out_dir, report):
    """Norm ratios of the maximal operator against the lemma constant."""
    base = os.path.join(out_dir, "lemma_ratios")
    names = [r.function_id for r in report.rows]
    ratios = [r.ratio for r in report.rows]
    _write_csv(base + ".csv", ["function_id", "ratio"], [names, ratios])
    plt = _pyplot()
    fig, ax = plt.subplots()
    ax.barh(names, ratios, color="#4eb3d3")
    ax.axvline(report.constant, color="k", ls=":", lw=0.8)
    ax.set_xscale("log")
    ax.set_xlabel("||M f|| / ||f||")
    _save(fig, plt, base + ".png")
    return [base + ".csv", base + ".png"]
