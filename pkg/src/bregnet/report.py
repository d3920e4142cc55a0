"""Static figure rendering for CLI reports.

Each report path writes a PNG next to its delimited output.  Figures are
rendered headless through the Agg backend and saved without metadata so
repeated runs produce identical bytes.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 120, "metadata": {}}


def save_trace_figure(path, trace) -> None:
    """Training-risk trace on a log y-axis."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    epochs = np.arange(1, len(trace) + 1)
    ax.plot(epochs, trace, lw=1.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training risk")
    if np.all(np.asarray(trace) > 0):
        ax.set_yscale("log")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_dim_figure(path, profiles, estimates) -> None:
    """Log-log covering profiles with the fitted slope lines."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for profile, est in zip(profiles, estimates):
        js = np.asarray(profile.scales_j, float)
        ax.plot(js, np.log2(profile.counts), "o-", ms=4, lw=1.0,
                label=f"{profile.kind}: slope {est.slope:.3f}")
        j_lo, j_hi = est.scale_range
        fit_js = np.array([j_lo, j_hi], float)
        ax.plot(fit_js, est.slope * fit_js + est.intercept, "--", lw=1.0, color="k")
    ax.set_xlabel("scale index j  (cell side $2^{-j}$)")
    ax.set_ylabel("log2 cover size")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_rate_figure(path, report) -> None:
    """Median test error against n with the fit and both predicted slopes."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    ns = sorted(report.medians)
    meds = [report.medians[n] for n in ns]
    for cell in report.cells:
        if not cell.failed:
            ax.plot(cell.n, cell.error, ".", color="0.7", ms=4, zorder=1)
    ax.plot(ns, meds, "o-", color="C0", lw=1.5, label=f"median (slope {report.slope:.3f})")
    x = np.array([ns[0], ns[-1]], float)
    anchor = meds[0]
    for expo, name, color in (
        (report.exponent_ambient, "ambient", "C1"),
        (report.exponent_effective, "effective", "C2"),
    ):
        ax.plot(x, anchor * (x / x[0]) ** expo, "--", color=color, lw=1.0,
                label=f"{name} n^{expo:.3f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("squared L2 test error")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_cert_figure(path, certs) -> None:
    """Measured compilation error against the accuracy knob and its bound."""
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    etas = [c.eta for c in certs]
    order = np.argsort(etas)
    etas = np.asarray(etas, float)[order]
    measured = np.asarray([c.measured_error for c in certs], float)[order]
    bounds = np.asarray([c.bound for c in certs], float)[order]
    ax.plot(etas, measured, "o-", label="measured")
    ax.plot(etas, bounds, "s--", label="bound")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("target accuracy")
    ax.set_ylabel("L_p error")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
