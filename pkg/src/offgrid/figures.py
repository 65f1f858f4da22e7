"""Figure rendering for study and certificate reports.

Figures are written next to the delimited outputs; the CSVs remain the
authoritative, byte-deterministic artifacts.  matplotlib is imported lazily
with the Agg backend so headless runs need no display.
"""

from __future__ import annotations

import os

RC = {
    "figure.figsize": (6.0, 3.8),
    "figure.dpi": 130,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
}


def _plt():
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    plt.rcParams.update(RC)
    return plt


def study_figure(study, outdir) -> str:
    """Median squared prediction error vs the sweep variable, with IQR band."""
    plt = _plt()
    xs = [s["value"] for s in study.summaries]
    med = [s["median_Rhat2"] for s in study.summaries]
    lo = [s["q25_Rhat2"] for s in study.summaries]
    hi = [s["q75_Rhat2"] for s in study.summaries]

    fig, ax = plt.subplots()
    ax.plot(xs, med, "o-", color="#27537a", label="median $\\hat R^2$")
    ax.fill_between(xs, lo, hi, color="#27537a", alpha=0.2, label="IQR")
    if study.sweep == "T" and len(xs) >= 2 and min(med) > 0:
        ax.set_xscale("log")
        ax.set_yscale("log")
        if study.slope_loglog is not None:
            c = med[0] / xs[0] ** study.slope_loglog
            ax.plot(xs, [c * x ** study.slope_loglog for x in xs], "--",
                    color="#b5452a",
                    label=f"fit slope {study.slope_loglog:.2f}")
    ax.set_xlabel(study.sweep)
    ax.set_ylabel("squared prediction error")
    ax.legend()
    fig.tight_layout()
    path = os.path.join(outdir, "study.png")
    fig.savefig(path)
    plt.close(fig)

    fig, ax = plt.subplots()
    ev = [s["frac_event_ok"] for s in study.summaries]
    cv = [s["frac_converged"] for s in study.summaries]
    ax.plot(xs, ev, "s-", color="#2a7a4f", label="event frequency")
    ax.plot(xs, cv, "^--", color="#7a6a2a", label="solver converged")
    ax.set_ylim(-0.02, 1.05)
    ax.set_xlabel(study.sweep)
    ax.set_ylabel("fraction of replicates")
    ax.legend()
    fig.tight_layout()
    path2 = os.path.join(outdir, "events.png")
    fig.savefig(path2)
    plt.close(fig)
    return path


def certificate_figure(report, outdir) -> str:
    """Verification margins along the parameter grid, one panel per assumption."""
    plt = _plt()
    fig, axes = plt.subplots(1, 2, figsize=(8.4, 3.4), sharey=False)
    for ax, assumption in zip(axes, (1, 2)):
        rows = [r for r in report.rows
                if r.assumption == assumption and r.region in ("near", "far")]
        for point, color in (("i", "#27537a"), ("ii", "#b5452a"), ("iii", "#2a7a4f")):
            pts = [(r.theta, r.margin) for r in rows if r.point == point]
            if pts:
                pts.sort()
                ax.plot([p[0] for p in pts], [p[1] for p in pts], ".",
                        ms=2.5, color=color, label=f"point {point}")
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_yscale("symlog", linthresh=1e-6)
        ax.set_title(f"assumption {assumption}")
        ax.set_xlabel("theta")
        ax.set_ylabel("margin")
        ax.legend(markerscale=4)
    fig.tight_layout()
    path = os.path.join(outdir, "certificate_margins.png")
    fig.savefig(path)
    plt.close(fig)
    return path
