"""CSV, markdown and figure output for convergence studies.

All text output is byte-deterministic: fixed column orders, 17
significant digits for reals, no timestamps.
"""

from __future__ import annotations

import numpy as np

from .analysis import ConvergenceTable, RunResult

CSV_HEADER = "level,h,ndof,e_l2_omega,e_h1s_omega,e_l2_gamma,e_h1s_gamma"

NORM_LABELS = {
    "e_l2_omega": "L2(interior)",
    "e_h1s_omega": "grad L2(interior)",
    "e_l2_gamma": "L2(boundary)",
    "e_h1s_gamma": "tangential grad L2(boundary)",
}


def errors_csv_text(run: RunResult) -> str:
    lines = [CSV_HEADER]
    for rep in run.reports:
        lines.append(
            f"{rep.level},{rep.h:.17g},{rep.ndof},{rep.e_l2_omega:.17g},"
            f"{rep.e_h1s_omega:.17g},{rep.e_l2_gamma:.17g},{rep.e_h1s_gamma:.17g}"
        )
    return "\n".join(lines) + "\n"


def render_convergence_figure(path, run: RunResult, title: str) -> None:
    """Log-log error plot saved next to the CSV output."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    hs = run.hs
    markers = ("o", "s", "^", "v")
    for key, marker in zip(NORM_LABELS, markers):
        errs = run.errors(key)
        ax.loglog(hs, errs, marker=marker, label=f"{NORM_LABELS[key]} (EOC {run.eoc(key):.2f})")
    href = np.array([hs.min(), hs.max()])
    slope = run.eoc("e_l2_omega")
    if np.isfinite(slope):
        anchor = run.errors("e_l2_omega")[-1]
        ax.loglog(href, anchor * (href / hs[-1]) ** slope, "k--", lw=0.8,
                  label=f"slope {slope:.2f}")
    ax.set_xlabel("mesh size h")
    ax.set_ylabel("error")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def defect_flags(table: ConvergenceTable) -> list[str]:
    """Report-only flags for cubic-mesh interior orders below k+1 - 0.4."""
    flags = []
    for run in table.runs:
        if run.r != 3:
            continue
        eoc = run.eoc("e_l2_omega")
        if np.isfinite(eoc) and eoc <= (run.k + 1) - 0.4:
            flags.append(
                f"defect observed: r=3 P{run.k} ({run.variant}, s={run.s}) interior "
                f"L2 EOC {eoc:.2f} is more than 0.4 below {run.k + 1}"
            )
    return flags


def summary_markdown(table: ConvergenceTable) -> str:
    parts = ["# Convergence summary\n"]
    parts.append(
        "EOC entries are least-squares slopes over the finest three refinement "
        "intervals; per-run CSV files carry the raw errors.\n"
    )
    parts.append(table.to_markdown())
    flags = defect_flags(table)
    if flags:
        parts.append("## Cubic-mesh defect flags (report only)\n")
        parts.extend(f"- {line}" for line in flags)
        parts.append("")
    detail = ["## Per-run orders (tail least-squares / last interval)\n"]
    for run in table.runs:
        cells = ", ".join(
            f"{NORM_LABELS[key]}: {run.eoc(key):.2f}/{run.eoc_last(key):.2f}"
            for key in NORM_LABELS
        )
        detail.append(f"- r={run.r} P{run.k} {run.variant} s={run.s}: {cells}")
    parts.append("\n".join(detail) + "\n")
    return "\n".join(parts)
