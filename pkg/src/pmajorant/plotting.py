"""Log-log convergence plots written as SVG."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def sweep_plot(rows, path, title=""):
    """Error and majorant against the coarse level, one pair of lines per flux candidate."""
    plt.rcParams["svg.hashsalt"] = "pmajorant"
    fig, ax = plt.subplots(figsize=(6, 4.2))
    variants = sorted({r.eta_star for r in rows})
    colours = dict(zip(variants, ("tab:blue", "tab:orange", "tab:green")))
    err_done = set()
    for var in variants:
        sel = sorted((r for r in rows if r.eta_star == var), key=lambda r: r.coarse_n)
        xs = [r.coarse_n for r in sel]
        ax.loglog(xs, [r.report.majorant for r in sel], "o-", color=colours[var], label=f"majorant ({var})")
        key = tuple(xs)
        if key not in err_done:
            ax.loglog(xs, [r.report.error_measure for r in sel], "k--s", label="error")
            err_done.add(key)
    ax.set_xlabel("coarse cells")
    ax.set_ylabel("norm")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
