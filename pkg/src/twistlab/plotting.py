"""Figures for experiment sweeps, rendered off-screen with the Agg backend."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _positive(col) -> bool:
    a = np.asarray(col, dtype=float)
    return a.size > 0 and bool(np.all(a > 0))


def render_sweep(name: str, header: list, rows: list, path) -> Path:
    """Line plot of every column against the first; log axes when the data allow."""
    path = Path(path)
    data = np.asarray(rows, dtype=float) if rows else np.zeros((0, len(header)))
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    if data.size:
        x = data[:, 0]
        for k in range(1, data.shape[1]):
            y = data[:, k]
            if _positive(np.abs(y)):
                ax.plot(x, np.abs(y), marker="o", ms=3, lw=1.2, label=header[k])
        if _positive(x) and x.max() / x.min() > 8:
            ax.set_xscale("log")
        ys = np.abs(data[:, 1:])
        if ys.size and _positive(ys) and ys.max() / ys.min() > 50:
            ax.set_yscale("log")
        ax.legend(fontsize=7)
    ax.set_xlabel(header[0])
    ax.set_title(name, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def render_report(report, outdir) -> list:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, sweep in report.sweeps.items():
        paths.append(render_sweep(f"{report.id} {name}", sweep["header"], sweep["rows"],
                                  outdir / f"{report.id}_{name}.png"))
    return paths
