"""Figures for evaluation output (headless matplotlib)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["plot_mse_by_band", "plot_ser_sweep", "write_figures"]

_BAND_ORDER = ("low", "mid", "high", "full")


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_mse_by_band(rows, path) -> Path:
    """Grouped bars of frequency MSE per band, one panel per lattice."""
    lattices = sorted({r.lattice for r in rows})
    fig, axes = plt.subplots(1, len(lattices), figsize=(4 * len(lattices), 3.5),
                             squeeze=False)
    for ax, lat in zip(axes[0], lattices):
        sub = [r for r in rows if r.lattice == lat]
        bands = [b for b in _BAND_ORDER if any(r.band == b for r in sub)]
        series = defaultdict(dict)
        for r in sub:
            series[(r.scheme, r.k)][r.band] = r.mse_freq
        width = 0.8 / max(len(series), 1)
        for j, (key, vals) in enumerate(sorted(series.items())):
            xs = [i + j * width for i, b in enumerate(bands) if b in vals]
            ys = [vals[b] for b in bands if b in vals]
            ax.bar(xs, ys, width, label=f"{key[0]} k={key[1]}")
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(bands))], bands)
        ax.set_title(lat)
        ax.set_ylabel("MSE (frequency)")
    axes[0][-1].legend(fontsize=7)
    return _save(fig, Path(path))


def plot_ser_sweep(rows, path) -> Path:
    """SER against attack strength, one line per lattice/band/k."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    groups = defaultdict(list)
    for r in rows:
        groups[(r.lattice, r.band, r.k)].append((r.level, r.ser))
    for key, pts in sorted(groups.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=f"{key[0]} {key[1]} k={key[2]}")
    if rows:
        ax.set_xlabel(f"{rows[0].noise} level")
    ax.set_ylabel("SER")
    ax.legend(fontsize=7)
    return _save(fig, Path(path))


def write_figures(rows, outdir, sweep_rows=None) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    out = [plot_mse_by_band(rows, outdir / "mse_by_band.png")]
    if sweep_rows:
        out.append(plot_ser_sweep(sweep_rows, outdir / "ser_sweep.png"))
    return out
