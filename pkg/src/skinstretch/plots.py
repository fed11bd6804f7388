"""Deterministic SVG line plots of CSV tables, via the matplotlib SVG backend."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed salt + no date metadata -> byte-identical files for identical data
matplotlib.rcParams["svg.hashsalt"] = "skinstretch"
matplotlib.rcParams["svg.fonttype"] = "none"
_METADATA = {"Date": None, "Creator": None}


def read_table(path) -> tuple[list[str], np.ndarray]:
    """Header and float matrix of a CSV; non-numeric cells become NaN."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: empty CSV")
        rows = []
        for row in reader:
            vals = []
            for cell in row:
                try:
                    vals.append(float(cell))
                except ValueError:
                    vals.append(np.nan)
            rows.append(vals)
    width = len(header)
    data = np.full((len(rows), width), np.nan)
    for i, r in enumerate(rows):
        data[i, : min(width, len(r))] = r[:width]
    return header, data


def line_plot(path, x, series: dict, xlabel: str, ylabel: str, title: str = "", logx: bool = False) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, y in series.items():
        ax.plot(x, y, label=label, linewidth=1.0)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize="small")
    ax.grid(True, which="both", linewidth=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_METADATA)
    plt.close(fig)


def bode_plot(path, curves: dict, title: str = "") -> None:
    """``curves``: label -> BodeCurve. Magnitude and phase panels on log f."""
    fig, (mag, ph) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for label, c in curves.items():
        mag.semilogx(c.frequencies, c.magnitude_db, label=label, linewidth=1.0)
        ph.semilogx(c.frequencies, c.phase_deg, label=label, linewidth=1.0)
        if c.gain_crossover is not None:
            mag.axvline(c.gain_crossover, linestyle=":", linewidth=0.8)
    mag.axhline(0.0, color="k", linewidth=0.5)
    mag.set_ylabel("magnitude (dB)")
    ph.set_ylabel("phase (deg)")
    ph.set_xlabel("frequency (Hz)")
    mag.legend(fontsize="small")
    for a in (mag, ph):
        a.grid(True, which="both", linewidth=0.3)
    if title:
        mag.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_METADATA)
    plt.close(fig)


def render_csv(path, out=None) -> Path | None:
    """Plot every numeric column of a CSV against its first column.

    Returns the SVG path, or None when the table has nothing to plot.
    """
    path = Path(path)
    header, data = read_table(path)
    if data.shape[0] < 2 or data.shape[1] < 2 or np.all(np.isnan(data[:, 0])):
        return None
    series = {h: data[:, j] for j, h in enumerate(header) if j > 0 and not np.all(np.isnan(data[:, j]))}
    if not series:
        return None
    out = Path(out) if out else path.with_suffix(".svg")
    x = data[:, 0]
    logx = header[0] == "freq_hz" and np.all(x > 0)
    line_plot(out, x, series, header[0], "value", title=path.stem, logx=logx)
    return out


def render_directory(directory) -> list[Path]:
    """Render every CSV below ``directory``; returns the SVGs written."""
    written = []
    for csv_path in sorted(Path(directory).rglob("*.csv")):
        svg = render_csv(csv_path)
        if svg is not None:
            written.append(svg)
    return written
