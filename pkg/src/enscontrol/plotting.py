"""Deterministic SVG charts of experiment records.

Uses the object-oriented matplotlib API (no pyplot state) with a fixed
hash salt and no date metadata, so the same records always produce the
same bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

_FLOOR = 1e-16  # exact zeros would vanish from the log axis

_STYLE = {"uniform": "o-", "alse": "s--", "slse": "^:"}


def _median_series(records, metric: str, method: str):
    by_n: dict[int, list[float]] = {}
    for r in records:
        if r.metric == metric and r.method == method:
            by_n.setdefault(r.n_samples, []).append(r.value)
    ns = sorted(by_n)
    return ns, [float(np.median(by_n[n])) for n in ns]


def _finish(fig: Figure, path) -> None:
    fig.tight_layout()
    FigureCanvasSVG(fig)
    with matplotlib.rc_context({"svg.hashsalt": "enscontrol"}):
        fig.savefig(path, format="svg", metadata={"Date": None})


def build_records_figure(records) -> Figure:
    """Median relative error versus sample count, one panel per metric."""
    records = list(records)
    if not records:
        raise ValueError("no records to plot")
    metrics = sorted({r.metric for r in records})
    methods = sorted({r.method for r in records})
    ncols = min(2, len(metrics))
    nrows = (len(metrics) + ncols - 1) // ncols
    fig = Figure(figsize=(5.5 * ncols, 4.0 * nrows))
    axes = fig.subplots(nrows, ncols, squeeze=False)
    for i, metric in enumerate(metrics):
        ax = axes[i // ncols][i % ncols]
        for method in methods:
            ns, meds = _median_series(records, metric, method)
            if not ns:
                continue
            ys = np.maximum(meds, _FLOOR)
            ax.plot(ns, ys, _STYLE.get(method, "x-"), label=method, markersize=4)
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("number of samples")
        ax.set_ylabel(metric)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
    for j in range(len(metrics), nrows * ncols):
        axes[j // ncols][j % ncols].set_axis_off()
    return fig


def build_bounds_figure(records) -> Figure:
    """Deviation-frequency curves against their closed-form bound."""
    records = list(records)
    if not records:
        raise ValueError("no records to plot")
    combos = sorted({(r.method, r.n_samples) for r in records})
    fig = Figure(figsize=(6.0, 4.5))
    ax = fig.subplots()
    for method, n in combos:
        rows = {r.metric: r.value for r in records if r.method == method and r.n_samples == n}
        idx = sorted({m.split("[")[1].rstrip("]") for m in rows if m.startswith("t[")})
        ts = [rows[f"t[{i}]"] for i in idx]
        freqs = [max(rows[f"empirical_frequency[{i}]"], _FLOOR) for i in idx]
        bnds = [max(rows[f"bound[{i}]"], _FLOOR) for i in idx]
        ax.plot(ts, freqs, "o-", markersize=3, label=f"{method} N={n} empirical")
        ax.plot(ts, bnds, "--", label=f"{method} N={n} bound")
    ax.set_yscale("log")
    ax.set_xlabel("deviation t")
    ax.set_ylabel("frequency / bound")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    return fig


def emit_plot(records, path) -> None:
    """Render the records chart to a deterministic SVG file.

    Raises ``ValueError`` on empty records; I/O failures propagate as
    ``OSError``.
    """
    fig = build_records_figure(records)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    _finish(fig, path)


def emit_bounds_plot(records, path) -> None:
    """Render the bound-verification chart to a deterministic SVG file."""
    fig = build_bounds_figure(records)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    _finish(fig, path)
