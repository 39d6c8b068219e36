"""Static figures written to files with the non-interactive Agg backend."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_density_rows(rows, path, log_scale: bool = True) -> None:
    """One curve per (n, method) from rows of (n, t, value, method)."""
    groups = defaultdict(list)
    for n, t, value, method in rows:
        groups[(n, method)].append((t, value))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (n, method), pts in sorted(groups.items()):
        pts.sort()
        t, v = np.array(pts).T
        if log_scale:
            keep = v > 0
            t, v = t[keep], v[keep]
        ax.plot(t, v, marker="." if t.size < 30 else None, label=f"n={n} {method}")
    if log_scale:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("p_n(t)")
    ax.legend(fontsize="small")
    _save(fig, path)


def plot_polylines(polylines, path, xlabel: str, ylabel: str) -> None:
    """Polylines keyed by id; ids starting with 'ray' are drawn thin."""
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for key, (x, y) in polylines.items():
        if key.startswith("ray"):
            ax.plot(x, y, color="0.4", lw=0.8)
        else:
            style = "--" if "dashed" in key or "upper" in key else ":"
            ax.plot(x, y, style, color="k", lw=1.6, label=key)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    ax.legend(fontsize="small")
    _save(fig, path)


def plot_histogram(edges, masses, path, reference=None) -> None:
    """Empirical density from histogram masses; ``reference`` is an optional (t, p) pair."""
    edges = np.asarray(edges)
    widths = np.diff(edges)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.stairs(np.asarray(masses) / widths, edges, label="simulation")
    if reference is not None:
        ax.plot(*reference, color="C1", label="reference")
    ax.set_xlabel("t")
    ax.set_ylabel("density")
    ax.legend(fontsize="small")
    _save(fig, path)
