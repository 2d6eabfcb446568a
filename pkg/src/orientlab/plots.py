"""Static SVG report figures.

SVG is used (not raster) so outputs are deterministic bytes and diffable in
golden tests; the hash salt and a fixed metadata date keep matplotlib from
injecting run-specific identifiers.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .model import STIMULI, TURNS  # noqa: E402
from .stats import SlopeRecord  # noqa: E402
from .trials import TrialMetrics  # noqa: E402

_GROUP_COLORS = {"TD": "#3465a4", "ASD": "#cc6a00"}
_SVG_META = {"Date": None, "Creator": "orientlab"}


def _new_figure(width=7.0, height=4.2):
    plt.rcParams["svg.hashsalt"] = "orientlab"
    return plt.subplots(figsize=(width, height), dpi=100)


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def plot_eop_strips(metrics: Sequence[TrialMetrics], path) -> bool:
    """Per-stimulus distribution strips of trial engagement, by group."""
    pts = [(m.stimulus, m.group, m.mean_eop) for m in metrics if m.mean_eop is not None]
    if not pts:
        return False
    fig, ax = _new_figure()
    groups = sorted({g for _, g, _ in pts})
    for gi, group in enumerate(groups):
        for si, stim in enumerate(STIMULI):
            vals = sorted(v for s, g, v in pts if s == stim and g == group)
            if not vals:
                continue
            x0 = si + (gi - (len(groups) - 1) / 2) * 0.22
            # deterministic horizontal fan-out instead of random jitter
            offs = np.linspace(-0.08, 0.08, len(vals))
            ax.plot(x0 + offs, vals, linestyle="none", marker="o", markersize=3,
                    alpha=0.55, color=_GROUP_COLORS.get(group, "#555555"))
            ax.hlines(float(np.median(vals)), x0 - 0.1, x0 + 0.1,
                      color=_GROUP_COLORS.get(group, "#555555"), linewidth=2)
    ax.set_xticks(range(len(STIMULI)))
    ax.set_xticklabels(STIMULI)
    ax.set_ylabel("trial mean EOP (%)")
    ax.set_xlabel("stimulus")
    ax.set_title("Engagement by stimulus")
    handles = [plt.Line2D([], [], marker="o", linestyle="none",
                          color=_GROUP_COLORS.get(g, "#555555"), label=g) for g in groups]
    ax.legend(handles=handles, loc="best", frameon=False)
    _save(fig, path)
    return True


def plot_turn_heatmap(metrics: Sequence[TrialMetrics], path,
                      variable: str = "mean_eop") -> bool:
    """Group x stimulus mean of a trial variable per turn, as heatmaps."""
    groups = sorted({m.group for m in metrics})
    if not groups:
        return False
    fig, axes = plt.subplots(1, len(groups), figsize=(4.2 * len(groups), 3.6),
                             dpi=100, squeeze=False)
    plt.rcParams["svg.hashsalt"] = "orientlab"
    any_data = False
    for ax, group in zip(axes[0], groups):
        grid = np.full((len(STIMULI), len(TURNS)), np.nan)
        for si, stim in enumerate(STIMULI):
            for ti, turn in enumerate(TURNS):
                vals = [getattr(m, variable) for m in metrics
                        if m.group == group and m.stimulus == stim and m.turn == turn
                        and getattr(m, variable) is not None]
                if vals:
                    grid[si, ti] = float(np.mean(vals))
                    any_data = True
        im = ax.imshow(grid, aspect="auto", cmap="viridis")
        ax.set_xticks(range(len(TURNS)))
        ax.set_xticklabels([str(t) for t in TURNS])
        ax.set_yticks(range(len(STIMULI)))
        ax.set_yticklabels(STIMULI)
        ax.set_xlabel("turn")
        ax.set_title(group)
        fig.colorbar(im, ax=ax, shrink=0.85)
    fig.suptitle(f"Turn-wise group mean of {variable}")
    if not any_data:
        plt.close(fig)
        return False
    _save(fig, path)
    return True


def plot_slope_bars(slopes: Sequence[SlopeRecord], path) -> bool:
    """Group-mean habituation slope per stimulus and variable."""
    if not slopes:
        return False
    variables = sorted({s.variable for s in slopes})
    groups = sorted({s.group for s in slopes})
    fig, axes = plt.subplots(1, len(variables), figsize=(3.6 * len(variables), 3.6),
                             dpi=100, squeeze=False)
    plt.rcParams["svg.hashsalt"] = "orientlab"
    for ax, var in zip(axes[0], variables):
        width = 0.8 / max(len(groups), 1)
        for gi, group in enumerate(groups):
            means = []
            for stim in STIMULI:
                vals = [s.beta1 for s in slopes
                        if s.group == group and s.stimulus == stim and s.variable == var]
                means.append(float(np.mean(vals)) if vals else 0.0)
            x = np.arange(len(STIMULI)) + (gi - (len(groups) - 1) / 2) * width
            ax.bar(x, means, width=width, label=group,
                   color=_GROUP_COLORS.get(group, "#555555"))
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_xticks(range(len(STIMULI)))
        ax.set_xticklabels(STIMULI)
        ax.set_title(var)
    axes[0][0].set_ylabel("mean slope per turn")
    axes[0][-1].legend(frameon=False)
    fig.suptitle("Habituation slopes")
    _save(fig, path)
    return True
