"""Figure rendering for experiment outputs.

Each experiment kind gets one PNG next to the delimited output.  Figures
visualize the summary aggregates; the CSVs stay the canonical record.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def render_figures(kind: str, figure_data: dict[str, list[dict]], out_stem: Path) -> list[Path]:
    """Render every figure for an experiment; returns the written paths."""
    written: list[Path] = []
    for name, data in figure_data.items():
        if not data:
            continue
        path = Path(f"{out_stem}_{name}.png")
        renderer = _RENDERERS.get(name.split("_")[0], _render_generic)
        fig = renderer(name, data)
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def _render_quality(name: str, data: list[dict]):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    labels = [str(d["strategy"]) for d in data]
    means = [d["mean_indirect_influence"] for d in data]
    lo = [m - d["ci_lo"] for m, d in zip(means, data)]
    hi = [d["ci_hi"] - m for m, d in zip(means, data)]
    ax.bar(labels, means, yerr=[lo, hi], capsize=4, color="#4878b0")
    ax.set_ylabel("indirect influence")
    ax.set_title("solution quality (mean, 95% bootstrap-t CI)")
    return fig


def _render_scale(name: str, data: list[dict]):
    param = "K" if name.endswith("k") else "T"
    fig, ax = plt.subplots(figsize=(5, 3.2))
    strategies = sorted({d["strategy"] for d in data})
    for s in strategies:
        points = [(d[param], d["mean_indirect_influence"]) for d in data if d["strategy"] == s]
        points.sort()
        ax.plot([x for x, _ in points], [y for _, y in points], marker="o", label=s)
    ax.set_xlabel(param)
    ax.set_ylabel("indirect influence")
    ax.legend()
    ax.set_title(f"scale-up in {param}")
    return fig


def _render_deviation(name: str, data: list[dict]):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    xs = [d["deviations"] for d in data]
    ys = [d["mean_indirect_influence"] for d in data]
    ax.plot(xs, ys, marker="o", color="#b0485a")
    ax.set_xlabel("random deviations")
    ax.set_ylabel("indirect influence")
    ax.set_title("deviation tolerance")
    return fig


def _render_runtime(name: str, data: list[dict]):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    xs = [d["n_nodes"] for d in data]
    ys = [d["mean_wall_time_s"] for d in data]
    ax.plot(xs, ys, marker="o")
    ax.set_yscale("log")
    ax.set_xlabel("network nodes")
    ax.set_ylabel("seconds (log)")
    ax.set_title("planner runtime vs. network size")
    return fig


def _render_sensitivity(name: str, data: list[dict]):
    us = sorted({d["true_u"] for d in data})
    ps = sorted({d["true_p"] for d in data}, reverse=True)
    grid = np.zeros((len(ps), len(us)))
    for d in data:
        grid[ps.index(d["true_p"]), us.index(d["true_u"])] = d["loss_percent"]
    fig, ax = plt.subplots(figsize=(4.4, 3.4))
    im = ax.imshow(grid, cmap="viridis")
    ax.set_xticks(range(len(us)), [str(u) for u in us])
    ax.set_yticks(range(len(ps)), [str(p) for p in ps])
    ax.set_xlabel("true u")
    ax.set_ylabel("true p")
    for i in range(len(ps)):
        for j in range(len(us)):
            ax.text(j, i, f"{grid[i, j]:.1f}", ha="center", va="center", color="white")
    fig.colorbar(im, label="% loss vs. planning on the truth")
    ax.set_title("sensitivity to wrong (u, p)")
    return fig


def _render_generic(name: str, data: list[dict]):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.axis("off")
    ax.text(0.02, 0.5, f"{name}: {len(data)} summary rows", fontsize=10)
    return fig


_RENDERERS = {
    "quality": _render_quality,
    "scale": _render_scale,
    "deviation": _render_deviation,
    "runtime": _render_runtime,
    "sensitivity": _render_sensitivity,
}
