"""Report rendering: delimited result tables plus matplotlib figures.

The eval command writes a TSV with one row per variant and a bar chart of
SR/SPL beside it; the run command writes a trajectory figure showing the
executed route over the world grid.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulator import GridWorld

EVAL_COLUMNS = ("variant", "episodes", "sr", "spl", "d_m", "steps", "backend_s")


def format_eval_row(row: dict) -> str:
    return "\t".join([
        str(row["variant"]), str(row["episodes"]),
        f"{row['sr']:.3f}", f"{row['spl']:.3f}", f"{row['d_m']:.2f}",
        f"{row['steps']:.1f}", f"{row['backend_s']:.3f}",
    ])


def write_eval_table(rows: "list[dict]", path: Path) -> Path:
    lines = ["\t".join(EVAL_COLUMNS)]
    lines += [format_eval_row(row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def save_eval_figure(rows: "list[dict]", path: Path) -> Path:
    """Grouped bar chart of success rate and SPL per variant."""
    variants = [row["variant"] for row in rows]
    sr = [row["sr"] for row in rows]
    spl = [row["spl"] for row in rows]
    x = np.arange(len(variants))

    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(variants)), 4))
    ax.bar(x - 0.2, sr, width=0.4, label="SR", color="#3465a4")
    ax.bar(x + 0.2, spl, width=0.4, label="SPL", color="#73d216")
    ax.set_xticks(x)
    ax.set_xticklabels(variants, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("mean over episodes")
    ax.set_title("Navigation performance by variant")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_trajectory_figure(world: GridWorld, poses: "list[tuple]", path: Path) -> Path:
    """World occupancy per floor with the executed route drawn on top."""
    n_floors = len(world.floors)
    fig, axes = plt.subplots(1, n_floors, figsize=(5 * n_floors, 4), squeeze=False)
    for f, ax in enumerate(axes[0]):
        grid = world.floors[f]
        ax.imshow(~grid, cmap="gray_r", vmin=0, vmax=1, origin="upper")
        xs = [c for (pf, c, r, _h) in poses if pf == f]
        ys = [r for (pf, c, r, _h) in poses if pf == f]
        if f == world.start_floor:
            xs = [world.start[0]] + xs
            ys = [world.start[1]] + ys
        if xs:
            ax.plot(xs, ys, "-o", color="#cc0000", markersize=3, linewidth=1.5)
        ax.plot(*world.goal, marker="*", color="#f57900", markersize=14)
        for lm in world.landmarks:
            if lm.floor == f:
                ax.plot(lm.cell[0], lm.cell[1], "s", color="#3465a4", markersize=4)
        ax.set_title(f"{world.name} floor {f}")
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
