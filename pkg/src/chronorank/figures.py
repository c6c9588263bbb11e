"""Matplotlib renderings written next to the delimited outputs.

Figures are a reporting convenience only: nothing downstream consumes them,
and the byte-determinism guarantees apply to the CSV/JSON outputs, not the
PNGs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def save_loss_curve(losses: Sequence[float], path) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(range(len(losses)), losses, lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("batch mean smooth-nDCG")
    ax.set_title("training objective (ascending)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_projection_scatter(points: Sequence[tuple[int, float, float]], path) -> Path:
    """Scatter of per-year cluster centers in the 2-D principal plane."""
    path = Path(path)
    years = [p[0] for p in points]
    xs = [p[1] for p in points]
    ys = [p[2] for p in points]
    fig, ax = plt.subplots(figsize=(6, 5))
    scatter = ax.scatter(xs, ys, c=years, cmap="viridis", s=28)
    fig.colorbar(scatter, ax=ax, label="year")
    ax.set_xlabel("PC1")
    ax.set_ylabel("PC2")
    ax.set_title("per-year cluster centers")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def save_matrix_heatmap(years: Sequence[int], values, path) -> Path:
    """Relevance matrix as a heatmap (query years on rows)."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 5))
    image = ax.imshow(values, cmap="magma", origin="upper", aspect="auto")
    fig.colorbar(image, ax=ax, label="relevance")
    ticks = range(0, len(years), max(1, len(years) // 10))
    ax.set_xticks(list(ticks), [years[i] for i in ticks], rotation=45)
    ax.set_yticks(list(ticks), [years[i] for i in ticks])
    ax.set_xlabel("item year")
    ax.set_ylabel("query year")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
