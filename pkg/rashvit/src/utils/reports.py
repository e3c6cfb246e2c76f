"""
SVG Reports

Confusion-matrix heatmaps and accuracy-vs-SNR curves rendered with
matplotlib's SVG backend. Output is byte-stable for identical inputs:
fixed hash salt, no date metadata, text kept as <text> elements.

Heatmap cells are individual rectangles with ids "cell-<true>-<pred>";
sweep curves carry ids "series-<variant>".
"""

import io
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle
import numpy as np
import polars as pl

from rashvit.src.utils.io import atomic_write_bytes

logger = logging.getLogger(__name__)

SVG_RC = {
    "svg.hashsalt": "rashvit",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "axes.unicode_minus": False,
}


def _save_svg(fig: Figure, path: Union[str, Path]) -> Path:
    buffer = io.BytesIO()
    with matplotlib.rc_context(SVG_RC):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return atomic_write_bytes(path, buffer.getvalue())


def confusion_svg(
    confusion: np.ndarray,
    path: Union[str, Path],
    class_names: Optional[Sequence[str]] = None,
    title: str = "Confusion matrix",
    normalize: bool = True,
) -> Path:
    """
    Heatmap of a (K, K) confusion matrix; rows = true label.

    With `normalize`, colour encodes the row-normalized rate while the
    annotation shows raw counts.
    """
    counts = np.asarray(confusion, dtype=np.int64)
    k = counts.shape[0]
    rows = counts.sum(axis=1, keepdims=True).astype(np.float64)
    rates = np.divide(counts, rows, out=np.zeros(counts.shape), where=rows > 0) if normalize else counts
    vmax = float(rates.max()) if rates.size and rates.max() > 0 else 1.0
    names = list(class_names) if class_names is not None else [str(i) for i in range(k)]

    with matplotlib.rc_context(SVG_RC):
        size = max(4.0, 0.55 * k + 2.0)
        fig = Figure(figsize=(size, size))
        ax = fig.add_subplot(1, 1, 1)
        cmap = matplotlib.colormaps["Blues"]
        for i in range(k):
            for j in range(k):
                shade = rates[i, j] / vmax
                cell = Rectangle((j, i), 1.0, 1.0, facecolor=cmap(shade), edgecolor="white", linewidth=0.5)
                cell.set_gid(f"cell-{i}-{j}")
                ax.add_patch(cell)
                ax.text(
                    j + 0.5, i + 0.5, str(counts[i, j]),
                    ha="center", va="center", fontsize=8,
                    color="white" if shade > 0.6 else "black",
                )
        ax.set_xlim(0, k)
        ax.set_ylim(k, 0)
        ax.set_aspect("equal")
        ax.set_xticks(np.arange(k) + 0.5)
        ax.set_yticks(np.arange(k) + 0.5)
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
        ax.set_yticklabels(names, fontsize=8)
        ax.set_xlabel("Predicted label")
        ax.set_ylabel("True label")
        ax.set_title(title)
        fig.tight_layout()

    out = _save_svg(fig, path)
    logger.info(f"Wrote confusion heatmap ({k}x{k}) to {out}")
    return out


def _x_positions(snrs: List[float]) -> Dict[float, float]:
    """Finite SNRs map to themselves; the clean sentinel sits one step past the largest."""
    finite = sorted(s for s in snrs if math.isfinite(s))
    positions = {s: s for s in finite}
    if any(math.isinf(s) for s in snrs):
        step = (finite[-1] - finite[-2]) if len(finite) > 1 else 2.0
        positions[math.inf] = (finite[-1] + step) if finite else 0.0
    return positions


def sweep_svg(
    summary: pl.DataFrame,
    path: Union[str, Path],
    title: str = "Accuracy vs SNR",
) -> Path:
    """
    Mean accuracy (with min/max band) against SNR, one polyline per variant.

    Args:
        summary: SWEEP_SUMMARY_SCHEMA frame
    """
    snrs = sorted(set(summary["snr_db"].to_list()))
    xpos = _x_positions(snrs)

    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(6.4, 4.2))
        ax = fig.add_subplot(1, 1, 1)
        for variant in summary["variant"].unique(maintain_order=True).to_list():
            rows = summary.filter(pl.col("variant") == variant).sort("snr_db")
            x = [xpos[s] for s in rows["snr_db"].to_list()]
            mean = np.asarray(rows["mean_accuracy"].to_list()) * 100.0
            (line,) = ax.plot(x, mean, marker="o", linewidth=1.5, markersize=4, label=variant)
            line.set_gid(f"series-{variant}")
            ax.fill_between(
                x,
                np.asarray(rows["min_accuracy"].to_list()) * 100.0,
                np.asarray(rows["max_accuracy"].to_list()) * 100.0,
                alpha=0.15, color=line.get_color(), linewidth=0,
            )
        ticks = [xpos[s] for s in snrs]
        ax.set_xticks(ticks)
        ax.set_xticklabels(["clean" if math.isinf(s) else f"{s:g}" for s in snrs])
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("Accuracy (%)")
        ax.set_ylim(0, 101)
        ax.grid(alpha=0.3)
        ax.legend(loc="lower right", fontsize=8)
        ax.set_title(title)
        fig.tight_layout()

    out = _save_svg(fig, path)
    logger.info(f"Wrote sweep plot with {len(snrs)} SNR points to {out}")
    return out
