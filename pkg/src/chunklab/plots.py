"""Figure rendering for the report commands.

Figures are written next to the delimited output; SVG is the default so the
artefacts stay text-based and diffable. Hash salt and metadata are pinned so
repeated runs produce identical files.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .metrics import SweepPoint, sweep_argmax  # noqa: E402

plt.rcParams["svg.hashsalt"] = "chunklab"


def save_sweep_plot(points: Sequence[SweepPoint], path: str) -> None:
    """Line chart of correlation against the mixing weight, argmax marked."""
    defined = [(p.lam, p.r) for p in points if p.r is not None]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if defined:
        xs, ys = zip(*defined)
        ax.plot(xs, ys, color="#1f77b4", linewidth=1.5)
        best = sweep_argmax(points)
        ax.scatter([points[best].lam], [points[best].r], color="#d62728", zorder=3)
        ax.annotate(
            f"best: {points[best].lam:.2f} (r={points[best].r:.4f})",
            xy=(points[best].lam, points[best].r),
            xytext=(5, -12),
            textcoords="offset points",
            fontsize=9,
        )
    ax.set_xlabel("mixing weight")
    ax.set_ylabel("Pearson r")
    ax.set_title("Correlation with downstream quality")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata=_metadata(path))
    plt.close(fig)


def save_ppl_plot(rows: Sequence[tuple[int, float, float]], path: str) -> None:
    """Per-chunk perplexity of original vs completed text."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if rows:
        idx = [r[0] for r in rows]
        orig = [r[1] for r in rows]
        comp = [r[2] for r in rows]
        ax.plot(idx, orig, marker="o", label="original", color="#1f77b4")
        ax.plot(idx, comp, marker="s", label="completed", color="#2ca02c")
        ax.legend()
    ax.set_xlabel("chunk index")
    ax.set_ylabel("perplexity")
    ax.set_title("Perplexity before and after knowledge completion")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata=_metadata(path))
    plt.close(fig)


def _metadata(path: str) -> dict | None:
    # Strip the volatile creation date so outputs are byte-stable.
    if path.endswith(".svg"):
        return {"Date": None}
    if path.endswith(".png"):
        return {"Software": None}
    return None
