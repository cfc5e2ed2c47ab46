"""Deterministic SVG figures for reports."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core import LEAVES  # noqa: E402

COLORS = {"BET": "#c0392b", "SKJ": "#2471a3", "YFT": "#d4ac0d", "NO_TARGET": "#7f8c8d"}


def _save(fig, path) -> None:
    with matplotlib.rc_context({"svg.hashsalt": "catchcomp", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def composition_bars(estimates: Sequence, truths: Sequence, path) -> None:
    """Stacked composition bars per operation, true next to predicted."""
    truth = {t.afo_id: t.composition() for t in truths}
    ids = [e.afo_id for e in estimates]
    x = np.arange(len(ids))
    fig, ax = plt.subplots(figsize=(max(6.0, 0.5 * len(ids) + 2), 4))
    width = 0.4
    for offset, source in ((-width / 2, "true"), (width / 2, "pred")):
        bottom = np.zeros(len(ids))
        for leaf in LEAVES:
            if source == "true":
                vals = np.array([truth[a][leaf] if a in truth else 0.0 for a in ids])
            else:
                vals = np.array([e.percentages[leaf] for e in estimates])
            ax.bar(x + offset, vals, width * 0.95, bottom=bottom, color=COLORS[leaf.value],
                   label=leaf.value if source == "true" else None,
                   hatch="//" if source == "pred" else None, edgecolor="white", linewidth=0.3)
            bottom += vals
    ax.set_xticks(x)
    ax.set_xticklabels(ids, rotation=90, fontsize=7)
    ax.set_ylabel("% of catch (left true, right predicted)")
    ax.set_ylim(0, 100)
    ax.legend(fontsize=7, ncol=4, loc="upper center", bbox_to_anchor=(0.5, 1.12))
    fig.tight_layout()
    _save(fig, path)


def pr_curves(curves: Sequence, path, title: str = "") -> None:
    """Interpolated precision-recall curve for each IoU threshold."""
    fig, ax = plt.subplots(figsize=(5, 4))
    cmap = plt.get_cmap("viridis")
    for i, c in enumerate(curves):
        if c.recall.size == 0:
            continue
        envelope = np.maximum.accumulate(c.precision[::-1])[::-1]
        ax.step(c.recall, envelope, where="post", color=cmap(i / max(1, len(curves) - 1)),
                linewidth=1, label=f"IoU {c.iou_threshold:.2f}" if i % 4 == 0 else None)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    _save(fig, path)
