"""Matplotlib renders of run summaries, written next to the CSV output.

These PNGs are the human-friendly view; the byte-deterministic artifact is
the SVG from svgchart. Agg backend only, no display required.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import ArmSummary  # noqa: E402

_STYLE = {
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.framealpha": 0.9,
    "font.size": 10,
}


def render_png(summaries: list[ArmSummary], kind: str, path, title: str = "") -> Path:
    """Accuracy/loss curves per arm, mean with +-1 std band."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for summary in summaries:
            ys = summary.accuracy_mean if kind == "accuracy" else summary.loss_mean
            sds = summary.accuracy_std if kind == "accuracy" else summary.loss_std
            xs = summary.rounds
            (line,) = ax.plot(xs, ys, label=summary.name, linewidth=1.6)
            lo = [y - s for y, s in zip(ys, sds)]
            hi = [y + s for y, s in zip(ys, sds)]
            ax.fill_between(xs, lo, hi, color=line.get_color(), alpha=0.15, linewidth=0)
        ax.set_xlabel("Communication round")
        ax.set_ylabel("Test accuracy" if kind == "accuracy" else "Test loss")
        if kind == "accuracy":
            ax.set_ylim(0.0, 1.0)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", fontsize=9)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
