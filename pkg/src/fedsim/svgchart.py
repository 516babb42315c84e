"""Self-contained SVG line charts with no plotting dependency.

Output is byte-deterministic: fixed palette, fixed 2-decimal coordinate
formatting, no timestamps. Each series draws a mean polyline plus a shaded
+-1 std band; regenerating from the same summaries gives identical bytes.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ConfigError
from .metrics import ArmSummary

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]

WIDTH, HEIGHT = 960, 600
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 200, 50, 60

KIND_LABELS = {
    "accuracy": ("Communication round", "Test accuracy"),
    "loss": ("Communication round", "Test loss"),
    "delay": ("Communication round", "Round delay (s)"),
}


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _series(summary: ArmSummary, kind: str) -> tuple[list[int], list[float], list[float]]:
    if kind == "accuracy":
        return summary.rounds, summary.accuracy_mean, summary.accuracy_std
    if kind == "loss":
        return summary.rounds, summary.loss_mean, summary.loss_std
    if kind == "delay":
        xs, ys = [], []
        for rnd, d in zip(summary.rounds, summary.delay_mean):
            if d is not None:
                xs.append(rnd)
                ys.append(d)
        return xs, ys, [0.0] * len(ys)
    raise ConfigError(f"unknown plot kind {kind!r}")


def emit_plot(summaries: list[ArmSummary], kind: str, path, title: str = "") -> None:
    """Write one line chart, one series per arm, mean with +-1 std band."""
    if not summaries:
        raise ConfigError("emit_plot: empty summary list")
    if kind not in KIND_LABELS:
        raise ConfigError(f"unknown plot kind {kind!r}")
    x_label, y_label = KIND_LABELS[kind]

    data = [(_escape(s.name or f"arm{i}"), *_series(s, kind)) for i, s in enumerate(summaries)]
    xs_all = [x for _, xs, _, _ in data for x in xs]
    ys_all = [y + sd for _, _, ys, sds in data for y, sd in zip(ys, sds)]
    ys_all += [y - sd for _, _, ys, sds in data for y, sd in zip(ys, sds)]
    if not xs_all:
        raise ConfigError("emit_plot: summaries contain no points")
    x_min, x_max = min(xs_all), max(xs_all)
    y_min, y_max = min(ys_all), max(ys_all)
    if kind == "accuracy":
        y_min, y_max = 0.0, 1.0
    elif y_max == y_min:
        y_max = y_min + 1.0

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        if x_max == x_min:
            return MARGIN_L + plot_w / 2
        return MARGIN_L + (x - x_min) / (x_max - x_min) * plot_w

    def py(y: float) -> float:
        return MARGIN_T + (y_max - y) / (y_max - y_min) * plot_h

    def pt(x: float, y: float) -> str:
        return f"{px(x):.2f},{py(y):.2f}"

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="#ffffff"/>',
    ]
    if title:
        lines.append(
            f'<text x="{WIDTH / 2:.0f}" y="28" text-anchor="middle" font-size="18" '
            f'font-family="sans-serif">{_escape(title)}</text>'
        )

    # gridlines and y ticks
    for i in range(6):
        y_val = y_min + (y_max - y_min) * i / 5
        ypix = py(y_val)
        lines.append(
            f'<line x1="{MARGIN_L}" y1="{ypix:.2f}" x2="{MARGIN_L + plot_w}" '
            f'y2="{ypix:.2f}" stroke="#dddddd" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{MARGIN_L - 8}" y="{ypix + 4:.2f}" text-anchor="end" '
            f'font-size="12" font-family="sans-serif">{y_val:.2f}</text>'
        )
    # x ticks: five evenly spaced
    for i in range(6):
        x_val = x_min + (x_max - x_min) * i / 5
        xpix = px(x_val)
        lines.append(
            f'<line x1="{xpix:.2f}" y1="{MARGIN_T + plot_h}" x2="{xpix:.2f}" '
            f'y2="{MARGIN_T + plot_h + 5}" stroke="#000000" stroke-width="1"/>'
        )
        lines.append(
            f'<text x="{xpix:.2f}" y="{MARGIN_T + plot_h + 20}" text-anchor="middle" '
            f'font-size="12" font-family="sans-serif">{x_val:.0f}</text>'
        )
    # axes
    lines.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
        f'y2="{MARGIN_T + plot_h}" stroke="#000000" stroke-width="1.5"/>'
    )
    lines.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T + plot_h}" x2="{MARGIN_L + plot_w}" '
        f'y2="{MARGIN_T + plot_h}" stroke="#000000" stroke-width="1.5"/>'
    )
    lines.append(
        f'<text x="{MARGIN_L + plot_w / 2:.0f}" y="{HEIGHT - 18}" text-anchor="middle" '
        f'font-size="14" font-family="sans-serif">{_escape(x_label)}</text>'
    )
    lines.append(
        f'<text x="20" y="{MARGIN_T + plot_h / 2:.0f}" text-anchor="middle" '
        f'font-size="14" font-family="sans-serif" '
        f'transform="rotate(-90 20 {MARGIN_T + plot_h / 2:.0f})">{_escape(y_label)}</text>'
    )

    for idx, (name, xs, ys, sds) in enumerate(data):
        color = PALETTE[idx % len(PALETTE)]
        if any(sd > 0 for sd in sds):
            upper = [pt(x, y + sd) for x, y, sd in zip(xs, ys, sds)]
            lower = [pt(x, y - sd) for x, y, sd in reversed(list(zip(xs, ys, sds)))]
            lines.append(
                f'<polygon fill="{color}" fill-opacity="0.15" stroke="none" '
                f'points="{" ".join(upper + lower)}"/>'
            )
        points = " ".join(pt(x, y) for x, y in zip(xs, ys))
        lines.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{points}"/>'
        )
        ly = MARGIN_T + 16 + idx * 22
        lx = MARGIN_L + plot_w + 16
        lines.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 22}" y2="{ly}" stroke="{color}" '
            f'stroke-width="2"/>'
        )
        lines.append(
            f'<text x="{lx + 28}" y="{ly + 4}" font-size="12" '
            f'font-family="sans-serif">{name}</text>'
        )

    lines.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
