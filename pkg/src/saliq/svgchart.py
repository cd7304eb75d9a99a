"""Minimal hand-rolled SVG line chart: error vs protection budget.

One polyline per method on a log-scale budget axis. No plotting dependency;
the output is deterministic for identical inputs.
"""

from __future__ import annotations

import math

WIDTH, HEIGHT = 720, 460
MARGIN_LEFT, MARGIN_RIGHT = 70, 170
MARGIN_TOP, MARGIN_BOTTOM = 30, 55

PALETTE = ("#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b")


def _x_position(k: int, smallest_positive: int) -> float:
    # budgets sit on a log10 axis; a budget of 0 is drawn one decade left of
    # the smallest positive budget
    if k > 0:
        return math.log10(k)
    return math.log10(smallest_positive) - 1.0


def line_chart(
    series: dict[str, list[tuple[int, float]]],
    y_label: str = "relative error",
    x_label: str = "protection budget (k)",
) -> str:
    """Render method -> [(budget, value)] as an SVG document string."""
    if not series or all(not pts for pts in series.values()):
        raise ValueError("nothing to plot")

    budgets = sorted({k for pts in series.values() for k, _ in pts})
    positive = [k for k in budgets if k > 0]
    smallest_positive = positive[0] if positive else 1
    xs = {k: _x_position(k, smallest_positive) for k in budgets}
    x_lo, x_hi = min(xs.values()), max(xs.values())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    values = [v for pts in series.values() for _, v in pts if math.isfinite(v)]
    y_hi = max(values) if values else 1.0
    y_hi = y_hi * 1.05 if y_hi > 0 else 1.0

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(k: int) -> float:
        return MARGIN_LEFT + (xs[k] - x_lo) / (x_hi - x_lo) * plot_w

    def py(v: float) -> float:
        if not math.isfinite(v):
            v = y_hi
        return MARGIN_TOP + (1.0 - v / y_hi) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP + plot_h}" x2="{MARGIN_LEFT + plot_w}" '
        f'y2="{MARGIN_TOP + plot_h}" stroke="black"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" '
        f'y2="{MARGIN_TOP + plot_h}" stroke="black"/>',
    ]

    for k in budgets:
        x = px(k)
        parts.append(
            f'<line x1="{x:.2f}" y1="{MARGIN_TOP + plot_h}" x2="{x:.2f}" '
            f'y2="{MARGIN_TOP + plot_h + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text class="xtick" x="{x:.2f}" y="{MARGIN_TOP + plot_h + 20}" '
            f'text-anchor="middle" font-size="12">{k}</text>'
        )
    for i in range(5):
        v = y_hi * i / 4
        y = py(v)
        parts.append(
            f'<line x1="{MARGIN_LEFT - 5}" y1="{y:.2f}" x2="{MARGIN_LEFT}" '
            f'y2="{y:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text class="ytick" x="{MARGIN_LEFT - 9}" y="{y + 4:.2f}" '
            f'text-anchor="end" font-size="11">{v:.3g}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_LEFT + plot_w / 2:.2f}" y="{HEIGHT - 12}" '
        f'text-anchor="middle" font-size="13">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{MARGIN_TOP + plot_h / 2:.2f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {MARGIN_TOP + plot_h / 2:.2f})">{y_label}</text>'
    )

    for i, (method, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{px(k):.2f},{py(v):.2f}" for k, v in sorted(pts))
        parts.append(
            f'<polyline class="series" fill="none" stroke="{color}" stroke-width="2" '
            f'points="{coords}"/>'
        )
        legend_y = MARGIN_TOP + 16 + 18 * i
        parts.append(
            f'<line x1="{WIDTH - MARGIN_RIGHT + 14}" y1="{legend_y}" '
            f'x2="{WIDTH - MARGIN_RIGHT + 38}" y2="{legend_y}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN_RIGHT + 44}" y="{legend_y + 4}" '
            f'font-size="12">{method}</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
