"""Power heatmaps as plain SVG 1.1 (rectangles and text, no plotting library)."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .power import PowerTable, format_es

CELL_W = 64
CELL_H = 36
LEFT = 70
TOP = 56
DARK = (8, 48, 107)


def _fill(pct: float) -> str:
    f = min(max(pct / 100.0, 0.0), 1.0)
    r, g, b = (round(255 + (d - 255) * f) for d in DARK)
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(
    table: PowerTable, k_true: int, detector: str = "binseg_bic", phi: float = 0.0,
    title: str | None = None,
) -> str:
    """One panel: rows are series lengths, columns effect sizes, text is % correct K."""
    cells = [c for c in table if c.k_true == k_true and c.detector == detector and c.phi == phi]
    ns = sorted({c.n for c in cells})
    ess = sorted({c.effect_size for c in cells})
    lookup = {(c.n, c.effect_size): c for c in cells}
    width = LEFT + CELL_W * len(ess) + 20
    height = TOP + CELL_H * len(ns) + 50
    if title is None:
        title = f"{detector}: % correct number of changepoints, K = {k_true}"
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<text x="{width / 2:g}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for i, n in enumerate(ns):
        y = TOP + i * CELL_H
        out.append(
            f'<text x="{LEFT - 8}" y="{y + CELL_H / 2 + 4:g}" text-anchor="end" font-size="12">n = {n}</text>'
        )
        for j, es in enumerate(ess):
            x = LEFT + j * CELL_W
            c = lookup.get((n, es))
            if c is None or not c.feasible:
                fill, label, ink = "#d9d9d9", "NA", "#000000"
            else:
                pct = c.pct_correct_k
                fill, label = _fill(pct), f"{round(pct):d}"
                ink = "#ffffff" if pct > 55 else "#000000"
            out.append(
                f'<rect x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{fill}" '
                'stroke="#ffffff" stroke-width="1"/>'
            )
            out.append(
                f'<text x="{x + CELL_W / 2:g}" y="{y + CELL_H / 2 + 4:g}" text-anchor="middle" '
                f'font-size="12" fill="{ink}">{label}</text>'
            )
    base = TOP + CELL_H * len(ns)
    for j, es in enumerate(ess):
        out.append(
            f'<text x="{LEFT + j * CELL_W + CELL_W / 2:g}" y="{base + 18}" text-anchor="middle" '
            f'font-size="12">{format_es(es)}</text>'
        )
    out.append(
        f'<text x="{LEFT + CELL_W * len(ess) / 2:g}" y="{base + 40}" text-anchor="middle" '
        'font-size="12">effect size</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
