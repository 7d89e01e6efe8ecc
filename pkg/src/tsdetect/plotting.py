"""Minimal hand-rolled SVG rendering for score diagnostics."""

import numpy as np

from .evaluation import label_segments


def render_score_svg(scores, labels=None, width=1200, height=240, margin=10):
    """A score polyline with shaded ground-truth anomaly regions."""
    scores = np.asarray(scores, dtype=np.float64)
    t = len(scores)
    inner_w = width - 2 * margin
    inner_h = height - 2 * margin

    def x_of(i):
        return margin + inner_w * i / max(t - 1, 1)

    def y_of(v):
        return margin + inner_h * (1.0 - v)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if labels is not None:
        for s, e in label_segments(labels):
            x0 = x_of(s)
            x1 = x_of(max(e - 1, s))
            w = max(x1 - x0, 1.0)
            parts.append(
                f'<rect x="{x0:.2f}" y="{margin}" width="{w:.2f}" '
                f'height="{inner_h}" fill="#f4a0a0" fill-opacity="0.5"/>')
    points = " ".join(f"{x_of(i):.2f},{y_of(v):.2f}"
                      for i, v in enumerate(np.clip(scores, 0.0, 1.0)))
    parts.append(f'<polyline points="{points}" fill="none" '
                 'stroke="#2060c0" stroke-width="1"/>')
    parts.append(f'<line x1="{margin}" y1="{y_of(0.0):.2f}" x2="{width - margin}" '
                 f'y2="{y_of(0.0):.2f}" stroke="#808080" stroke-width="0.5"/>')
    parts.append("</svg>")
    return "\n".join(parts)
