"""Report emission: prediction-vs-target scatter SVG and comparison tables.

The scatter uses one shared data range for both axes so the y = x diagonal
runs corner to corner of the plot area; points on the diagonal land on the
rendered line to sub-pixel accuracy. The SVG is self-contained (inline
styles, no external fonts).
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .dataset import fmt
from .errors import ValidationError
from .evalstat import EvalReport, FriedmanResult, PairDecision

WIDTH = 640
HEIGHT = 640
MARGIN_LEFT = 70
MARGIN_RIGHT = 24
MARGIN_TOP = 46
MARGIN_BOTTOM = 58


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw_step = span / max(target - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw_step))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if span / step <= target:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def scatter_svg(pairs, title: str = "", xlabel: str = "target",
                ylabel: str = "prediction") -> str:
    """SVG scatter of (target, prediction) pairs with the y = x diagonal."""
    pairs = [(float(t), float(p)) for t, p in pairs]
    if not pairs:
        raise ValidationError("no pairs to plot")
    values = [v for tp in pairs for v in tp]
    lo, hi = min(values), max(values)
    if hi == lo:
        lo -= 0.5
        hi += 0.5
    pad = 0.05 * (hi - lo)
    lo -= pad
    hi += pad

    px_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    px_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(v: float) -> float:
        return MARGIN_LEFT + (v - lo) / (hi - lo) * px_w

    def sy(v: float) -> float:
        return HEIGHT - MARGIN_BOTTOM - (v - lo) / (hi - lo) * px_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{px_w}" '
        f'height="{px_h}" fill="none" stroke="#444" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{WIDTH / 2:.1f}" y="26" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16">{escape(title)}</text>')

    for t in _nice_ticks(lo, hi):
        x = sx(t)
        y = sy(t)
        label = f"{t:g}"
        parts.append(f'<line x1="{x:.2f}" y1="{HEIGHT - MARGIN_BOTTOM}" '
                     f'x2="{x:.2f}" y2="{HEIGHT - MARGIN_BOTTOM + 5}" '
                     f'stroke="#444" stroke-width="1"/>')
        parts.append(f'<text x="{x:.2f}" y="{HEIGHT - MARGIN_BOTTOM + 18}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{label}</text>')
        parts.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{y:.2f}" '
                     f'x2="{MARGIN_LEFT}" y2="{y:.2f}" '
                     f'stroke="#444" stroke-width="1"/>')
        parts.append(f'<text x="{MARGIN_LEFT - 8}" y="{y + 4:.2f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{label}</text>')

    parts.append(f'<text x="{MARGIN_LEFT + px_w / 2:.1f}" y="{HEIGHT - 14}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13">{escape(xlabel)}</text>')
    parts.append(f'<text x="20" y="{MARGIN_TOP + px_h / 2:.1f}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="13" '
                 f'transform="rotate(-90 20 {MARGIN_TOP + px_h / 2:.1f})">'
                 f'{escape(ylabel)}</text>')

    parts.append(f'<line x1="{sx(lo):.2f}" y1="{sy(lo):.2f}" '
                 f'x2="{sx(hi):.2f}" y2="{sy(hi):.2f}" '
                 f'stroke="#c33" stroke-width="1.2" stroke-dasharray="6 3"/>')

    for t, p in pairs:
        parts.append(f'<circle cx="{sx(t):.2f}" cy="{sy(p):.2f}" r="3" '
                     f'fill="#1f6fb3" fill-opacity="0.65" stroke="none"/>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def pairs_csv(pairs) -> str:
    lines = ["target,prediction"]
    for t, p in pairs:
        lines.append(f"{fmt(t)},{fmt(p)}")
    return "\n".join(lines) + "\n"


def parse_pairs_csv(text: str) -> list[tuple[float, float]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "target,prediction":
        raise ValidationError("expected header 'target,prediction'")
    out = []
    for ln in lines[1:]:
        t, p = ln.split(",")
        out.append((float(t), float(p)))
    return out


def report_column_csv(report: EvalReport) -> str:
    """Single-family fold column in the comparison-table layout."""
    lines = [f"fold,{report.family}"]
    for i, r2 in enumerate(report.fold_r2, start=1):
        lines.append(f"{i},{fmt(r2)}")
    lines.append(f"Média,{fmt(report.mean_r2)}")
    return "\n".join(lines) + "\n"


def parse_report_column_csv(text: str) -> tuple[str, list[float], float]:
    """Returns (family, per-fold scores, mean)."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if len(header) != 2 or header[0] != "fold":
        raise ValidationError(f"bad report header: {lines[0]!r}")
    family = header[1]
    scores = []
    mean = None
    for ln in lines[1:]:
        label, value = ln.split(",")
        if label == "Média":
            mean = float(value)
        else:
            scores.append(float(value))
    if mean is None or not scores:
        raise ValidationError("report missing fold rows or Média row")
    return family, scores, mean


def comparison_matrix_csv(families: list[str], matrix: np.ndarray) -> str:
    """Tables 2-5 style layout: fold rows then the Média row."""
    lines = ["fold," + ",".join(families)]
    for i in range(matrix.shape[0]):
        lines.append(f"{i + 1}," + ",".join(fmt(v) for v in matrix[i]))
    means = matrix.mean(axis=0)
    lines.append("Média," + ",".join(fmt(v) for v in means))
    return "\n".join(lines) + "\n"


def friedman_csv(result: FriedmanResult, decisions: list[PairDecision],
                 alpha: float) -> str:
    lines = ["# Friedman rank test with Bonferroni-corrected pairwise decisions",
             "# critical difference: two-tailed Bonferroni-Dunn on mean ranks, "
             "z at alpha/(2(k-1)) times sqrt(k(k+1)/(6n))",
             "statistic,df,p_value,n_blocks,alpha"]
    lines.append(f"{fmt(result.statistic)},{result.df},{fmt(result.p_value)},"
                 f"{result.n_blocks},{fmt(alpha)}")
    lines.append("treatment,mean_rank")
    for name, rank in zip(result.treatments, result.mean_ranks):
        lines.append(f"{name},{fmt(float(rank))}")
    lines.append("pair_a,pair_b,rank_difference,critical_difference,significant")
    for d in decisions:
        lines.append(f"{d.pair[0]},{d.pair[1]},{fmt(d.rank_difference)},"
                     f"{fmt(d.critical_difference)},{int(d.significant)}")
    return "\n".join(lines) + "\n"
