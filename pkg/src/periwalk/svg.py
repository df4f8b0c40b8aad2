"""Minimal deterministic SVG line and bar charts.

Byte determinism matters more than polish here: replotting the same numbers
must reproduce the same file, so every coordinate goes through one fixed
formatter and nothing depends on platform, locale, or dict order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PALETTE = ("#2b6cb0", "#c0392b", "#2f855a", "#805ad5", "#b7791f", "#4a5568")
FONT = "Helvetica, Arial, sans-serif"

WIDTH = 640
HEIGHT = 400
MARGIN_L = 62
MARGIN_R = 16
MARGIN_T = 34
MARGIN_B = 46


@dataclass
class Series:
    """One plotted curve; error bounds are absolute, not offsets."""

    x: np.ndarray
    y: np.ndarray
    label: str
    err_lo: np.ndarray = None
    err_hi: np.ndarray = None
    dash: str = None
    marker: bool = True


def _fmt(v):
    """Pixel coordinate with two decimals, trailing zeros trimmed."""
    s = f"{float(v):.2f}"
    s = s.rstrip("0").rstrip(".")
    if s in ("", "-0"):
        return "0"
    return s


def _tick_label(v):
    v = float(v)
    if v == 0.0:
        v = 0.0
    return f"{v:g}"


def nice_ticks(lo, hi, target=5):
    """Round tick positions at a 1/2/5 step covering ``[lo, hi]``."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = np.ceil(lo / step) * step
    ticks = np.arange(first, hi + 0.5 * step, step)
    # snap to the step grid so labels come out clean
    return np.round(ticks / step) * step


def _data_range(values, pad=0.05):
    finite = np.asarray(values, dtype=np.float64)
    finite = finite[np.isfinite(finite)]
    if finite.size == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if hi <= lo:
        return lo - 1.0, hi + 1.0
    span = hi - lo
    return lo - pad * span, hi + pad * span


def _esc(text):
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


class _Canvas:
    def __init__(self):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        ]

    def line(self, x1, y1, x2, y2, color, width="1", dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
            f'y2="{_fmt(y2)}" stroke="{color}" stroke-width="{width}"{d}/>')

    def polyline(self, pts, color, dash=None):
        coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in pts)
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="1.6"{d}/>')

    def circle(self, x, y, r, color):
        self.parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}" '
            f'fill="{color}"/>')

    def rect(self, x, y, w, h, color):
        self.parts.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
            f'height="{_fmt(h)}" fill="{color}"/>')

    def text(self, x, y, s, size=12, anchor="start", color="#1a202c",
             rotate=None):
        t = (f' transform="rotate({rotate} {_fmt(x)} {_fmt(y)})"'
             if rotate is not None else "")
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="{FONT}" '
            f'font-size="{size}" fill="{color}" text-anchor="{anchor}"{t}>'
            f'{_esc(s)}</text>')

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _axes(cv, x_lo, x_hi, y_lo, y_hi, title, xlabel, ylabel, x_ticks=None):
    """Draw frame, grid, and labels; returns the data-to-pixel maps."""
    px_w = WIDTH - MARGIN_L - MARGIN_R
    px_h = HEIGHT - MARGIN_T - MARGIN_B

    def sx(v):
        return MARGIN_L + (v - x_lo) / (x_hi - x_lo) * px_w

    def sy(v):
        return HEIGHT - MARGIN_B - (v - y_lo) / (y_hi - y_lo) * px_h

    if x_ticks is None:
        xt = [(v, _tick_label(v)) for v in nice_ticks(x_lo, x_hi)
              if x_lo <= v <= x_hi]
    else:
        xt = [(v, lab) for v, lab in x_ticks if x_lo <= v <= x_hi]
    yt = [(v, _tick_label(v)) for v in nice_ticks(y_lo, y_hi)
          if y_lo <= v <= y_hi]

    for v, _ in xt:
        cv.line(sx(v), MARGIN_T, sx(v), HEIGHT - MARGIN_B, "#e2e8f0")
    for v, _ in yt:
        cv.line(MARGIN_L, sy(v), WIDTH - MARGIN_R, sy(v), "#e2e8f0")
    cv.line(MARGIN_L, MARGIN_T, MARGIN_L, HEIGHT - MARGIN_B, "#1a202c")
    cv.line(MARGIN_L, HEIGHT - MARGIN_B, WIDTH - MARGIN_R,
            HEIGHT - MARGIN_B, "#1a202c")
    for v, lab in xt:
        cv.text(sx(v), HEIGHT - MARGIN_B + 16, lab, anchor="middle")
    for v, lab in yt:
        cv.text(MARGIN_L - 6, sy(v) + 4, lab, anchor="end")
    cv.text(WIDTH / 2, 20, title, size=14, anchor="middle")
    cv.text(WIDTH / 2, HEIGHT - 10, xlabel, anchor="middle")
    cv.text(16, HEIGHT / 2, ylabel, anchor="middle", rotate=-90)
    return sx, sy


def _legend(cv, series):
    x0 = MARGIN_L + 12
    y0 = MARGIN_T + 14
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        y = y0 + 16 * i
        cv.line(x0, y - 4, x0 + 22, y - 4, color, width="1.6", dash=s.dash)
        cv.text(x0 + 28, y, s.label)


def line_chart(series, title, xlabel, ylabel, x_ticks=None, hline=None):
    """Render curves with optional error bars to an SVG string.

    ``x_ticks`` overrides the tick positions as ``[(value, label), ...]``;
    ``hline`` draws a labeled horizontal reference as ``(value, label)``.
    """
    xs = np.concatenate([np.asarray(s.x, dtype=np.float64) for s in series])
    ys = [np.asarray(s.y, dtype=np.float64) for s in series]
    for s in series:
        if s.err_lo is not None:
            ys.append(np.asarray(s.err_lo, dtype=np.float64))
            ys.append(np.asarray(s.err_hi, dtype=np.float64))
    if hline is not None:
        ys.append(np.array([hline[0]]))
    x_lo, x_hi = _data_range(xs)
    y_lo, y_hi = _data_range(np.concatenate(ys))

    cv = _Canvas()
    sx, sy = _axes(cv, x_lo, x_hi, y_lo, y_hi, title, xlabel, ylabel,
                   x_ticks=x_ticks)
    if hline is not None:
        cv.line(sx(x_lo), sy(hline[0]), sx(x_hi), sy(hline[0]),
                "#4a5568", dash="6,3")
        cv.text(sx(x_hi) - 4, sy(hline[0]) - 5, hline[1], anchor="end",
                color="#4a5568")
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        x = np.asarray(s.x, dtype=np.float64)
        y = np.asarray(s.y, dtype=np.float64)
        if s.err_lo is not None:
            for j in range(x.size):
                cv.line(sx(x[j]), sy(s.err_lo[j]), sx(x[j]), sy(s.err_hi[j]),
                        color)
                cv.line(sx(x[j]) - 3, sy(s.err_lo[j]), sx(x[j]) + 3,
                        sy(s.err_lo[j]), color)
                cv.line(sx(x[j]) - 3, sy(s.err_hi[j]), sx(x[j]) + 3,
                        sy(s.err_hi[j]), color)
        keep = np.isfinite(y)
        cv.polyline(list(zip(sx(x[keep]), sy(y[keep]))), color, dash=s.dash)
        if s.marker:
            for j in np.flatnonzero(keep):
                cv.circle(sx(x[j]), sy(y[j]), "2.6", color)
    if len(series) > 1 or series[0].label:
        _legend(cv, series)
    return cv.render()


def bar_chart(labels, values, title, ylabel):
    """Categorical bars with the value printed above each one."""
    values = np.asarray(values, dtype=np.float64)
    y_lo = min(0.0, float(values.min()))
    y_hi = float(values.max())
    y_lo, y_hi = _data_range([y_lo, y_hi])

    cv = _Canvas()
    n = len(labels)
    x_ticks = [(i + 0.5, str(lab)) for i, lab in enumerate(labels)]
    sx, sy = _axes(cv, 0.0, float(n), y_lo, y_hi, title, "", ylabel,
                   x_ticks=x_ticks)
    for i, v in enumerate(values):
        color = PALETTE[i % len(PALETTE)]
        x0 = sx(i + 0.2)
        x1 = sx(i + 0.8)
        cv.rect(x0, sy(v), x1 - x0, sy(y_lo if y_lo > 0 else 0.0) - sy(v),
                color)
        cv.text((x0 + x1) / 2, sy(v) - 6, f"{v:.6g}", anchor="middle")
    return cv.render()


def write_svg(path, text):
    with open(path, "w") as fh:
        fh.write(text)
