"""Minimal self-contained SVG plots (histogram, normal QQ, line)."""

from __future__ import annotations

import math
import os
from xml.sax.saxutils import escape

import numpy as np
from scipy import stats as sps

KINDS = ("histogram", "qq-normal", "line")
WIDTH, HEIGHT = 480, 360
MARGIN = dict(left=60, right=20, top=36, bottom=48)


def qq_points(data):
    """Theoretical normal quantiles against the standardised order statistics."""
    x = np.sort(np.asarray(data, dtype=np.float64))
    n = x.size
    theo = sps.norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    sd = x.std(ddof=1) if n > 1 else 1.0
    return theo, (x - x.mean()) / (sd if sd > 0 else 1.0)


def qq_slope(data):
    theo, emp = qq_points(data)
    return float(np.polyfit(theo, emp, 1)[0])


def _fmt(v):
    return f"{v:.2f}"


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int((hi - first) / step + 1e-9) + 1)]


class _Canvas:
    def __init__(self, xlim, ylim, title, xlabel, ylabel):
        (x0, x1), (y0, y1) = xlim, ylim
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 <= y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        self.xlim, self.ylim = (x0, x1), (y0, y1)
        self.parts = []
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        self._axes(title, xlabel, ylabel)

    def sx(self, x):
        x0, x1 = self.xlim
        return MARGIN["left"] + (x - x0) / (x1 - x0) * self.pw

    def sy(self, y):
        y0, y1 = self.ylim
        return MARGIN["top"] + (1 - (y - y0) / (y1 - y0)) * self.ph

    def _axes(self, title, xlabel, ylabel):
        l, t = MARGIN["left"], MARGIN["top"]
        p = self.parts
        p.append(f'<rect x="{l}" y="{t}" width="{self.pw}" height="{self.ph}" fill="none" stroke="#444"/>')
        for v in _ticks(*self.xlim):
            x = self.sx(v)
            p.append(f'<line x1="{_fmt(x)}" y1="{t + self.ph}" x2="{_fmt(x)}" y2="{t + self.ph + 4}" stroke="#444"/>')
            p.append(f'<text x="{_fmt(x)}" y="{t + self.ph + 16}" text-anchor="middle">{v:.3g}</text>')
        for v in _ticks(*self.ylim):
            y = self.sy(v)
            p.append(f'<line x1="{l - 4}" y1="{_fmt(y)}" x2="{l}" y2="{_fmt(y)}" stroke="#444"/>')
            p.append(f'<text x="{l - 6}" y="{_fmt(y + 4)}" text-anchor="end">{v:.3g}</text>')
        p.append(f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-weight="bold">{escape(title)}</text>')
        p.append(f'<text x="{l + self.pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
        p.append(f'<text x="14" y="{t + self.ph / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {t + self.ph / 2})">{escape(ylabel)}</text>')

    def render(self):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">')
        return "\n".join([head, *self.parts, "</svg>", ""])


def _histogram(data, title, xlabel, ylabel):
    x = np.asarray(data, dtype=np.float64)
    bins = int(min(60, max(5, round(2 * x.size ** (1 / 3)))))
    counts, edges = np.histogram(x, bins=bins)
    dens = counts / (x.size * np.diff(edges))
    c = _Canvas((edges[0], edges[-1]), (0.0, dens.max() * 1.05), title, xlabel, ylabel or "density")
    for k, h in enumerate(dens):
        x0, x1 = c.sx(edges[k]), c.sx(edges[k + 1])
        y = c.sy(h)
        c.parts.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y)}" width="{_fmt(x1 - x0)}" '
                       f'height="{_fmt(c.sy(0) - y)}" fill="#7aa6c2" stroke="#2f5f7f"/>')
    return c


def _qq(data, title, xlabel, ylabel):
    theo, emp = qq_points(data)
    lo = float(min(theo.min(), emp.min()))
    hi = float(max(theo.max(), emp.max()))
    c = _Canvas((lo, hi), (lo, hi), title, xlabel or "normal quantile", ylabel or "standardised sample")
    c.parts.append(f'<line x1="{_fmt(c.sx(lo))}" y1="{_fmt(c.sy(lo))}" x2="{_fmt(c.sx(hi))}" '
                   f'y2="{_fmt(c.sy(hi))}" stroke="#c44" stroke-dasharray="4 3"/>')
    if theo.size > 2000:  # thin the middle, keep both tails
        keep = np.unique(np.concatenate([np.arange(500), np.linspace(0, theo.size - 1, 1000).astype(int),
                                         np.arange(theo.size - 500, theo.size)]))
        theo, emp = theo[keep], emp[keep]
    for a, b in zip(theo, emp):
        c.parts.append(f'<circle cx="{_fmt(c.sx(a))}" cy="{_fmt(c.sy(b))}" r="1.6" fill="#2f5f7f"/>')
    return c


def _line(data, title, xlabel, ylabel):
    if isinstance(data, dict):
        series = {str(k): v for k, v in data.items()}
    else:
        series = {"": data}
    pairs = {}
    for label, s in series.items():
        arr = np.asarray(s, dtype=np.float64)
        if arr.ndim == 2 and arr.shape[0] == 2:
            x, y = arr
        else:
            y = arr.ravel()
            x = np.arange(y.size, dtype=np.float64)
        if y.size == 0:
            raise ValueError("empty series")
        pairs[label] = (x, y)
    xs = np.concatenate([p[0] for p in pairs.values()])
    ys = np.concatenate([p[1] for p in pairs.values()])
    finite = np.isfinite(ys)
    if not finite.any():
        raise ValueError("no finite values to plot")
    c = _Canvas((xs.min(), xs.max()), (ys[finite].min(), ys[finite].max()), title, xlabel, ylabel)
    colours = ("#2f5f7f", "#c44", "#4a4", "#a6a", "#d80")
    for k, (label, (x, y)) in enumerate(pairs.items()):
        col = colours[k % len(colours)]
        pts = [(c.sx(a), c.sy(b)) for a, b in zip(x, y) if np.isfinite(b)]
        if len(pts) > 1:
            path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            c.parts.append(f'<polyline points="{path}" fill="none" stroke="{col}"/>')
        for a, b in pts:
            c.parts.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="{col}"/>')
        if label:
            c.parts.append(f'<text x="{c.sx(c.xlim[0]) + 8}" y="{MARGIN["top"] + 14 + 13 * k}" '
                           f'fill="{col}">{escape(label)}</text>')
    return c


def render_svg(kind, data, title="", xlabel="", ylabel=""):
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    if data is None or (not isinstance(data, dict) and np.asarray(data).size == 0) \
            or (isinstance(data, dict) and not data):
        raise ValueError("cannot plot empty data")
    builder = {"histogram": _histogram, "qq-normal": _qq, "line": _line}[kind]
    return builder(data, title, xlabel, ylabel).render()


def emit_svg(kind, data, path, title="", xlabel="", ylabel=""):
    """Write a plot to ``path``; nothing is written if the data are unusable."""
    text = render_svg(kind, data, title, xlabel, ylabel)
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path
