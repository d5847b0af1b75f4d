"""Minimal SVG plots: line plots, heatmaps and scatter plots.

Heatmaps use a fixed five-stop colormap (dark blue, blue, teal, green,
yellow) interpolated linearly in RGB.
"""
from __future__ import annotations

import datetime as _dt
from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 420
MARGIN = dict(left=70, right=20, top=40, bottom=55)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
           "#7f7f7f"]
CMAP_STOPS = np.array([
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
], dtype=float)


def colormap(v: float) -> str:
    v = float(np.clip(v, 0.0, 1.0)) * (len(CMAP_STOPS) - 1)
    i = min(int(v), len(CMAP_STOPS) - 2)
    f = v - i
    rgb = (1 - f) * CMAP_STOPS[i] + f * CMAP_STOPS[i + 1]
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _fmt(v: float) -> str:
    return f"{v:.4g}"


class _Canvas:
    def __init__(self, title, xlabel, ylabel, timestamp=True):
        self.parts = []
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.timestamp = timestamp
        self.x0, self.x1 = MARGIN["left"], W - MARGIN["right"]
        self.y0, self.y1 = H - MARGIN["bottom"], MARGIN["top"]

    def set_range(self, xmin, xmax, ymin, ymax):
        if xmax == xmin:
            xmax = xmin + 1
        if ymax == ymin:
            ymax = ymin + 1
        self.xr, self.yr = (xmin, xmax), (ymin, ymax)

    def px(self, x):
        return self.x0 + (x - self.xr[0]) / (self.xr[1] - self.xr[0]) * (self.x1 - self.x0)

    def py(self, y):
        return self.y0 - (y - self.yr[0]) / (self.yr[1] - self.yr[0]) * (self.y0 - self.y1)

    def add(self, s):
        self.parts.append(s)

    def axes(self, xticks=None, yticks=None):
        xt = np.linspace(*self.xr, 6) if xticks is None else xticks
        yt = np.linspace(*self.yr, 6) if yticks is None else yticks
        a = self.add
        a(f'<line x1="{self.x0}" y1="{self.y0}" x2="{self.x1}" y2="{self.y0}" stroke="black"/>')
        a(f'<line x1="{self.x0}" y1="{self.y0}" x2="{self.x0}" y2="{self.y1}" stroke="black"/>')
        for v in xt:
            x = self.px(v)
            a(f'<line x1="{x:.2f}" y1="{self.y0}" x2="{x:.2f}" y2="{self.y0 + 5}" stroke="black"/>')
            a(f'<text x="{x:.2f}" y="{self.y0 + 18}" font-size="11" text-anchor="middle">{_fmt(v)}</text>')
        for v in yt:
            y = self.py(v)
            a(f'<line x1="{self.x0 - 5}" y1="{y:.2f}" x2="{self.x0}" y2="{y:.2f}" stroke="black"/>')
            a(f'<text x="{self.x0 - 8}" y="{y + 4:.2f}" font-size="11" text-anchor="end">{_fmt(v)}</text>')
        a(f'<text x="{(self.x0 + self.x1) / 2}" y="{H - 15}" font-size="13" text-anchor="middle">'
          f'{escape(self.xlabel)}</text>')
        a(f'<text x="18" y="{(self.y0 + self.y1) / 2}" font-size="13" text-anchor="middle" '
          f'transform="rotate(-90 18 {(self.y0 + self.y1) / 2})">{escape(self.ylabel)}</text>')
        a(f'<text x="{W / 2}" y="24" font-size="15" text-anchor="middle">{escape(self.title)}</text>')

    def render(self) -> str:
        head = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
                f'viewBox="0 0 {W} {H}">']
        if self.timestamp:
            head.append(f"<!-- generated {_dt.datetime.now().isoformat(timespec='seconds')} -->")
        head.append(f'<rect width="{W}" height="{H}" fill="white"/>')
        return "\n".join(head + self.parts + ["</svg>", ""])


def line_plot(x, series, labels=None, title="", xlabel="x", ylabel="", timestamp=True) -> str:
    """One polyline per row of ``series`` against the common abscissa ``x``."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(s, dtype=float) for s in series]
    c = _Canvas(title, xlabel, ylabel, timestamp)
    ymax = max((float(np.nanmax(s)) for s in ys if s.size), default=1.0)
    c.set_range(float(x.min()), float(x.max()), 0.0, ymax * 1.05 if ymax > 0 else 1.0)
    c.axes()
    for k, s in enumerate(ys):
        pts = " ".join(f"{c.px(a):.2f},{c.py(b):.2f}" for a, b in zip(x, s) if np.isfinite(b))
        col = PALETTE[k % len(PALETTE)]
        c.add(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
        if labels is not None:
            c.add(f'<text x="{c.x1 - 5}" y="{c.y1 + 14 * (k + 1)}" font-size="11" '
                  f'text-anchor="end" fill="{col}">{escape(str(labels[k]))}</text>')
    return c.render()


def heatmap(matrix, times, sites, title="", xlabel="phenotype", ylabel="time",
            timestamp=True) -> str:
    """Rows are times (bottom to top), columns are sites; values scaled to the max."""
    Z = np.asarray(matrix, dtype=float)
    times = np.asarray(times, dtype=float)
    sites = np.asarray(sites, dtype=float)
    c = _Canvas(title, xlabel, ylabel, timestamp)
    c.set_range(sites.min() - 0.5, sites.max() + 0.5, float(times.min()), float(times.max()))
    zmax = float(Z.max()) if Z.size and Z.max() > 0 else 1.0
    nt = Z.shape[0]
    # row bands span the midpoints between consecutive snapshot times
    if nt > 1:
        edges = np.concatenate([[times[0]], 0.5 * (times[1:] + times[:-1]), [times[-1]]])
    else:
        edges = np.array([times[0], times[0] + 1])
        c.set_range(sites.min() - 0.5, sites.max() + 0.5, float(edges[0]), float(edges[1]))
    cw = c.px(sites[0] + 0.5) - c.px(sites[0] - 0.5)
    for i in range(nt):
        y_top, y_bot = c.py(edges[i + 1]), c.py(edges[i])
        h = max(y_bot - y_top, 0.0)
        if h == 0:
            continue
        for j, s in enumerate(sites):
            v = Z[i, j] / zmax
            if v <= 0:
                continue
            c.add(f'<rect x="{c.px(s - 0.5):.2f}" y="{y_top:.2f}" width="{cw:.2f}" '
                  f'height="{h:.2f}" fill="{colormap(v)}"/>')
    c.axes()
    return c.render()


def scatter_plot(x, y, means=None, title="", xlabel="", ylabel="", timestamp=True,
                 logy=False) -> str:
    """Points (x, y) plus an optional polyline through (x, mean) pairs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(y)
    tr = np.log10 if logy else (lambda v: v)
    c = _Canvas(title, xlabel, ylabel + (" (log10)" if logy else ""), timestamp)
    yy = tr(y[ok]) if ok.any() else np.array([0.0, 1.0])
    c.set_range(float(x.min()), float(x.max()), float(yy.min()), float(yy.max()))
    c.axes()
    for a, b in zip(x[ok], tr(y[ok])):
        c.add(f'<circle cx="{c.px(a):.2f}" cy="{c.py(b):.2f}" r="3" fill="{PALETTE[0]}" '
              f'fill-opacity="0.6"/>')
    if means is not None:
        mx, my = (np.asarray(v, dtype=float) for v in zip(*means)) if len(means) else ([], [])
        keep = np.isfinite(my)
        pts = " ".join(f"{c.px(a):.2f},{c.py(b):.2f}" for a, b in zip(mx[keep], tr(my[keep])))
        c.add(f'<polyline fill="none" stroke="{PALETTE[1]}" stroke-width="2" points="{pts}"/>')
    return c.render()
