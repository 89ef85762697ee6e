"""Static SVG plots: envelope convergence traces and grid-function curves.

Plain string assembly, no scripting, no external plotting dependency; output
is deterministic for identical inputs so reports can be diffed byte for byte.
"""

from __future__ import annotations

import math

from .envelope import LinearEnvelope, RefinementTrace
from .gridfn import GridFunction

WIDTH = 640
HEIGHT = 420
MARGIN = 56

_AXIS = "#444444"
_LOWER = "#1f6fb4"
_UPPER = "#c24c26"
_CURVE = "#2a7f3f"
_INSET = "#7a4ca0"


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _span(values) -> tuple[float, float]:
    lo = min(values)
    hi = max(values)
    if hi <= lo:
        pad = max(abs(lo), 1.0) * 0.05
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


class _Frame:
    """Maps data coordinates into a pixel rectangle (y axis flipped)."""

    def __init__(self, x_range, y_range, px_box):
        self.x_lo, self.x_hi = x_range
        self.y_lo, self.y_hi = y_range
        self.left, self.top, self.right, self.bottom = px_box

    def x(self, v: float) -> float:
        t = (v - self.x_lo) / (self.x_hi - self.x_lo)
        return self.left + t * (self.right - self.left)

    def y(self, v: float) -> float:
        t = (v - self.y_lo) / (self.y_hi - self.y_lo)
        return self.bottom - t * (self.bottom - self.top)

    def polyline(self, xs, ys, color: str, width: float = 1.6) -> str:
        pts = " ".join(f"{self.x(a):.2f},{self.y(b):.2f}" for a, b in zip(xs, ys))
        return (
            f'<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{pts}"/>'
        )

    def box(self) -> str:
        return (
            f'<rect x="{self.left}" y="{self.top}" width="{self.right - self.left}" '
            f'height="{self.bottom - self.top}" fill="none" stroke="{_AXIS}"/>'
        )

    def corner_labels(self) -> str:
        return (
            f'<text x="{self.left}" y="{self.bottom + 14}" font-size="10" fill="{_AXIS}">'
            f"{_fmt(self.x_lo)}</text>"
            f'<text x="{self.right}" y="{self.bottom + 14}" font-size="10" fill="{_AXIS}" '
            f'text-anchor="end">{_fmt(self.x_hi)}</text>'
            f'<text x="{self.left - 4}" y="{self.bottom}" font-size="10" fill="{_AXIS}" '
            f'text-anchor="end">{_fmt(self.y_lo)}</text>'
            f'<text x="{self.left - 4}" y="{self.top + 10}" font-size="10" fill="{_AXIS}" '
            f'text-anchor="end">{_fmt(self.y_hi)}</text>'
        )


def _document(title: str, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">'
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>'
        f'<text x="{WIDTH // 2}" y="24" font-size="15" text-anchor="middle" '
        f'fill="#111111">{title}</text>'
    )
    return head + "".join(body) + "</svg>\n"


def envelope_convergence_svg(trace: RefinementTrace) -> str:
    """Coefficient curves a_n and b_n versus step, with a log-width inset."""
    ns = list(range(len(trace.envelopes)))
    a_vals = [float(e.a) for e in trace.envelopes]
    b_vals = [float(e.b) for e in trace.envelopes]
    frame = _Frame(
        _span(ns), _span(a_vals + b_vals), (MARGIN, 44, WIDTH - MARGIN, HEIGHT - MARGIN)
    )
    body = [
        frame.box(),
        frame.polyline(ns, a_vals, _LOWER),
        frame.polyline(ns, b_vals, _UPPER),
        frame.corner_labels(),
        f'<text x="{MARGIN}" y="{HEIGHT - 18}" font-size="11" fill="{_LOWER}">lower a_n</text>',
        f'<text x="{MARGIN + 90}" y="{HEIGHT - 18}" font-size="11" fill="{_UPPER}">upper b_n</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - 18}" font-size="11" fill="{_AXIS}" '
        f'text-anchor="end">status: {trace.status}'
        + (f", c = {_fmt(trace.c)}" if trace.c is not None else "")
        + "</text>",
    ]
    widths = [w for w in trace.widths() if w > 0]
    if len(widths) >= 2:
        logw = [math.log10(w) for w in widths]
        inset = _Frame(
            _span(list(range(len(logw)))),
            _span(logw),
            (WIDTH - 230, 54, WIDTH - MARGIN - 8, 150),
        )
        body += [
            inset.box(),
            inset.polyline(list(range(len(logw))), logw, _INSET, 1.2),
            f'<text x="{WIDTH - 228}" y="{50}" font-size="10" fill="{_INSET}">log10 width</text>',
        ]
    return _document("envelope refinement", body)


def gridfn_svg(
    gf: GridFunction, envelope: LinearEnvelope | None = None, title: str = "grid function"
) -> str:
    """Function curve (log-log on log grids) with an optional envelope overlay."""
    xs = gf.grid.points
    ys = gf.values
    loglog = gf.grid.kind == "log" and bool((ys > 0).all())
    if loglog:
        px = [math.log10(float(v)) for v in xs]
        py = [math.log10(float(v)) for v in ys]
    else:
        px = [float(v) for v in xs]
        py = [float(v) for v in ys]
    y_all = list(py)
    overlays = []
    if envelope is not None:
        a, b = float(envelope.a), float(envelope.b)
        for coef, color, label in ((a, _LOWER, "a*x"), (b, _UPPER, "b*x")):
            if coef <= 0 and loglog:
                continue
            line = [coef * float(v) for v in xs]
            ly = [math.log10(v) for v in line] if loglog else line
            overlays.append((ly, color, label))
            y_all += ly
    frame = _Frame(_span(px), _span(y_all), (MARGIN, 44, WIDTH - MARGIN, HEIGHT - MARGIN))
    body = [frame.box(), frame.polyline(px, py, _CURVE, 1.8), frame.corner_labels()]
    legend_x = MARGIN
    for ly, color, label in overlays:
        body.append(frame.polyline(px, ly, color, 1.0))
        body.append(
            f'<text x="{legend_x + 90}" y="{HEIGHT - 18}" font-size="11" fill="{color}">{label}</text>'
        )
        legend_x += 60
    scale_note = "log-log axes" if loglog else "linear axes"
    body.append(
        f'<text x="{MARGIN}" y="{HEIGHT - 18}" font-size="11" fill="{_CURVE}">f</text>'
    )
    body.append(
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - 18}" font-size="11" fill="{_AXIS}" '
        f'text-anchor="end">{scale_note}</text>'
    )
    return _document(title, body)
