"""Self-contained SVG line charts for sweep results.

No external stylesheet or script: one <svg> root with inline attributes.
One polyline per (activation, estimator) series; Monte Carlo estimators are
dashed, deterministic ones solid.  The x axis is the feature ratio, shown on
a log scale by default (risk curves live on log-spaced grids).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#17becf", "#7f7f7f",
)
_MC_ESTIMATORS = {"empirical", "trace_form", "lozenge"}


@dataclass(frozen=True)
class AxesSpec:
    x_field: str = "ratio"
    y_field: str = "e_test"
    log_x: bool = True
    log_y: bool = True
    title: str = ""
    width: int = 760
    height: int = 480


class SvgError(ValueError):
    pass


def _ticks(lo: float, hi: float, log: bool):
    if log:
        lo_e = math.floor(math.log10(lo))
        hi_e = math.ceil(math.log10(hi))
        return [10.0**e for e in range(lo_e, hi_e + 1) if lo <= 10.0**e <= hi] or [lo, hi]
    step = (hi - lo) / 5 or 1.0
    return [lo + k * step for k in range(6)]


def _fmt_tick(v: float) -> str:
    return f"{v:.4g}"


def emit_svg(rows, path, axes: AxesSpec = AxesSpec()) -> None:
    """Render one polyline per (activation, estimator) series to ``path``."""
    rows = [r for r in rows if r.status.startswith("ok")]
    if not rows:
        raise SvgError("refusing to render an empty row set")
    series: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for r in rows:
        x = getattr(r, axes.x_field if axes.x_field != "lambda" else "lam")
        y = getattr(r, axes.y_field)
        if not (math.isfinite(x) and math.isfinite(y)):
            continue
        series.setdefault((r.activation, r.estimator), []).append((float(x), float(y)))
    series = {k: sorted(v) for k, v in series.items() if v}
    if not series:
        raise SvgError("no finite points to render")

    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    if axes.log_y:
        ys = [y for y in ys if y > 0]
        if not ys:
            raise SvgError("log-scale y axis needs positive values")
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if axes.log_y and y_lo == y_hi:
        y_lo, y_hi = y_lo * 0.5, y_hi * 2.0
    if not axes.log_y and y_lo == y_hi:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0

    W, H = axes.width, axes.height
    ml, mr, mt, mb = 64, 170, 34, 46
    pw, ph = W - ml - mr, H - mt - mb

    def tx(x):
        if axes.log_x:
            return ml + pw * (math.log10(x) - math.log10(x_lo)) / (
                math.log10(x_hi) - math.log10(x_lo) or 1.0
            )
        return ml + pw * (x - x_lo) / ((x_hi - x_lo) or 1.0)

    def ty(y):
        if axes.log_y:
            fr = (math.log10(y) - math.log10(y_lo)) / (math.log10(y_hi) - math.log10(y_lo) or 1.0)
        else:
            fr = (y - y_lo) / ((y_hi - y_lo) or 1.0)
        return mt + ph * (1.0 - fr)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    if axes.title:
        parts.append(f'<text x="{ml}" y="{mt - 12}" font-size="14">{axes.title}</text>')
    for v in _ticks(x_lo, x_hi, axes.log_x):
        x = tx(v)
        parts.append(f'<line x1="{x:.1f}" y1="{mt + ph}" x2="{x:.1f}" y2="{mt + ph + 5}" stroke="#333"/>')
        parts.append(
            f'<text x="{x:.1f}" y="{mt + ph + 18}" text-anchor="middle">{_fmt_tick(v)}</text>'
        )
    for v in _ticks(y_lo, y_hi, axes.log_y):
        y = ty(v)
        parts.append(f'<line x1="{ml - 5}" y1="{y:.1f}" x2="{ml}" y2="{y:.1f}" stroke="#333"/>')
        parts.append(
            f'<text x="{ml - 8}" y="{y + 4:.1f}" text-anchor="end">{_fmt_tick(v)}</text>'
        )
    parts.append(
        f'<text x="{ml + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">{axes.x_field}</text>'
    )

    for i, ((activation, estimator), pts) in enumerate(sorted(series.items())):
        if axes.log_y:
            pts = [(x, y) for x, y in pts if y > 0]
        if not pts:
            continue
        color = _PALETTE[i % len(_PALETTE)]
        dash = ' stroke-dasharray="6,4"' if estimator in _MC_ESTIMATORS else ""
        coords = " ".join(f"{tx(x):.2f},{ty(y):.2f}" for x, y in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>'
        )
        ley = mt + 16 + 16 * i
        parts.append(
            f'<line x1="{ml + pw + 10}" y1="{ley - 4}" x2="{ml + pw + 34}" y2="{ley - 4}" '
            f'stroke="{color}" stroke-width="1.6"{dash}/>'
        )
        parts.append(f'<text x="{ml + pw + 40}" y="{ley}">{activation} / {estimator}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
