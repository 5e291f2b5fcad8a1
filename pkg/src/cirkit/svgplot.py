"""Self-contained SVG emission for PDP comparison plots.

Hand-rolled polylines and axes instead of a plotting framework so the
artifact bytes are reproducible and the package carries no plotting
dependency.
"""

from __future__ import annotations

import numpy as np

from .analysis import PowerDelayProfile
from .errors import ValidationError

_WIDTH, _HEIGHT = 720, 420
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 24, 28, 48
_FLOOR_DB = -60.0
_COLORS = ("#1f77b4", "#d62728")


def _to_db(pdp: PowerDelayProfile) -> np.ndarray:
    with np.errstate(divide="ignore"):
        db = 10.0 * np.log10(pdp.powers_linear)
    return np.maximum(db, _FLOOR_DB)


def _ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, count)
    return [float(v) for v in raw]


def write_pdp_comparison_svg(
    path,
    profiles: list[tuple[str, PowerDelayProfile]],
    title: str = "Measured vs simulated PDP",
) -> None:
    """Render labelled PDPs as dB-versus-microseconds polylines."""
    if not profiles:
        raise ValidationError("nothing to plot")
    x_max = max(float(p.delays_s[-1]) * 1e6 for _, p in profiles)
    x_max = max(x_max, 1e-3)
    y_lo, y_hi = _FLOOR_DB, 0.0

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(us: float) -> float:
        return _MARGIN_L + plot_w * us / x_max

    def sy(db: float) -> float:
        return _MARGIN_T + plot_h * (y_hi - db) / (y_hi - y_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.1f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{title}</text>',
    ]
    # frame and grid
    parts.append(
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="black" stroke-width="1"/>'
    )
    for tick in _ticks(0.0, x_max):
        x = sx(tick)
        parts.append(
            f'<line x1="{x:.2f}" y1="{_MARGIN_T + plot_h}" x2="{x:.2f}" '
            f'y2="{_MARGIN_T + plot_h + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{_MARGIN_T + plot_h + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="10">{tick:.2f}</text>'
        )
    for tick in _ticks(y_lo, y_hi, 7):
        y = sy(tick)
        parts.append(
            f'<line x1="{_MARGIN_L - 5}" y1="{y:.2f}" x2="{_MARGIN_L}" y2="{y:.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 8}" y="{y + 3:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{tick:.0f}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">delay [us]</text>'
    )
    parts.append(
        f'<text x="16" y="{_MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11" '
        f'transform="rotate(-90 16 {_MARGIN_T + plot_h / 2:.1f})">power [dB]</text>'
    )
    # polylines and legend
    for i, (label, pdp) in enumerate(profiles):
        color = _COLORS[i % len(_COLORS)]
        db = _to_db(pdp)
        points = " ".join(
            f"{sx(t * 1e6):.2f},{sy(v):.2f}" for t, v in zip(pdp.delays_s, db)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        ly = _MARGIN_T + 14 + 16 * i
        lx = _MARGIN_L + plot_w - 150
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{lx + 30}" y="{ly}" font-family="sans-serif" font-size="11">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(parts) + "\n")
