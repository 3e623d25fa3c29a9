"""SVG drawing of the comb in the Poincaré disk."""

from __future__ import annotations

import math

from .comb import CombSpec

SIZE = 800.0
MARGIN = 20.0


def _xy(rho: float, phi: float) -> tuple[float, float]:
    # the disk model itself: Euclidean radius tanh(rho / 2); y axis flipped for SVG
    r = math.tanh(rho / 2.0)
    scale = (SIZE - 2 * MARGIN) / 2.0
    c = SIZE / 2.0
    return c + scale * r * math.cos(phi), c - scale * r * math.sin(phi)


def _f(x: float) -> str:
    return f"{x:.4f}"


def _pt(rho: float, phi: float) -> str:
    x, y = _xy(rho, phi)
    return f"{_f(x)} {_f(y)}"


def _radius(rho: float) -> float:
    return (SIZE - 2 * MARGIN) / 2.0 * math.tanh(rho / 2.0)


def render_svg(spec: CombSpec) -> str:
    """Render sectors, arcs and spokes.

    Each spoke is one ``line`` running along its hair from the attachment to
    ``r_max``; a spoke without hair length becomes a zero-length line at its
    vertex, so element counts always match the CombSpec.
    """
    c = SIZE / 2.0
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(SIZE)}" height="{int(SIZE)}" '
        f'viewBox="0 0 {int(SIZE)} {int(SIZE)}">',
        f'<circle class="disk" cx="{_f(c)}" cy="{_f(c)}" r="{_f((SIZE - 2 * MARGIN) / 2.0)}" '
        'fill="none" stroke="#999" stroke-width="1"/>',
    ]
    for sec in spec.sectors:
        n = sec.truncation_radius
        r = _f(_radius(n))
        large = 1 if sec.alpha > math.pi else 0
        # counter-clockwise in the math frame is sweep-flag 0 in SVG's flipped frame
        out.append(
            f'<path class="sector" data-sector="{sec.index}" '
            f'd="M {_f(c)} {_f(c)} L {_pt(n, sec.theta_lo)} A {r} {r} 0 {large} 0 {_pt(n, sec.theta_hi)} Z" '
            'fill="#e8eef8" stroke="#446" stroke-width="0.5"/>'
        )
    for sec in spec.sectors:
        n = sec.truncation_radius
        r = _f(_radius(n))
        out.append(
            f'<path class="arc" data-sector="{sec.index}" '
            f'd="M {_pt(n, sec.theta_lo)} A {r} {r} 0 0 0 {_pt(n, sec.theta_hi)}" '
            'fill="none" stroke="#c33" stroke-width="1"/>'
        )
    sp = spec.spokes
    for i in range(len(sp)):
        a, ang = float(sp.attach_radius[i]), float(sp.angle[i])
        x1, y1 = _xy(a, ang)
        x2, y2 = _xy(spec.r_max, ang)
        out.append(
            f'<line class="spoke" data-spoke="{i}" x1="{_f(x1)}" y1="{_f(y1)}" '
            f'x2="{_f(x2)}" y2="{_f(y2)}" stroke="#222" stroke-width="0.3"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def element_counts(svg: str) -> dict:
    """Count drawn elements by class."""
    names = ("disk", "sector", "arc", "spoke")
    return {k: svg.count(f'class="{k}"') for k in names}

