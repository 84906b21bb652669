"""CSV + manifest output and optional figure rendering.

Every CSV starts with a ``# manifest:`` comment line and is accompanied by a
``<name>.manifest.json`` sidecar.  Floats print with 17 significant digits so
equal manifests imply byte-identical files.  Figures are rendered with the Agg
backend next to the delimited output when requested.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from fractions import Fraction
from typing import Optional, Sequence

from . import __version__
from .geometry import PolygonTable, precision_bits


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.17g}"
    if isinstance(value, Fraction):
        return str(value)
    return str(value)


def polygon_hash(poly: Optional[PolygonTable]) -> str:
    if poly is None:
        return ""
    blob = json.dumps(poly.to_json_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def make_manifest(command: str, poly: Optional[PolygonTable] = None,
                  seed: Optional[int] = None, **extra) -> dict:
    m = {
        "command": command,
        "polygon_hash": polygon_hash(poly),
        "seed": seed,
        "precision_bits": precision_bits(),
        "version": __version__,
    }
    m.update(extra)
    return m


def write_csv(path: str, header: Sequence[str], rows, manifest: dict,
              wall_time: Optional[float] = None) -> None:
    man = dict(manifest)
    if wall_time is not None:
        man["wall_time_s"] = round(wall_time, 3)
    sidecar = dict(man)
    man.pop("wall_time_s", None)  # the comment line stays time-independent
    lines = ["# manifest: " + json.dumps(man, sort_keys=True, default=str)]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------

def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_counts(ns, p, nc, out_png: str, title: str = "growth") -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(ns, p, "o-", ms=3, label="p(n)")
    if nc is not None:
        ax.loglog(ns, nc, "s-", ms=3, label="N_c(n) cumulative")
    ax.set_xlabel("n")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_inradius(ns, r_lower, r_upper, ref1, ref2, out_png: str) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogy(ns, r_lower, "o-", ms=3, label="r(n) lower")
    ax.semilogy(ns, r_upper, "x--", ms=3, label="r(n) upper")
    ax.semilogy(ns, ref1, ":", label="1/(n^3 f(n))")
    ax.semilogy(ns, ref2, "-.", label="1/(n^2 f(n))")
    ax.set_xlabel("n")
    ax.set_ylabel("inradius")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_ba_curve(a_values, mu_hat, out_png: str) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(a_values, mu_hat, "o-", label="mu(B_a)")
    ax.loglog(a_values, a_values, ":", label="a")
    ax.set_xlabel("a")
    ax.set_ylabel("measure")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def plot_unfolding(edges, witness, out_png: str) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 5))
    for e in edges:
        (ax0, ay0), (ax1, ay1) = (e.seg.a.as_float(), e.seg.b.as_float())
        ax.plot([ax0, ax1], [ay0, ay1], "k-", lw=1.5)
        ax.annotate(e.source_side, ((ax0 + ax1) / 2, (ay0 + ay1) / 2),
                    fontsize=8, color="tab:blue")
    if witness is not None:
        (p, q) = witness
        px, py = float(p[0]), float(p[1])
        qx, qy = float(q[0]), float(q[1])
        dx, dy = qx - px, qy - py
        norm = math.hypot(dx, dy) or 1.0
        dx, dy = dx / norm, dy / norm
        span = 3.0 * max(1.0, norm)
        ax.plot([px - span * dx, px + span * dx],
                [py - span * dy, py + span * dy], "r--", lw=1)
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def unfolding_svg(edges, witness=None, pad: float = 0.5) -> str:
    """Minimal standalone SVG of unfolded windows plus the witness line."""
    pts = []
    for e in edges:
        pts.append(e.seg.a.as_float())
        pts.append(e.seg.b.as_float())
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x0, x1 = min(xs) - pad, max(xs) + pad
    y0, y1 = min(ys) - pad, max(ys) + pad
    w, h = x1 - x0, y1 - y0
    scale = 400.0 / max(w, h)

    def map_pt(p):
        return ((p[0] - x0) * scale, (y1 - p[1]) * scale)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{w * scale:.0f}" height="{h * scale:.0f}" '
        f'viewBox="0 0 {w * scale:.2f} {h * scale:.2f}">'
    ]
    for e in edges:
        (xa, ya) = map_pt(e.seg.a.as_float())
        (xb, yb) = map_pt(e.seg.b.as_float())
        parts.append(
            f'<line x1="{xa:.2f}" y1="{ya:.2f}" x2="{xb:.2f}" y2="{yb:.2f}" '
            f'stroke="black" stroke-width="2"/>')
        parts.append(
            f'<text x="{(xa + xb) / 2:.2f}" y="{(ya + yb) / 2:.2f}" '
            f'font-size="12" fill="blue">{e.source_side}</text>')
    if witness is not None:
        p, q = witness
        pf = (float(p[0]), float(p[1]))
        qf = (float(q[0]), float(q[1]))
        dx, dy = qf[0] - pf[0], qf[1] - pf[1]
        norm = math.hypot(dx, dy) or 1.0
        ux, uy = dx / norm, dy / norm
        reach = 2.0 * max(w, h)
        a = map_pt((pf[0] - reach * ux, pf[1] - reach * uy))
        b = map_pt((pf[0] + reach * ux, pf[1] + reach * uy))
        parts.append(
            f'<line x1="{a[0]:.2f}" y1="{a[1]:.2f}" x2="{b[0]:.2f}" '
            f'y2="{b[1]:.2f}" stroke="red" stroke-width="1" '
            f'stroke-dasharray="6 3"/>')
    parts.append("</svg>")
    return "\n".join(parts)
