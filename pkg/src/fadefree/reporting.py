"""CSV and SVG emission. CSV is the authoritative artifact; SVG is for eyes."""

from __future__ import annotations

import math

SWEEP_HEADER = ("detector,L,M,snr_db,seed,bits,errors,ber,ci_lo,ci_hi,"
                "branch_evals_per_step,states_stored")


def format_ber_row(point) -> str:
    lo, hi = point.confidence
    m = "" if point.surviving_states is None else str(point.surviving_states)
    return (f"{point.detector},{point.memory_length},{m},"
            f"{point.snr_db:.10g},{point.seed},{point.bits},{point.errors},"
            f"{point.ber:.10g},{lo:.10g},{hi:.10g},"
            f"{point.branch_evals_per_step},{point.states_stored}")


def write_ber_csv(points, path) -> None:
    with open(path, "w") as fh:
        fh.write(SWEEP_HEADER + "\n")
        for p in points:
            fh.write(format_ber_row(p) + "\n")


def write_failures_csv(failures, path) -> None:
    with open(path, "w") as fh:
        fh.write("detector,L,M,snr_db,error\n")
        for (det, l, m, snr), message in failures:
            fh.write(f"{det},{l if l is not None else ''},"
                     f"{m if m is not None else ''},{snr},"
                     f"\"{message}\"\n")


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def svg_line_plot(series: dict, path, xlabel: str = "", ylabel: str = "",
                  logy: bool = False, width: int = 640, height: int = 440) -> None:
    """Minimal multi-series line plot; log-y handles BER waterfalls.

    `series` maps a label to a list of (x, y) points.  Non-positive y
    values are dropped in log mode.
    """
    margin = 60
    pts = {}
    for label, xy in series.items():
        good = [(x, y) for x, y in xy
                if not logy or (y is not None and y > 0)]
        if good:
            pts[label] = good
    if not pts:
        pts = {"empty": [(0.0, 1.0)]}
    xs = [x for xy in pts.values() for x, _ in xy]
    ys = [math.log10(y) if logy else y for xy in pts.values() for _, y in xy]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
           f'y2="{height - margin}" stroke="black"/>',
           f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
           f'y2="{height - margin}" stroke="black"/>']
    for tx in _ticks(x_lo, x_hi):
        out.append(f'<text x="{sx(tx):.1f}" y="{height - margin + 16}" '
                   f'text-anchor="middle">{tx:.4g}</text>')
    for ty in _ticks(y_lo, y_hi):
        label = f"1e{ty:.1f}" if logy else f"{ty:.4g}"
        out.append(f'<text x="{margin - 6}" y="{sy(ty):.1f}" '
                   f'text-anchor="end" dominant-baseline="middle">{label}</text>')
    out.append(f'<text x="{width / 2:.0f}" y="{height - 12}" '
               f'text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="16" y="{height / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {height / 2:.0f})">{ylabel}</text>')
    for i, (label, xy) in enumerate(sorted(pts.items())):
        color = colors[i % len(colors)]
        coords = " ".join(
            f"{sx(x):.2f},{sy(math.log10(y) if logy else y):.2f}" for x, y in xy)
        out.append(f'<polyline points="{coords}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{width - margin + 4}" y="{margin + 14 * i}" '
                   f'fill="{color}">{label}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
