"""Run artifacts: metrics CSV, run manifests, search traces, SVG plots.

Every text artifact is deterministic for a fixed run: floats are written
with shortest round-trip repr, JSON keys are sorted, and nothing embeds
timestamps.  Wall-clock timing lives only in the separate report JSON,
which is allowed to differ between reruns.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

METRICS_SCHEMA = "tilefit-metrics-v1"
MANIFEST_SCHEMA = "tilefit-manifest-v1"
CANDIDATES_SCHEMA = "tilefit-candidates-v1"


def fmt(x) -> str:
    return repr(float(x))


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_metrics_csv(path, records) -> None:
    """Metrics per evaluation step; first line carries the schema version."""
    buf = io.StringIO()
    buf.write(f"# {METRICS_SCHEMA}\n")
    buf.write("step,mse,res_norm_sum,psnr_db\n")
    for r in records:
        buf.write(f"{r.step},{fmt(r.mse)},{fmt(r.res_norm_sum)},{fmt(r.psnr_db)}\n")
    Path(path).write_text(buf.getvalue())


def read_metrics_csv(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != f"# {METRICS_SCHEMA}":
        raise ValueError(f"{path}: missing or unknown metrics schema line")
    rows = list(csv.DictReader(lines[1:]))
    return [
        {
            "step": int(r["step"]),
            "mse": float(r["mse"]),
            "res_norm_sum": float(r["res_norm_sum"]),
            "psnr_db": float(r["psnr_db"]),
        }
        for r in rows
    ]


def write_candidates_csv(path, candidates) -> None:
    buf = io.StringIO()
    buf.write(f"# {CANDIDATES_SCHEMA}\n")
    buf.write("iteration,phase,depth,width,mean_psnr,flops,score,accepted\n")
    for c in candidates:
        buf.write(
            f"{c.iteration},{c.phase},{c.depth},{c.width},"
            f"{fmt(c.mean_psnr)},{c.flops},{fmt(c.score)},{int(c.accepted)}\n"
        )
    Path(path).write_text(buf.getvalue())


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def build_manifest(*, experiment: str, input_path, grid_m: int, seed: int,
                   subnet_config, train_config=None, search_config=None,
                   backend: str, extra: dict | None = None) -> dict:
    """Everything needed to reproduce a run, plus the input checksum."""
    from . import __version__

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "experiment": experiment,
        "input": {
            "path": str(input_path),
            "sha256": sha256_file(input_path) if input_path is not None else None,
        },
        "grid_m": grid_m,
        "seed": seed,
        "subnet": subnet_config.to_dict() if subnet_config is not None else None,
        "backend": backend,
        "tool_version": __version__,
        "psnr_peak": 2.0,
    }
    if train_config is not None:
        manifest["train"] = train_config.to_dict()
    if search_config is not None:
        manifest["search"] = search_config
    if extra:
        manifest.update(extra)
    return manifest


def _svg_path(xs, ys, x0, x1, y0, y1, *, width, height, pad) -> str:
    def sx(x):
        return pad + (x - x0) / (x1 - x0 or 1.0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0 or 1.0) * (height - 2 * pad)

    pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
    return pts


_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def write_svg_line_plot(path, series, *, title: str, xlabel: str, ylabel: str,
                        width: int = 640, height: int = 400) -> None:
    """Minimal dependency-free multi-line SVG chart.

    ``series`` is a list of (label, xs, ys).  Output is deterministic, so
    plots from identical runs diff clean.
    """
    pad = 56.0
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    if not all_x:
        raise ValueError("nothing to plot")
    x0, x1 = min(all_x), max(all_x)
    y0, y1 = min(all_y), max(all_y)
    if y0 == y1:
        y0, y1 = y0 - 1.0, y1 + 1.0
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    # axes
    lines.append(
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" '
        f'stroke="black"/>'
    )
    lines.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>')
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        px = pad + (width - 2 * pad) * k / 4
        py = height - pad - (height - 2 * pad) * k / 4
        lines.append(
            f'<text x="{px:.1f}" y="{height - pad + 18:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{fx:g}</text>'
        )
        lines.append(
            f'<text x="{pad - 8:.1f}" y="{py + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{fy:.4g}</text>'
        )
    lines.append(
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    lines.append(
        f'<text x="16" y="{height / 2:.0f}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 16 {height / 2:.0f})">{ylabel}</text>'
    )
    for idx, (label, xs, ys) in enumerate(series):
        color = _COLORS[idx % len(_COLORS)]
        pts = _svg_path(xs, ys, x0, x1, y0, y1, width=width, height=height, pad=pad)
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = pad + 16 * idx
        lines.append(
            f'<line x1="{width - pad - 120:.0f}" y1="{ly:.0f}" x2="{width - pad - 100:.0f}" '
            f'y2="{ly:.0f}" stroke="{color}" stroke-width="2"/>'
        )
        lines.append(
            f'<text x="{width - pad - 94:.0f}" y="{ly + 4:.0f}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")
