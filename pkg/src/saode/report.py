"""Report files written by ``saode run`` and read back by ``saode compare``."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping, Sequence

from .metrics import METRICS
from .prequential import MetricRow, RunReport

OVERALL = "overall.csv"
WINDOWS = "windows.csv"
SEASONS = "seasons.csv"
SEASON_LABELS = "season_labels.csv"
SETTINGS = "run.json"
CHART = "season_mla.svg"


def fmt(value: float) -> str:
    return f"{value:.10f}"


def _metric_cells(row: MetricRow) -> list[str]:
    vals = row.values()
    return [str(row.n)] + [fmt(vals[name]) for name in METRICS]


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_report(report: RunReport, out: Path, settings: Mapping, svg: bool = False) -> list[Path]:
    """Write every report file into ``out`` and return their paths."""
    out.mkdir(parents=True, exist_ok=True)
    head = [report.run_id, report.model_name]
    cols = ["N", *METRICS]
    written = []

    def emit(name, header, rows):
        path = out / name
        _write_csv(path, header, rows)
        written.append(path)

    emit(OVERALL, ["run_id", "model", "window", *cols], [head + ["all"] + _metric_cells(report.overall)])
    emit(WINDOWS, ["run_id", "model", "window", *cols],
         [head + [w.key] + _metric_cells(w) for w in report.windows])
    emit(SEASONS, ["run_id", "model", "season", *cols],
         [head + [s.key] + _metric_cells(s) for s in report.seasons])
    emit(SEASON_LABELS, ["run_id", "model", "season", "label", *cols],
         [head + [season, label] + _metric_cells(row) for season, label, row in report.season_labels])

    path = out / SETTINGS
    path.write_text(json.dumps(dict(settings), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(path)
    if svg:
        path = out / CHART
        path.write_text(season_chart({report.model_name: report.season_mla()}), encoding="utf-8")
        written.append(path)
    return written


def read_rows(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def read_overall(out: Path) -> tuple[str, dict[str, float], tuple[str, ...]]:
    """Model name, overall metrics and label universe of a report directory."""
    rows = read_rows(out / OVERALL)
    if len(rows) != 1:
        raise ValueError(f"{out / OVERALL}: expected one data row, found {len(rows)}")
    settings = json.loads((out / SETTINGS).read_text(encoding="utf-8"))
    row = rows[0]
    return row["model"], {name: float(row[name]) for name in METRICS}, tuple(settings["labels"])


def read_season_mla(out: Path) -> dict[str, float]:
    return {row["season"]: float(row["MLA"]) for row in read_rows(out / SEASONS)}


# -- SVG ---------------------------------------------------------------------------

_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def season_chart(series: Mapping[str, Mapping[str, float]], title: str = "MLA by season") -> str:
    """Line chart of MLA against season, one line per model."""
    keys: list[str] = []
    for values in series.values():
        keys.extend(k for k in values if k not in keys)
    keys.sort(key=lambda k: (k == "?", int(k) if k != "?" else 0))
    all_vals = [v for values in series.values() for v in values.values()]
    lo = min(all_vals, default=0.0)
    hi = max(all_vals, default=1.0)
    if hi - lo < 1e-9:
        lo, hi = lo - 0.05, hi + 0.05
    pad = 0.05 * (hi - lo)
    lo, hi = max(0.0, lo - pad), min(1.0, hi + pad)
    if hi <= lo:
        lo, hi = 0.0, 1.0

    W, H, L, R, T, B = 640, 400, 60, 160, 40, 50
    pw, ph = W - L - R, H - T - B

    def x_of(i):
        return L + (pw * i / (len(keys) - 1) if len(keys) > 1 else pw / 2)

    def y_of(v):
        return T + ph * (hi - v) / (hi - lo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{title}</text>',
           f'<line x1="{L}" y1="{T + ph}" x2="{L + pw}" y2="{T + ph}" stroke="black"/>',
           f'<line x1="{L}" y1="{T}" x2="{L}" y2="{T + ph}" stroke="black"/>']
    for j in range(5):
        v = lo + (hi - lo) * j / 4
        y = y_of(v)
        out.append(f'<line x1="{L - 4}" y1="{y:.1f}" x2="{L + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{L - 8}" y="{y + 4:.1f}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{v:.3f}</text>')
    for i, key in enumerate(keys):
        x = x_of(i)
        out.append(f'<text x="{x:.1f}" y="{T + ph + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{key}</text>')
    out.append(f'<text x="{L + pw / 2:.1f}" y="{H - 10}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">season</text>')
    for n, (name, values) in enumerate(series.items()):
        colour = _COLOURS[n % len(_COLOURS)]
        pts = [(x_of(i), y_of(values[k])) for i, k in enumerate(keys) if k in values]
        path = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{colour}" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{colour}"/>')
        ly = T + 16 * n + 8
        out.append(f'<line x1="{L + pw + 14}" y1="{ly}" x2="{L + pw + 34}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{L + pw + 40}" y="{ly + 4}" font-family="sans-serif" font-size="12">{_escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
