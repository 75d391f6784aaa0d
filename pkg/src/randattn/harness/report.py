"""Experiment reports and their CSV / JSON / SVG serializations.

Output is byte-deterministic: floats are written with 17 significant digits
in CSV and shortest round-trip repr in JSON, keys keep a fixed order, and the
metadata carries no wall-clock timestamp unless one is supplied.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .. import __version__

STUDY_COLUMNS = (
    "method", "samples", "N", "M", "D", "seed", "stream", "trial",
    "mse", "mse_se", "bias_norm", "variance_trace", "wall_time", "peak_alloc",
    "status", "config",
)
UNBIASED_COLUMNS = (
    "method", "row", "col", "trials", "estimate", "oracle", "std_error", "z", "status", "config",
)
SELFTEST_COLUMNS = ("check", "passed", "value", "tolerance", "detail")

COLUMNS = {
    "approx-error": STUDY_COLUMNS,
    "bench": STUDY_COLUMNS,
    "unbiasedness": UNBIASED_COLUMNS,
    "selftest": SELFTEST_COLUMNS,
}

_INT = {"samples", "N", "M", "D", "seed", "stream", "trial", "peak_alloc", "row", "col", "trials"}
_FLOAT = {"mse", "mse_se", "bias_norm", "variance_trace", "wall_time", "estimate", "oracle",
          "std_error", "z", "value", "tolerance"}
_JSON = {"config"}
_BOOL = {"passed"}

SCHEMA_PATH = Path(__file__).with_name("report.schema.json")
FORMATS = ("csv", "json", "svg")


@dataclass
class ExperimentReport:
    kind: str
    records: list[dict]
    config: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    timestamp: str | None = None

    def __post_init__(self):
        if self.kind not in COLUMNS:
            raise ValueError(f"unknown report kind {self.kind!r}")

    @property
    def columns(self) -> tuple[str, ...]:
        return COLUMNS[self.kind]

    @property
    def metadata(self) -> dict:
        return {"config": self.config, "version": __version__, "timestamp": self.timestamp}

    def select(self, **where) -> list[dict]:
        return [r for r in self.records if all(r.get(k) == v for k, v in where.items())]


def _finite_or_none(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _finite_or_none(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_finite_or_none(v) for v in x]
    return x


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g") if math.isfinite(value) else ""
    if isinstance(value, dict):
        return json.dumps(_finite_or_none(value), sort_keys=True, separators=(",", ":"))
    return str(value)


def _parse(column: str, text: str):
    if text == "":
        return None
    if column in _INT:
        return int(text)
    if column in _FLOAT:
        return float(text)
    if column in _BOOL:
        return text == "true"
    if column in _JSON:
        return json.loads(text)
    return text


def to_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for rec in report.records:
        writer.writerow([_cell(rec.get(col)) for col in report.columns])
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    return [{col: _parse(col, cell) for col, cell in zip(header, row)} for row in rows[1:]]


def to_json_dict(report: ExperimentReport) -> dict:
    return _finite_or_none({
        "kind": report.kind,
        "metadata": report.metadata,
        "summary": report.summary,
        "records": [{col: rec.get(col) for col in report.columns} for rec in report.records],
    })


def to_json(report: ExperimentReport) -> str:
    return json.dumps(to_json_dict(report), indent=2, allow_nan=False) + "\n"


def load_schema() -> dict:
    return json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))


# --- SVG -------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0 ** e for e in range(math.floor(lo), math.ceil(hi) + 1)]
    step = (hi - lo) / 4 if hi > lo else 1.0
    return [lo + i * step for i in range(5)]


def line_chart(series: dict[str, list[tuple[float, float]]], title: str, xlabel: str, ylabel: str,
               logx: bool = True, logy: bool = True, width: int = 640, height: int = 420) -> str:
    """Minimal standalone SVG line chart, one polyline per series."""
    def tx(v, log):
        return math.log10(v) if log else v

    pts = {
        name: [(tx(x, logx), tx(y, logy)) for x, y in data if (not logx or x > 0) and (not logy or y > 0)]
        for name, data in series.items()
    }
    xs = [p[0] for v in pts.values() for p in v] or [0.0, 1.0]
    ys = [p[1] for v in pts.values() for p in v] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.2f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>',
    ]
    for t in _ticks(x0, x1, logx):
        v = tx(t, logx)
        if x0 - 1e-9 <= v <= x1 + 1e-9:
            out.append(f'<line x1="{px(v):.2f}" y1="{top + ph}" x2="{px(v):.2f}" y2="{top + ph + 5}" stroke="#333"/>')
            out.append(f'<text x="{px(v):.2f}" y="{top + ph + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1, logy):
        v = tx(t, logy)
        if y0 - 1e-9 <= v <= y1 + 1e-9:
            out.append(f'<line x1="{left - 5}" y1="{py(v):.2f}" x2="{left}" y2="{py(v):.2f}" stroke="#333"/>')
            out.append(f'<text x="{left - 8}" y="{py(v) + 4:.2f}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.2f})">{ylabel}</text>'
    )
    for i, (name, p) in enumerate(pts.items()):
        colour = _PALETTE[i % len(_PALETTE)]
        if p:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in p)
            out.append(f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="2"/>')
            out.extend(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{colour}"/>' for x, y in p)
        ly = top + 16 * i + 8
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _svg_for(report: ExperimentReport) -> str | None:
    series: dict[str, list[tuple[float, float]]] = {}
    if report.kind == "approx-error":
        for rec in report.records:
            if rec["trial"] is None and rec["mse"] is not None:
                series.setdefault(rec["method"], []).append((rec["samples"], rec["mse"]))
        return line_chart(series, "Mean squared error vs samples", "samples / proposals", "MSE")
    if report.kind == "bench":
        for rec in report.records:
            if rec["wall_time"] is not None:
                series.setdefault(rec["method"], []).append((rec["N"], rec["wall_time"]))
        return line_chart(series, "Wall time vs sequence length", "N", "seconds")
    return None


def emit_report(report: ExperimentReport, formats, out_dir, stem: str | None = None) -> list[Path]:
    """Write the requested formats to ``out_dir``; returns the paths written.

    Reports without a natural chart (unbiasedness, selftest) skip ``svg``.
    """
    formats = list(formats)
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats {sorted(unknown)}")
    if not formats:
        return []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or report.kind
    written = []
    for fmt in formats:
        if fmt == "csv":
            text = to_csv(report)
        elif fmt == "json":
            text = to_json(report)
        else:
            text = _svg_for(report)
            if text is None:
                continue
        path = out_dir / f"{stem}.{fmt}"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    return written
