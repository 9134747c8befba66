"""
render.py

The VIZ step: write a query report to disk.

Layout under the output root:
  <query_id>/report.csv, report.json
  <query_id>/warnings.txt                 (when there are warnings or errors)
  <query_id>/plots/<dataset>_<measure>.svg (format=plot)
  <query_id>/matrix_<measure>.csv          (output.matrix)

Rendering is a pure function of the Report: the same report gives the same bytes.
"""

import csv
import io
import json
import logging
import re
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Literal, Tuple

from pydantic import BaseModel, Field

from app.holarchy.queries import ResultRow

logger = logging.getLogger(__name__)

COLUMNS = list(ResultRow.model_fields)

WIDTH, HEIGHT = 800, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 60, 20, 40, 70
VALUE_COLOUR, TIME_COLOUR = "#c0392b", "#2e6fb7"


class Report(BaseModel):
    query_id: str
    rows: List[ResultRow] = Field(default_factory=list)
    warnings: List[str] = Field(default_factory=list)
    errors: List[str] = Field(default_factory=list)
    format: Literal["csv", "json", "plot"] = "csv"
    matrix: bool = False
    incomplete: bool = False


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _safe(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", text).strip("-") or "unnamed"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


# Tables --------------------------------


def rows_csv(rows: List[ResultRow]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        data = row.model_dump()
        writer.writerow([_cell(data[c]) for c in COLUMNS])
    return buffer.getvalue()


def report_json(report: Report) -> str:
    return json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def row_label(row: ResultRow) -> str:
    return row.label or f"{row.algorithm_name}@{row.algorithm_id}"


def matrices(rows: List[ResultRow]) -> Dict[str, str]:
    """measure -> CSV grid of algorithms (rows) by datasets (columns)."""
    out: Dict[str, str] = {}
    measures = sorted({r.measure for r in rows if r.error is None})
    for measure in measures:
        picked = [r for r in rows if r.measure == measure and r.error is None]
        algorithms = list(OrderedDict.fromkeys(row_label(r) for r in sorted(picked, key=row_label)))
        datasets = sorted({r.dataset_name for r in picked})
        grid: Dict[Tuple[str, str], str] = {(row_label(r), r.dataset_name): _cell(r.value) for r in picked}
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["algorithm"] + datasets)
        for algorithm in algorithms:
            writer.writerow([algorithm] + [grid.get((algorithm, d), "") for d in datasets])
        out[measure] = buffer.getvalue()
    return out


# Plots --------------------------------


def bar_chart(title: str, rows: List[ResultRow]) -> str:
    """Paired bars per algorithm: metric value and elapsed seconds, each scaled to its own maximum."""
    values = [r.value or 0.0 for r in rows]
    times = [r.elapsed for r in rows]
    top_value = max([abs(v) for v in values] + [1e-12])
    top_time = max(times + [1e-12])
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    slot = plot_w / max(len(rows), 1)
    bar = slot * 0.35
    base = MARGIN_TOP + plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-size="16">{_escape(title)}</text>',
        f'<line x1="{MARGIN_LEFT}" y1="{base}" x2="{WIDTH - MARGIN_RIGHT}" y2="{base}" stroke="black"/>',
        f'<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{base}" stroke="black"/>',
        f'<text x="{MARGIN_LEFT - 6}" y="{MARGIN_TOP + 4}" text-anchor="end" font-size="10">{top_value:.3g}</text>',
    ]
    for i, row in enumerate(rows):
        x = MARGIN_LEFT + i * slot + slot * 0.15
        value_h = plot_h * abs(values[i]) / top_value
        time_h = plot_h * times[i] / top_time
        parts.append(
            f'<rect x="{x:.2f}" y="{base - value_h:.2f}" width="{bar:.2f}" height="{value_h:.2f}" fill="{VALUE_COLOUR}"/>'
        )
        parts.append(
            f'<rect x="{x + bar:.2f}" y="{base - time_h:.2f}" width="{bar:.2f}" height="{time_h:.2f}" fill="{TIME_COLOUR}"/>'
        )
        label_x = x + bar
        parts.append(
            f'<text x="{label_x:.2f}" y="{base + 14}" text-anchor="end" font-size="10" '
            f'transform="rotate(-45 {label_x:.2f} {base + 14})">{_escape(row_label(row))}</text>'
        )
    parts.append(
        f'<text x="{WIDTH - MARGIN_RIGHT}" y="{HEIGHT - 8}" text-anchor="end" font-size="10">'
        f'<tspan fill="{VALUE_COLOUR}">value</tspan> / <tspan fill="{TIME_COLOUR}">time (max {top_time:.3g}s)</tspan></text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plots(rows: List[ResultRow]) -> Dict[str, str]:
    """`<dataset>_<measure>.svg` -> chart, one per (dataset, measure) group."""
    groups: Dict[Tuple[str, str], List[ResultRow]] = OrderedDict()
    for row in rows:
        if row.error is None:
            groups.setdefault((row.dataset_name, row.measure), []).append(row)
    return {
        f"{_safe(dataset)}_{_safe(measure)}.svg": bar_chart(f"{measure} on {dataset}", group)
        for (dataset, measure), group in sorted(groups.items())
    }


# Files --------------------------------


def render(report: Report, out_dir: Path) -> List[Path]:
    """Write the report files and return their paths in write order."""
    target = Path(out_dir) / _safe(report.query_id)
    target.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    def write(name: str, text: str) -> None:
        path = target / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        written.append(path)

    if report.rows:
        write("report.csv", rows_csv(report.rows))
        write("report.json", report_json(report))
        if report.format == "plot":
            for name, svg in plots(report.rows).items():
                write(f"plots/{name}", svg)
        if report.matrix:
            for measure, grid in matrices(report.rows).items():
                write(f"matrix_{_safe(measure)}.csv", grid)

    notes = list(report.warnings) + [f"error: {e}" for e in report.errors]
    if report.incomplete:
        notes.append("incomplete: some branches never answered")
    if notes:
        write("warnings.txt", "\n".join(notes) + "\n")

    logger.info("[VIZ] %s: %d row(s), %d file(s) in %s", report.query_id, len(report.rows), len(written), target)
    return written
