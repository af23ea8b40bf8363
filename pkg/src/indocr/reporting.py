"""Leaderboard-style tables with best / second-best marks.

A report is a models x columns grid. Each column knows whether lower
(ANLS) or higher (EM, PM, %Match) is better, and marks are computed per column
from that direction. Markdown bolds the best value and underlines the runner
up; CSV and the JSON-lines summary carry the mark in its own field.
"""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from .metrics import AnlsScore, ExtractionScore, FreeFormMatchScore

__all__ = [
    "Column",
    "EvalReport",
    "build_extraction_report",
    "build_ocr_report",
    "rank_marks",
    "render",
    "render_summary",
    "render_table",
]

LOWER, HIGHER = "lower", "higher"
BEST, SECOND = "best", "second"
GRAND_TOTAL = "Grand Total"


@dataclass(frozen=True)
class Column:
    key: str
    label: str
    direction: str

    @property
    def arrow(self) -> str:
        return "↓" if self.direction == LOWER else "↑"


@dataclass(frozen=True)
class Cell:
    value: float
    direction: str


@dataclass
class EvalReport:
    title: str
    models: list[str]
    columns: list[Column]
    cells: dict[tuple[str, str], Cell]
    marks: dict[tuple[str, str], str] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)
    # render columns down the side (document-wise tables)
    transpose: bool = False
    row_header: str = "Model"


def rank_marks(
    cells: Mapping[tuple[str, str], Cell], columns: Sequence[Column]
) -> dict[tuple[str, str], str]:
    """Dense ranking per column: every model at the best value is ``best``,
    every model at the next distinct value is ``second``."""
    marks: dict[tuple[str, str], str] = {}
    for col in columns:
        present = [(m, c.value) for (m, k), c in cells.items() if k == col.key]
        if len(present) < 2:
            continue
        distinct = sorted({v for _, v in present}, reverse=col.direction == HIGHER)
        for model, v in present:
            if v == distinct[0]:
                marks[(model, col.key)] = BEST
            elif len(distinct) > 1 and v == distinct[1]:
                marks[(model, col.key)] = SECOND
    return marks


def _ordered(keys) -> list:
    return list(dict.fromkeys(keys))


def build_ocr_report(
    anls_scores: Mapping[tuple[str, str], tuple[AnlsScore, ...]],
    match_scores: Mapping[tuple[str, str], FreeFormMatchScore] | None = None,
    provenance: Mapping[str, str] | None = None,
    title: str = "OCR (ANLS; lower is better)",
) -> EvalReport:
    """Columns are language x unit for ANLS, then language %Match.

    ``anls_scores`` maps (model, language) to a tuple of AnlsScore, normally
    (word, char).
    """
    match_scores = match_scores or {}
    if not anls_scores and not match_scores:
        raise ValueError("no scores")
    models = _ordered([m for m, _ in anls_scores] + [m for m, _ in match_scores])
    columns: list[Column] = []
    cells: dict[tuple[str, str], Cell] = {}
    for lang in _ordered(lang for _, lang in anls_scores):
        units = _ordered(
            s.unit.value for (m, l), scores in anls_scores.items() if l == lang for s in scores
        )
        for unit in units:
            label = "Char" if unit == "codepoint" else unit.capitalize()
            columns.append(Column(f"{lang}:{unit}", f"{lang} {label}", LOWER))
    for (model, lang), scores in anls_scores.items():
        for s in scores:
            cells[(model, f"{lang}:{s.unit.value}")] = Cell(s.scaled, LOWER)
    for lang in _ordered(lang for _, lang in match_scores):
        columns.append(Column(f"{lang}:match", f"{lang} %Match", HIGHER))
    for (model, lang), s in match_scores.items():
        cells[(model, f"{lang}:match")] = Cell(s.percent, HIGHER)
    return EvalReport(
        title=title,
        models=models,
        columns=columns,
        cells=cells,
        marks=rank_marks(cells, columns),
        provenance=dict(provenance or {}),
    )


_METRIC_ATTR = {"em": "doc_em", "pm": "doc_pm", "mean": "mean"}
_METRIC_TITLE = {"em": "Exact Match (EM %)", "pm": "Percentage Match (PM %)", "mean": "Mean Score (%)"}


def build_extraction_report(
    scores: Mapping[tuple[str, str], ExtractionScore],
    metric: str = "em",
    provenance: Mapping[str, str] | None = None,
    title: str | None = None,
) -> EvalReport:
    """Document-wise table with a Grand Total = macro average over doc types."""
    if not scores:
        raise ValueError("no scores")
    attr = _METRIC_ATTR[metric]
    models = _ordered(m for m, _ in scores)
    doc_types = _ordered(d for _, d in scores)
    columns = [Column(d, d, HIGHER) for d in doc_types]
    cells: dict[tuple[str, str], Cell] = {}
    for (model, doc_type), s in scores.items():
        cells[(model, doc_type)] = Cell(getattr(s, attr), HIGHER)
    for model in models:
        vals = [cells[(model, d)].value for d in doc_types if (model, d) in cells]
        cells[(model, GRAND_TOTAL)] = Cell(sum(vals) / len(vals), HIGHER)
    columns.append(Column(GRAND_TOTAL, GRAND_TOTAL, HIGHER))
    return EvalReport(
        title=title or f"Document-wise {_METRIC_TITLE[metric]}",
        models=models,
        columns=columns,
        cells=cells,
        marks=rank_marks(cells, columns),
        provenance=dict(provenance or {}),
        transpose=True,
        row_header="Doc Type",
    )


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _md_cell(report: EvalReport, model: str, key: str) -> str:
    cell = report.cells.get((model, key))
    if cell is None:
        return "-"
    text = _fmt(cell.value)
    mark = report.marks.get((model, key))
    if mark == BEST:
        return f"**{text}**"
    if mark == SECOND:
        return f"<u>{text}</u>"
    return text


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]], fmt: str = "md") -> str:
    """Plain table without ranking marks."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(headers)
        w.writerows(rows)
        return buf.getvalue()
    out = ["| " + " | ".join(headers) + " |"]
    out.append("|" + "|".join(["---"] + ["---:"] * (len(headers) - 1)) + "|")
    out.extend("| " + " | ".join(str(c) for c in row) + " |" for row in rows)
    return "\n".join(out) + "\n"


def _render_markdown(report: EvalReport) -> str:
    lines = [f"### {report.title}", ""]
    if report.transpose:
        headers = [report.row_header] + report.models
        rows = [
            [f"**{c.label}**" if c.key == GRAND_TOTAL else c.label]
            + [_md_cell(report, m, c.key) for m in report.models]
            for c in report.columns
        ]
    else:
        headers = ["Model"] + [f"{c.label} {c.arrow}" for c in report.columns]
        rows = [[m] + [_md_cell(report, m, c.key) for c in report.columns] for m in report.models]
    lines.append(render_table(headers, rows).rstrip("\n"))
    if report.provenance:
        lines += ["", "Provenance:", ""]
        lines += [f"- {k}: {v}" for k, v in sorted(report.provenance.items())]
    return "\n".join(lines) + "\n"


def _long_rows(report: EvalReport) -> list[dict]:
    rows = []
    for m in report.models:
        for c in report.columns:
            cell = report.cells.get((m, c.key))
            if cell is None:
                continue
            rows.append(
                {
                    "model": m,
                    "column": c.label,
                    "direction": cell.direction,
                    "value": round(cell.value, 6),
                    "mark": report.marks.get((m, c.key), ""),
                }
            )
    return rows


def _render_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["table", "model", "column", "direction", "value", "mark"])
    for r in reports:
        for row in _long_rows(r):
            w.writerow([r.title, row["model"], row["column"], row["direction"], f"{row['value']:.6f}", row["mark"]])
    return buf.getvalue()


def render(report: EvalReport | Sequence[EvalReport], fmt: str = "md") -> str:
    """Render one or more reports. Output is a pure function of the input."""
    reports = [report] if isinstance(report, EvalReport) else list(report)
    if fmt in ("md", "markdown"):
        return "\n".join(_render_markdown(r) for r in reports)
    if fmt == "csv":
        return _render_csv(reports)
    raise ValueError(f"unknown format {fmt!r}")


def render_summary(reports: EvalReport | Sequence[EvalReport]) -> str:
    """JSON-lines summary for threshold checks in CI."""
    reports = [reports] if isinstance(reports, EvalReport) else list(reports)
    lines = []
    for r in reports:
        lines.append(json.dumps({"table": r.title, "provenance": r.provenance}, sort_keys=True, ensure_ascii=False))
        for row in _long_rows(r):
            lines.append(json.dumps({"table": r.title, **row}, sort_keys=True, ensure_ascii=False))
    return "\n".join(lines) + "\n"
