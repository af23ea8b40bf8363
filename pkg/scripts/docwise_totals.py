#!/usr/bin/env python3
"""Recompute Grand Totals of a document-wise score table.

Input is a TSV whose first column is the doc type and whose remaining columns
are models; an optional ``grand_total`` row holds the totals to check. Each
recomputed total is the macro average over doc types and is compared with the
given one at two decimals.

    python scripts/docwise_totals.py tests/data/docwise_em.tsv
"""

import argparse
import sys
from pathlib import Path

from indocr.metrics import ExtractionScore
from indocr.reporting import GRAND_TOTAL, build_extraction_report, render_table


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("table", type=Path)
    args = ap.parse_args()

    lines = args.table.read_text("utf-8").splitlines()
    models = lines[0].split("\t")[1:]
    scores, given = {}, {}
    for line in lines[1:]:
        doc_type, *vals = line.split("\t")
        for model, v in zip(models, vals):
            if doc_type == "grand_total":
                given[model] = float(v)
            else:
                scores[(model, doc_type)] = ExtractionScore(float(v), float(v), float(v))

    report = build_extraction_report(scores, "em")
    rows, mismatches = [], 0
    for model in models:
        got = f"{report.cells[(model, GRAND_TOTAL)].value:.2f}"
        want = f"{given[model]:.2f}" if model in given else "-"
        ok = want in ("-", got)
        mismatches += not ok
        rows.append([model, got, want, "ok" if ok else "MISMATCH"])
    print(render_table(["Model", "Macro average", "Given total", "Check"], rows), end="")
    return 1 if mismatches else 0


if __name__ == "__main__":
    sys.exit(main())
