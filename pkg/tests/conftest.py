import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"

SROIE_GT = {
    "company": "OJC MARKETING SDN BHD",
    "date": "15/01/2019",
    "address": "NO 2 & 4, JALAN BAYU 4, BANDAR SERI ALAM, 81750 MASAI, JOHOR",
    "total": "193.00",
}

SROIE_OCR = "tan chay yee\n*** COPY ***\nOJC Marketing SDN BHD\nROC NO: 538358-H\n..."


@pytest.fixture
def data_dir():
    return DATA


def write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")
    return path


def load_docwise(path=DATA / "docwise_em.tsv"):
    """Published document-wise EM table: (models, {(model, doc_type): value}, {model: published total})."""
    lines = path.read_text("utf-8").splitlines()
    models = lines[0].split("\t")[1:]
    cells, totals = {}, {}
    for line in lines[1:]:
        name, *vals = line.split("\t")
        for m, v in zip(models, vals):
            if name == "grand_total":
                totals[m] = float(v)
            else:
                cells[(m, name)] = float(v)
    return models, cells, totals


_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, name = marker.args
    detail = ""
    if report.failed:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
    _ACCEPTANCE[number] = (name, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        name, status, detail = _ACCEPTANCE[number]
        line = f"criterion {number:>2} {status}  {name}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
