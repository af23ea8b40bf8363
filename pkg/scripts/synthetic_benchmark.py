#!/usr/bin/env python3
"""Generate a seeded synthetic benchmark and score it end to end.

Writes a manifest and two prediction files under OUT, then the OCR and
extraction reports next to them.

    python scripts/synthetic_benchmark.py --seed 0 --n 40 --out /tmp/bench
"""

import argparse
from pathlib import Path

from indocr.cli import main as indocr


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=40)
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args()

    out = args.out
    indocr(["synth", "--seed", str(args.seed), "--n", str(args.n), "--out-dir", str(out)])
    preds = []
    for p in sorted(out.glob("predictions-*.jsonl")):
        preds += ["--predictions", str(p)]
    manifest = ["--manifest", str(out / "manifest.jsonl")]
    indocr(["evaluate", *manifest, *preds, "--out", str(out / "ocr.md")])
    indocr(["evaluate", *manifest, *preds, "--format", "csv", "--out", str(out / "ocr.csv")])
    indocr(["extract-eval", *manifest, *preds, "--out", str(out / "extraction.md")])
    print((out / "ocr.md").read_text("utf-8"))
    print((out / "extraction.md").read_text("utf-8"))


if __name__ == "__main__":
    main()
