#!/usr/bin/env python3
"""Project decoding latency per language from a tokens-per-word profile.

    python scripts/latency_table.py --words 200 --ttft 0.125 --inter-token 0.004
"""

import argparse
from pathlib import Path

from indocr.latency import LatencyParams, load_profiles, projection_table
from indocr.reporting import render_table


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--profile", type=Path, help="TSV with language and tokens_per_word (default: bundled)")
    ap.add_argument("--words", type=float, default=200)
    ap.add_argument("--ttft", type=float, default=0.125)
    ap.add_argument("--inter-token", type=float, default=0.004)
    ap.add_argument("--format", choices=["md", "csv"], default="md")
    args = ap.parse_args()

    params = LatencyParams(args.ttft, args.inter_token)
    rows = [
        [lang, f"{ratio:.1f}", f"{tokens:.1f}", f"{seconds:.2f}", f"{seconds:.1f}"]
        for lang, ratio, tokens, seconds in projection_table(load_profiles(args.profile), params, args.words)
    ]
    headers = ["Language", "Tokens/word", "Tokens", "Latency (s)", "Latency (s, 1 dp)"]
    print(render_table(headers, rows, args.format), end="")


if __name__ == "__main__":
    main()
