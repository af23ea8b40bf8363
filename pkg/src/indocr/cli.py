"""``indocr`` command line.

Exit codes: 0 success, 1 data error (bad manifest, failed predictions,
misaligned inputs), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .backends import (
    BackendSpec,
    HttpBackend,
    Job,
    MockBackend,
    PredictionCache,
    read_predictions,
    run_batch,
    write_predictions,
)
from .datasets import ManifestEntry, ManifestError, load_manifest, stats, write_manifest
from .evaluation import AlignmentError, evaluate_extraction, evaluate_ocr, file_digest
from .latency import (
    DEFAULT_GROUPS,
    LatencyParams,
    estimate_params,
    load_profiles,
    projection_table,
    summarize_latency,
)
from .reporting import render, render_summary, render_table
from .schemas import DOC_TYPES, build_prompt, get_schema, parse_output, OutputParseError
from .text import NormalizationPolicy, SegmentUnit
from .tiler import PageGeometry, apply_rotation, plan_layout, tile_image, visual_token_estimate

log = logging.getLogger("indocr")

TRANSCRIBE_PROMPT = (
    "Transcribe all text in this document image in natural reading order. "
    "Return only the text."
)


class DataError(Exception):
    """Bad input data; maps to exit code 1."""


@dataclass
class RunConfig:
    subcommand: str
    manifest: Path | None = None
    predictions: list[Path] | None = None
    backend: str | None = None
    model: str | None = None
    case_fold: bool = False
    unit: str = "char"
    out: Path | None = None
    fmt: str = "md"
    concurrency: int = 1
    cache_dir: Path | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        return cls(
            subcommand=args.command,
            manifest=getattr(args, "manifest", None),
            predictions=getattr(args, "predictions", None),
            backend=getattr(args, "backend", None),
            model=getattr(args, "model", None),
            case_fold=getattr(args, "case_fold", False),
            unit=getattr(args, "unit", "char"),
            out=getattr(args, "out", None),
            fmt=getattr(args, "format", "md"),
            concurrency=getattr(args, "concurrency", 1),
            cache_dir=getattr(args, "cache_dir", None),
        )

    @property
    def policy(self) -> NormalizationPolicy:
        return NormalizationPolicy(case_fold=self.case_fold)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def _load_manifest(path: Path):
    try:
        return load_manifest(path)
    except ManifestError as exc:
        raise DataError(str(exc)) from exc


def _load_records(paths: list[Path]):
    records = []
    for p in paths:
        try:
            records.extend(read_predictions(p))
        except (OSError, ValueError) as exc:
            raise DataError(str(exc)) from exc
    return records


def _mock_text(entry: ManifestEntry) -> str:
    if isinstance(entry.ground_truth, str):
        return entry.ground_truth
    return json.dumps(entry.ground_truth, ensure_ascii=False, indent=2)


# -- subcommands -----------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    manifest = _load_manifest(cfg.manifest)
    entries = manifest.entries
    if cfg.backend in ("mock", "mock:down"):
        by_id = manifest.by_id()
        backend = MockBackend(
            lambda sid: _mock_text(by_id[sid]),
            model=cfg.model or "mock",
            fail=cfg.backend == "mock:down",
            max_concurrency=cfg.concurrency,
        )
    else:
        spec = BackendSpec(
            name=cfg.model or "http",
            endpoint=cfg.backend,
            model=cfg.model or "",
            request_style=args.request_style,
            token_env=args.token_env,
            timeout=args.timeout,
            max_concurrency=cfg.concurrency,
        )
        backend = HttpBackend(spec)

    jobs = []
    for e in entries:
        prompt = build_prompt(e.doc_type) if e.task == "extract" else (args.prompt or TRANSCRIBE_PROMPT)
        jobs.append(Job(e.sample_id, tuple(manifest.image_paths(e)), prompt, {"entry": e}))

    def attach_fields(job: Job, rec):
        entry = job.meta["entry"]
        if rec.ok and entry.task == "extract":
            try:
                parsed, _ = parse_output(rec.output_text, entry.doc_type, len(entry.images) or 1)
                rec.parsed_fields = parsed.values
            except OutputParseError:
                pass
        return rec

    cache = PredictionCache(cfg.cache_dir) if cfg.cache_dir else None
    try:
        records = run_batch(backend, jobs, cache, cfg.concurrency, on_record=attach_fields)
    finally:
        if isinstance(backend, HttpBackend):
            backend.close()
    out = cfg.out or Path("predictions.jsonl")
    write_predictions(records, out)
    failed = [r for r in records if not r.ok]
    for r in failed:
        log.error("%s: %s", r.sample_id, r.error)
    print(f"wrote {len(records)} records to {out} ({len(failed)} errors)", file=sys.stderr)
    return 1 if failed else 0


def _provenance(cfg: RunConfig) -> dict[str, str]:
    prov = {"manifest": f"{cfg.manifest.name}@{file_digest(cfg.manifest)}"}
    prov["predictions"] = ", ".join(f"{p.name}@{file_digest(p)}" for p in cfg.predictions)
    return prov


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    manifest = _load_manifest(cfg.manifest)
    records = _load_records(cfg.predictions)
    char_unit = {"word": None, "char": SegmentUnit.CODEPOINT, "grapheme": SegmentUnit.GRAPHEME}[cfg.unit]
    units = [SegmentUnit.WORD] + ([char_unit] if char_unit else [])
    try:
        report = evaluate_ocr(manifest, records, cfg.policy, units, provenance=_provenance(cfg))
    except AlignmentError as exc:
        raise DataError(str(exc)) from exc
    except ValueError as exc:
        raise DataError(f"nothing to evaluate: {exc}") from exc
    _emit(render(report, cfg.fmt), cfg.out)
    if args.summary:
        _emit(render_summary(report), args.summary)
    return 0


def cmd_extract_eval(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    manifest = _load_manifest(cfg.manifest)
    records = _load_records(cfg.predictions)
    try:
        result = evaluate_extraction(manifest, records, cfg.policy)
    except AlignmentError as exc:
        raise DataError(str(exc)) from exc
    if not result.scores:
        raise DataError("manifest has no extract entries")
    metrics = ["em", "pm", "mean"] if args.metric == "all" else [args.metric]
    prov = _provenance(cfg) | {"policy": cfg.policy.describe()}
    reports = result.reports(metrics, prov)
    text = render(reports, cfg.fmt)
    if cfg.fmt == "md":
        rows = []
        for (model, doc_type), score in result.scores.items():
            key = (model, doc_type)
            viol = result.violations.get(key, {})
            rows.append(
                [model, doc_type, str(score.n_documents), str(result.spurious.get(key, 0)),
                 str(result.parse_failures.get(key, 0)),
                 "; ".join(f"{k}={v}" for k, v in sorted(viol.items())) or "-"]
            )
        text += "\n### Protocol violations\n\n" + render_table(
            ["Model", "Doc Type", "Documents", "Spurious fields", "Parse failures", "Violations"], rows
        )
    _emit(text, cfg.out)
    if args.summary:
        _emit(render_summary(reports), args.summary)
    return 0


def cmd_latency(args: argparse.Namespace) -> int:
    fmt = args.format
    if args.predictions:
        records = _load_records(args.predictions)
        traces = [r.trace for r in records if r.ok and r.trace is not None and r.trace.token_count >= 2]
        parts = []
        if traces:
            p = estimate_params(traces)
            parts.append(render_table(
                ["TTFT (s)", "Inter-token (s/token)", "Traces"],
                [[f"{p.ttft:.6f}", f"{p.inter_token:.6f}", str(len(traces))]], fmt,
            ))
        if args.manifest:
            manifest = _load_manifest(args.manifest)
            lang = {e.sample_id: e.language for e in manifest}
            grouping = dict(DEFAULT_GROUPS)
            for g in args.group or []:
                k, _, v = g.partition("=")
                grouping[k] = v
            timed = [(lang[r.sample_id], r.elapsed) for r in records
                     if r.ok and r.elapsed is not None and r.sample_id in lang]
            try:
                summary = summarize_latency(timed, grouping)
            except KeyError as exc:
                raise DataError(exc.args[0]) from exc
            parts.append(render_table(
                ["Group", "Mean latency (s)", "n"],
                [[s.group, f"{s.mean_seconds:.2f}", str(s.n)] for s in summary], fmt,
            ))
        if not parts:
            raise DataError("no timing data in predictions")
        _emit("\n".join(parts), args.out)
        return 0

    try:
        profiles = load_profiles(args.profile)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot load profile: {exc}") from exc
    params = LatencyParams(args.ttft, args.inter_token)
    words = args.words
    rows = [
        [lang, f"{ratio:.1f}", f"{tokens:.1f}", f"{seconds:.2f}"]
        for lang, ratio, tokens, seconds in projection_table(profiles, params, words)
    ]
    _emit(render_table(["Language", "Tokens/word", f"Tokens ({words:g} words)",
                        f"Latency ({words:g} words, s)"], rows, fmt), args.out)
    return 0


def cmd_tile(args: argparse.Namespace) -> int:
    if args.image:
        if args.out is None:
            raise DataError("--image needs --out DIR for crop files")
        try:
            layout, written = tile_image(args.image, args.out, args.tile_side, args.max_tiles, args.rotate)
        except OSError as exc:
            raise DataError(f"cannot read image: {exc}") from exc
        print(f"{layout.rows}x{layout.cols} grid, wrote {len(written)} files to {args.out}")
        return 0
    if args.width is None or args.height is None:
        raise DataError("give --width and --height, or --image")
    page = apply_rotation(PageGeometry(args.width, args.height), args.rotate)
    layout = plan_layout(page, args.tile_side, args.max_tiles)
    tokens = visual_token_estimate(layout, args.tokens_per_tile)
    head = render_table(
        ["rows", "cols", "tile_side", "resized_width", "resized_height", "crops", "visual_tokens"],
        [[layout.rows, layout.cols, layout.tile_side, layout.resized_width,
          layout.resized_height, layout.n_tiles, tokens]], args.format,
    )
    crops = render_table(
        ["row", "col", "left", "top", "right", "bottom"],
        [[i // layout.cols, i % layout.cols, *r.as_box()] for i, r in enumerate(layout.crops)],
        args.format,
    )
    sys.stdout.write(head + "\n" + crops)
    return 0


def cmd_prompt(args: argparse.Namespace) -> int:
    try:
        get_schema(args.doc_type)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2
    sys.stdout.write(build_prompt(args.doc_type) + "\n")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    manifest = _load_manifest(args.manifest)
    s = stats(manifest)
    for axis, counts in s.items():
        print(render_table([axis, "count"], [[k, v] for k, v in counts.items()], args.format))
    for err in manifest.errors:
        print(f"rejected {err}", file=sys.stderr)
    if manifest.missing_images:
        print(f"{len(manifest.missing_images)} image path(s) do not resolve", file=sys.stderr)
    return 0


_WORDS = ["रामायण", "कथा", "భాష", "తెలుగు", "গল্প", "ದೇಶ", "മലയാളം", "பாடம்", "ଓଡ଼ିଆ", "ਪੰਜਾਬ", "page", "text"]


def _perturb(rng: random.Random, text: str, rate: float) -> str:
    out = []
    for ch in text:
        x = rng.random()
        if x < rate / 3:
            continue
        if x < 2 * rate / 3:
            out.append(rng.choice("abcdefक"))
        else:
            out.append(ch)
        if rng.random() < rate / 3:
            out.append(rng.choice("xyzि"))
    return "".join(out)


def cmd_synth(args: argparse.Namespace) -> int:
    """Write a seeded synthetic manifest plus predictions for two mock models."""
    rng = random.Random(args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(args.n):
        lang = rng.choice(["hi", "te", "bn", "en"])
        text = " ".join(rng.choice(_WORDS) for _ in range(rng.randint(3, 12)))
        entries.append(ManifestEntry(f"ocr-{i:04d}", (f"img/ocr-{i:04d}.png",), lang, "transcribe", text))
    for i in range(args.n):
        doc_type = DOC_TYPES[i % len(DOC_TYPES)]
        fields = get_schema(doc_type).keys
        gt = {f: f"{f[:3].upper()}{rng.randint(1000, 99999)}" for f in fields if rng.random() < 0.8} or {
            fields[0]: "X1"
        }
        entries.append(ManifestEntry(f"kie-{i:04d}", (f"img/kie-{i:04d}.png",), "en", "extract", gt, doc_type))
    write_manifest(entries, out / "manifest.jsonl")
    from .backends import PredictionRecord

    for model, rate in (("model-a", 0.05), ("model-b", 0.15)):
        recs = []
        for e in entries:
            if e.task == "transcribe":
                text = _perturb(rng, e.ground_truth, rate)
            else:
                text = json.dumps({k: _perturb(rng, v, rate) for k, v in e.ground_truth.items()
                                   if rng.random() > rate}, ensure_ascii=False)
            recs.append(PredictionRecord(e.sample_id, model, output_text=text))
        write_predictions(recs, out / f"predictions-{model}.jsonl")
    print(f"wrote {len(entries)} entries and 2 prediction files to {out}")
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="indocr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def fmt_flag(sp):
        sp.add_argument("--format", choices=["md", "csv"], default="md")

    sp = sub.add_parser("run", help="query a backend for every manifest entry")
    sp.add_argument("--manifest", type=Path, required=True)
    sp.add_argument("--backend", required=True, help="endpoint URL, 'mock' or 'mock:down'")
    sp.add_argument("--model", help="model label recorded with every prediction")
    sp.add_argument("--request-style", choices=["chat_image", "simple_image"], default="chat_image")
    sp.add_argument("--token-env", help="environment variable holding a bearer token")
    sp.add_argument("--timeout", type=float, default=120.0)
    sp.add_argument("--prompt", help="transcription prompt (extract entries use their schema prompt)")
    sp.add_argument("--concurrency", type=int, default=1)
    sp.add_argument("--cache-dir", type=Path)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_run)

    for name, func, helptext in (
        ("evaluate", cmd_evaluate, "ANLS and free-form %Match reports"),
        ("extract-eval", cmd_extract_eval, "document-wise EM / PM / Mean Score reports"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--manifest", type=Path, required=True)
        sp.add_argument("--predictions", type=Path, action="append", required=True)
        sp.add_argument("--case-fold", action="store_true")
        sp.add_argument("--out", type=Path)
        sp.add_argument("--summary", type=Path, help="also write a JSON-lines summary here")
        fmt_flag(sp)
        if name == "evaluate":
            sp.add_argument("--unit", choices=["word", "char", "grapheme"], default="char",
                            help="character unit for the Char column; 'word' reports words only")
        else:
            sp.add_argument("--metric", choices=["em", "pm", "mean", "all"], default="all")
        sp.set_defaults(func=func)

    sp = sub.add_parser("latency", help="projected or measured decoding latency")
    sp.add_argument("--profile", type=Path, help="tokens-per-word table (default: bundled)")
    sp.add_argument("--ttft", type=float, default=0.125)
    sp.add_argument("--inter-token", type=float, default=0.004)
    sp.add_argument("--words", type=float, default=200)
    sp.add_argument("--predictions", type=Path, action="append")
    sp.add_argument("--manifest", type=Path)
    sp.add_argument("--group", action="append", help="LANG=GROUP override for measured summaries")
    sp.add_argument("--out", type=Path)
    fmt_flag(sp)
    sp.set_defaults(func=cmd_latency)

    sp = sub.add_parser("tile", help="plan a tiling layout or cut an image into crops")
    sp.add_argument("--width", type=int)
    sp.add_argument("--height", type=int)
    sp.add_argument("--image", type=Path)
    sp.add_argument("--tile-side", type=int, default=336)
    sp.add_argument("--max-tiles", type=int, default=9)
    sp.add_argument("--tokens-per-tile", type=int, default=576)
    sp.add_argument("--rotate", type=int, choices=[0, 1, 2, 3], default=0, help="clockwise quarter turns")
    sp.add_argument("--out", type=Path)
    fmt_flag(sp)
    sp.set_defaults(func=cmd_tile)

    sp = sub.add_parser("prompt", help="print the extraction prompt for a document type")
    sp.add_argument("doc_type")
    sp.set_defaults(func=cmd_prompt)

    sp = sub.add_parser("stats", help="per-language / per-doc-type manifest counts")
    sp.add_argument("--manifest", type=Path, required=True)
    fmt_flag(sp)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("synth", help="write a seeded synthetic benchmark")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--out-dir", type=Path, required=True)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "concurrency", 1) < 1:
        parser.error("--concurrency must be >= 1")
    if args.command == "latency" and (args.ttft < 0 or args.inter_token <= 0 or args.words < 0):
        parser.error("--ttft and --words must be >= 0 and --inter-token > 0")
    if args.command == "tile" and (args.tile_side < 1 or args.max_tiles < 1):
        parser.error("--tile-side and --max-tiles must be >= 1")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
