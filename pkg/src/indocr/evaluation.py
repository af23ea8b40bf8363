"""Join manifests with prediction records and score them."""

from __future__ import annotations

import hashlib
from collections import Counter, defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .backends import PredictionRecord
from .datasets import Manifest
from .metrics import (
    FREEFORM_POLICY,
    AnlsScore,
    ExtractionScore,
    FreeFormMatchScore,
    aggregate_dataset,
    anls,
    free_form_match,
    score_extraction,
)
from .reporting import EvalReport, build_extraction_report, build_ocr_report
from .schemas import FieldRecord, OutputParseError, parse_output
from .text import DEFAULT_POLICY, NormalizationPolicy, SegmentUnit, normalize

__all__ = [
    "AlignmentError",
    "ExtractionResult",
    "align",
    "evaluate_extraction",
    "evaluate_ocr",
    "file_digest",
]


class AlignmentError(ValueError):
    pass


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def align(
    manifest: Manifest, records: Iterable[PredictionRecord], tasks: Sequence[str]
) -> dict[str, dict[str, PredictionRecord]]:
    """Group records by model and check each model covers every relevant entry."""
    wanted = [e.sample_id for e in manifest if e.task in tasks]
    by_model: dict[str, dict[str, PredictionRecord]] = {}
    for r in records:
        by_model.setdefault(r.model, {})[r.sample_id] = r
    for model, recs in by_model.items():
        missing = [s for s in wanted if s not in recs]
        if missing:
            preview = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
            raise AlignmentError(f"model {model!r} has no prediction for {len(missing)} sample(s): {preview}")
    return by_model


def evaluate_ocr(
    manifest: Manifest,
    records: Iterable[PredictionRecord],
    policy: NormalizationPolicy = DEFAULT_POLICY,
    units: Sequence[SegmentUnit | str] = (SegmentUnit.WORD, SegmentUnit.CODEPOINT),
    match_policy: NormalizationPolicy = FREEFORM_POLICY,
    provenance: dict[str, str] | None = None,
) -> EvalReport:
    """ANLS per (model, language) for transcription entries and pooled
    %Match per (model, language) for free-form entries.

    Failed predictions score as empty output.
    """
    units = [SegmentUnit.parse(u) for u in units]
    by_model = align(manifest, records, ("transcribe", "freeform_match"))
    anls_scores: dict[tuple[str, str], tuple[AnlsScore, ...]] = {}
    match_scores: dict[tuple[str, str], FreeFormMatchScore] = {}
    errors = 0
    for model, recs in by_model.items():
        pairs: dict[str, list] = defaultdict(list)
        for e in manifest:
            if e.task not in ("transcribe", "freeform_match"):
                continue
            r = recs[e.sample_id]
            errors += not r.ok
            output = r.output_text if r.ok else ""
            if e.task == "transcribe":
                pairs[e.language].append(
                    (normalize(output, policy, e.language), normalize(e.ground_truth, policy, e.language))
                )
            else:
                s = free_form_match(e.ground_truth, output, match_policy)
                key = (model, e.language)
                match_scores[key] = match_scores[key] + s if key in match_scores else s
        for lang, ps in pairs.items():
            anls_scores[(model, lang)] = tuple(anls(ps, u) for u in units)
    prov = {
        "policy": policy.describe(),
        "match_policy": match_policy.describe(),
        "units": ",".join(u.value for u in units),
        "prediction_errors": str(errors),
    }
    prov.update(provenance or {})
    return build_ocr_report(anls_scores, match_scores, prov)


@dataclass
class ExtractionResult:
    scores: dict[tuple[str, str], ExtractionScore]
    violations: dict[tuple[str, str], Counter] = field(default_factory=dict)
    spurious: dict[tuple[str, str], int] = field(default_factory=dict)
    parse_failures: dict[tuple[str, str], int] = field(default_factory=dict)

    def reports(self, metrics: Sequence[str] = ("em", "pm", "mean"), provenance=None) -> list[EvalReport]:
        return [build_extraction_report(self.scores, m, provenance) for m in metrics]


def evaluate_extraction(
    manifest: Manifest,
    records: Iterable[PredictionRecord],
    policy: NormalizationPolicy = DEFAULT_POLICY,
) -> ExtractionResult:
    by_model = align(manifest, records, ("extract",))
    result = ExtractionResult(scores={})
    for model, recs in by_model.items():
        per_type: dict[str, list[ExtractionScore]] = defaultdict(list)
        for e in manifest:
            if e.task != "extract":
                continue
            key = (model, e.doc_type)
            ref = e.reference_record
            r = recs[e.sample_id]
            viol = result.violations.setdefault(key, Counter())
            pred = FieldRecord(e.doc_type, {}, ref.pages)
            parse_spurious = 0
            if r.ok:
                try:
                    pred, vs = parse_output(r.output_text, e.doc_type, ref.pages)
                    viol.update(v.kind for v in vs)
                    parse_spurious = sum(1 for v in vs if v.kind == "spurious field")
                except OutputParseError:
                    result.parse_failures[key] = result.parse_failures.get(key, 0) + 1
            else:
                result.parse_failures[key] = result.parse_failures.get(key, 0) + 1
            s = score_extraction(pred, ref, policy)
            result.spurious[key] = result.spurious.get(key, 0) + s.spurious_fields + parse_spurious
            per_type[e.doc_type].append(s)
        for doc_type, docs in per_type.items():
            result.scores[(model, doc_type)] = aggregate_dataset(docs)
    return result
