"""OCR and extraction metrics.

ANLS at any segmentation unit, field-level Exact Match / Percentage Match with
the Mean Score aggregate, and the substring-containment %Match used to score
free-form transcriptions against key-value ground truth.
"""

from __future__ import annotations

from collections.abc import Hashable, Iterable, Sequence
from dataclasses import dataclass, field

from .schemas import FieldRecord
from .text import (
    DEFAULT_POLICY,
    NormalizationPolicy,
    SegmentUnit,
    Transcript,
    normalize_text,
    segment,
)

__all__ = [
    "FREEFORM_POLICY",
    "AnlsScore",
    "ExtractionScore",
    "FieldScore",
    "FreeFormMatchScore",
    "aggregate_dataset",
    "anls",
    "edit_distance",
    "exact_match",
    "free_form_match",
    "normalized_distance",
    "percentage_match_field",
    "score_extraction",
]

# Case-insensitive, whitespace-collapsed: mixed-case OCR of an upper-case
# ground-truth value must still count as present.
FREEFORM_POLICY = NormalizationPolicy(case_fold=True)


def edit_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs.

    Uses the bit-parallel formulation (Myers 1999, Hyyro 2001) with one
    arbitrary-precision int per bit vector, so a whole column of the DP
    matrix advances per symbol of ``b``.
    """
    if len(a) < len(b):
        a, b = b, a
    # trim common affixes; they never contribute to the distance
    lo = 0
    n_a, n_b = len(a), len(b)
    while lo < n_b and a[lo] == b[lo]:
        lo += 1
    hi_a, hi_b = n_a, n_b
    while hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
    a = a[lo:hi_a]
    b = b[lo:hi_b]
    m = len(b)
    if m == 0:
        return len(a)

    # pattern is the shorter sequence b (m bits); text is a
    peq: dict[Hashable, int] = {}
    for i, sym in enumerate(b):
        peq[sym] = peq.get(sym, 0) | (1 << i)
    full = (1 << m) - 1
    top = 1 << (m - 1)
    pv, mv, score = full, 0, m
    for sym in a:
        eq = peq.get(sym, 0)
        xv = eq | mv
        xh = (((eq & pv) + pv) ^ pv) | eq
        ph = mv | (~(xh | pv) & full)
        mh = pv & xh
        if ph & top:
            score += 1
        elif mh & top:
            score -= 1
        ph = ((ph << 1) | 1) & full
        mh = (mh << 1) & full
        pv = mh | (~(xv | ph) & full)
        mv = ph & xv
    return score


def normalized_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> float:
    """Edit distance divided by the longer length; 0.0 when both are empty."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return edit_distance(a, b) / longest


@dataclass(frozen=True)
class AnlsScore:
    value: float
    unit: SegmentUnit
    n_pairs: int

    @property
    def scaled(self) -> float:
        return 100.0 * self.value


def anls(
    pairs: Iterable[tuple[Transcript | str, Transcript | str]],
    unit: SegmentUnit | str = SegmentUnit.CODEPOINT,
) -> AnlsScore:
    """Unweighted mean normalized edit distance over (prediction, reference) pairs."""
    unit = SegmentUnit.parse(unit)
    total = 0.0
    n = 0
    for pred, ref in pairs:
        total += normalized_distance(segment(pred, unit), segment(ref, unit))
        n += 1
    if n == 0:
        raise ValueError("no samples")
    return AnlsScore(value=total / n, unit=unit, n_pairs=n)


def exact_match(pred: str, ref: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> int:
    return int(normalize_text(pred, policy) == normalize_text(ref, policy))


def percentage_match_field(
    pred: str, ref: str, policy: NormalizationPolicy = DEFAULT_POLICY
) -> float:
    """Soft field similarity: 1 - code-point normalized edit distance."""
    return 1.0 - normalized_distance(normalize_text(pred, policy), normalize_text(ref, policy))


@dataclass(frozen=True)
class FieldScore:
    field: str
    em: int
    pm: float


@dataclass(frozen=True)
class ExtractionScore:
    doc_em: float
    doc_pm: float
    mean: float
    spurious_fields: int = 0
    per_field: tuple[FieldScore, ...] = field(default=(), repr=False)
    n_documents: int = 1


def score_extraction(
    pred: FieldRecord, ref: FieldRecord, policy: NormalizationPolicy = DEFAULT_POLICY
) -> ExtractionScore:
    """Score one document's predicted fields against its ground truth.

    Every reference field is scored (a missing prediction scores 0/0).
    Predicted keys absent from the reference are only counted.
    """
    if pred.doc_type != ref.doc_type:
        raise ValueError(f"document type mismatch: {pred.doc_type!r} vs {ref.doc_type!r}")
    ref_values = {k.strip(): v for k, v in ref.values.items()}
    pred_values = {k.strip(): v for k, v in pred.values.items()}
    if not ref_values:
        raise ValueError(f"reference record for {ref.doc_type!r} has no fields")

    per_field = []
    for name, ref_value in ref_values.items():
        if name in pred_values:
            em = exact_match(pred_values[name], ref_value, policy)
            # equality after normalization is a perfect partial match by definition
            pm = 1.0 if em else percentage_match_field(pred_values[name], ref_value, policy)
        else:
            em, pm = 0, 0.0
        per_field.append(FieldScore(name, em, pm))
    spurious = sum(1 for k in pred_values if k not in ref_values)
    doc_em = 100.0 * sum(f.em for f in per_field) / len(per_field)
    doc_pm = 100.0 * sum(f.pm for f in per_field) / len(per_field)
    return ExtractionScore(
        doc_em=doc_em,
        doc_pm=doc_pm,
        mean=(doc_em + doc_pm) / 2,
        spurious_fields=spurious,
        per_field=tuple(per_field),
    )


def aggregate_dataset(doc_scores: Iterable[ExtractionScore]) -> ExtractionScore:
    """Macro average of document scores (every document weighs the same)."""
    docs = list(doc_scores)
    if not docs:
        raise ValueError("no documents")
    n = len(docs)
    em = sum(d.doc_em for d in docs) / n
    pm = sum(d.doc_pm for d in docs) / n
    return ExtractionScore(
        doc_em=em,
        doc_pm=pm,
        mean=sum(d.mean for d in docs) / n,
        spurious_fields=sum(d.spurious_fields for d in docs),
        n_documents=sum(d.n_documents for d in docs),
    )


@dataclass(frozen=True)
class FreeFormMatchScore:
    matched: int
    total: int
    matched_fields: tuple[str, ...] = ()

    @property
    def percent(self) -> float:
        return 100.0 * self.matched / self.total if self.total else 0.0

    def __add__(self, other: FreeFormMatchScore) -> FreeFormMatchScore:
        return FreeFormMatchScore(
            self.matched + other.matched,
            self.total + other.total,
            self.matched_fields + other.matched_fields,
        )


def free_form_match(
    gt_fields: FieldRecord | dict[str, str],
    ocr_text: Transcript | str,
    policy: NormalizationPolicy = FREEFORM_POLICY,
) -> FreeFormMatchScore:
    """Count ground-truth values that occur verbatim inside free-form OCR text.

    Both sides go through ``policy`` first; after that the test is plain
    substring containment, so "193.00" is not found in "193.0".
    """
    values = gt_fields.values if isinstance(gt_fields, FieldRecord) else gt_fields
    if not values:
        raise ValueError("ground truth has no fields")
    raw = ocr_text.raw if isinstance(ocr_text, Transcript) else ocr_text
    haystack = normalize_text(raw, policy)
    matched = tuple(k for k, v in values.items() if normalize_text(v, policy) in haystack)
    return FreeFormMatchScore(matched=len(matched), total=len(values), matched_fields=matched)
