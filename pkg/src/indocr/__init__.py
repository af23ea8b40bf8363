"""Multilingual OCR evaluation and deployment benchmarking."""

__version__ = "0.1.0"

from .metrics import (  # noqa: E402
    aggregate_dataset,
    anls,
    edit_distance,
    exact_match,
    free_form_match,
    normalized_distance,
    percentage_match_field,
    score_extraction,
)
from .text import NormalizationPolicy, SegmentUnit, Transcript, normalize, segment  # noqa: E402

__all__ = [
    "NormalizationPolicy",
    "SegmentUnit",
    "Transcript",
    "aggregate_dataset",
    "anls",
    "edit_distance",
    "exact_match",
    "free_form_match",
    "normalize",
    "normalized_distance",
    "percentage_match_field",
    "score_extraction",
    "segment",
]
