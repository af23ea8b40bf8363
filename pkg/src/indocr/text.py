"""Unicode normalization and segmentation of OCR text.

Every metric in the toolkit compares token sequences produced here, so the
three units (whitespace words, code points, extended grapheme clusters) are
defined in exactly one place.
"""

from __future__ import annotations

import enum
import re
import unicodedata
from dataclasses import dataclass

import regex

__all__ = [
    "DEFAULT_POLICY",
    "NormalizationPolicy",
    "SegmentUnit",
    "TextDecodeError",
    "Transcript",
    "normalize",
    "normalize_text",
    "segment",
]

_GRAPHEME = regex.compile(r"\X")
_WS_RUN = re.compile(r"\s+")


class TextDecodeError(ValueError):
    """Raised when raw input is not valid UTF-8 / Unicode."""

    def __init__(self, offset: int, reason: str):
        self.offset = offset
        super().__init__(f"invalid text at offset {offset}: {reason}")


class SegmentUnit(str, enum.Enum):
    WORD = "word"
    CODEPOINT = "codepoint"
    GRAPHEME = "grapheme"

    @classmethod
    def parse(cls, value: str | SegmentUnit) -> SegmentUnit:
        if isinstance(value, SegmentUnit):
            return value
        if value == "char":
            return cls.CODEPOINT
        return cls(value)


@dataclass(frozen=True)
class NormalizationPolicy:
    unicode_form: str = "composed"  # or "decomposed"
    case_fold: bool = False
    collapse_whitespace: bool = True
    strip: bool = True

    def __post_init__(self) -> None:
        if self.unicode_form not in ("composed", "decomposed"):
            raise ValueError(f"unknown unicode_form {self.unicode_form!r}")

    @property
    def nf(self) -> str:
        return "NFC" if self.unicode_form == "composed" else "NFD"

    def describe(self) -> str:
        return (
            f"form={self.nf} case_fold={self.case_fold} "
            f"collapse_whitespace={self.collapse_whitespace} strip={self.strip}"
        )


DEFAULT_POLICY = NormalizationPolicy()


@dataclass(frozen=True)
class Transcript:
    raw: str
    normalized: str
    language: str = "und"

    def __str__(self) -> str:
        return self.normalized


def _decode(raw: str | bytes) -> str:
    if isinstance(raw, bytes):
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TextDecodeError(exc.start, exc.reason) from None
    try:
        raw.encode("utf-8")
    except UnicodeEncodeError as exc:
        # lone surrogates
        raise TextDecodeError(exc.start, exc.reason) from None
    return raw


def normalize_text(raw: str | bytes, policy: NormalizationPolicy = DEFAULT_POLICY) -> str:
    """Apply ``policy`` to ``raw`` and return the normalized string."""
    s = unicodedata.normalize(policy.nf, _decode(raw))
    if policy.case_fold:
        # casefold can break canonical ordering, so renormalize afterwards
        s = unicodedata.normalize(policy.nf, s.casefold())
    if policy.collapse_whitespace:
        s = _WS_RUN.sub(" ", s)
    if policy.strip:
        s = s.strip()
    return s


def normalize(
    raw: str | bytes,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    language: str = "und",
) -> Transcript:
    text = _decode(raw)
    return Transcript(raw=text, normalized=normalize_text(text, policy), language=language)


def segment(t: Transcript | str, unit: SegmentUnit | str) -> list[str]:
    """Split normalized text into comparison tokens.

    Words split on any whitespace (newlines included) and never yield empty
    tokens. Graphemes follow the Unicode extended grapheme cluster rules, so a
    consonant plus its dependent vowel sign is one token.
    """
    s = t.normalized if isinstance(t, Transcript) else t
    unit = SegmentUnit.parse(unit)
    if unit is SegmentUnit.WORD:
        return s.split()
    if unit is SegmentUnit.CODEPOINT:
        return list(s)
    return _GRAPHEME.findall(s)
