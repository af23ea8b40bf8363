"""Document schemas, prompt construction and key-value output parsing.

The registry ships as ``data/schemas.json``. Field names there are kept
byte-exact to the training prompts (``"Regn. No "`` keeps its trailing space);
record keys are the trimmed names.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

__all__ = [
    "DOC_TYPES",
    "DocumentSchema",
    "FieldRecord",
    "OutputParseError",
    "Violation",
    "build_prompt",
    "get_schema",
    "load_registry",
    "parse_output",
    "serialize_record",
    "validate_record",
]


class OutputParseError(ValueError):
    """No key-value object could be recovered from a model response."""

    def __init__(self, raw: str):
        self.raw = raw
        preview = raw if len(raw) <= 80 else raw[:77] + "..."
        super().__init__(f"no parseable key-value object in output: {preview!r}")


@dataclass(frozen=True)
class DocumentSchema:
    doc_type: str
    title: str
    fields: tuple[str, ...]
    prompt_template: str
    closing: str
    subject: str
    field_prefix: str = ""
    extra_instructions: str | None = None

    @property
    def keys(self) -> tuple[str, ...]:
        """Field names as they appear in parsed records."""
        return tuple(f.strip() for f in self.fields)

    def render_prompt(self) -> str:
        lines = [self.prompt_template.format(subject=self.subject)]
        lines.extend(f'{self.field_prefix}"{name}"' for name in self.fields)
        tail = self.closing
        if self.extra_instructions:
            tail = f"{self.extra_instructions} {tail}"
        lines.append(tail)
        return "\n".join(lines)


@dataclass(frozen=True)
class FieldRecord:
    doc_type: str
    values: dict[str, str]
    pages: int = 1
    duplicate_keys: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}" if self.detail else self.kind


def load_registry(path: str | Path | None = None) -> dict[str, DocumentSchema]:
    if path is None:
        text = resources.files("indocr").joinpath("data/schemas.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    doc = json.loads(text)
    if doc.get("format_version") != 1:
        raise ValueError(f"unsupported schema registry version {doc.get('format_version')!r}")
    out = {}
    for s in doc["schemas"]:
        out[s["doc_type"]] = DocumentSchema(
            doc_type=s["doc_type"],
            title=s["title"],
            fields=tuple(s["fields"]),
            prompt_template=doc["prompt_template"],
            closing=doc["closing"],
            subject=s["subject"],
            field_prefix=s.get("field_prefix", ""),
            extra_instructions=s.get("extra_instructions"),
        )
    return out


@lru_cache(maxsize=1)
def _default_registry() -> dict[str, DocumentSchema]:
    return load_registry()


DOC_TYPES: tuple[str, ...] = tuple(_default_registry())


def get_schema(doc_type: str) -> DocumentSchema:
    try:
        return _default_registry()[doc_type]
    except KeyError:
        raise KeyError(
            f"unknown doc_type {doc_type!r}; valid types: {', '.join(DOC_TYPES)}"
        ) from None


def build_prompt(doc_type: str) -> str:
    return get_schema(doc_type).render_prompt()


_FENCE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n?(.*?)```", re.DOTALL)


class _Pairs(list):
    """Object members in source order, so duplicate keys stay visible."""


def _to_plain(value: object) -> object:
    if isinstance(value, _Pairs):
        return {k: _to_plain(v) for k, v in value}
    if isinstance(value, list):
        return [_to_plain(v) for v in value]
    return value


def _find_object(text: str) -> tuple[_Pairs, int, int] | None:
    decoder = json.JSONDecoder(object_pairs_hook=_Pairs)
    for m in re.finditer(r"\{", text):
        try:
            pairs, end = decoder.raw_decode(text, m.start())
        except json.JSONDecodeError:
            continue
        return pairs, m.start(), end
    return None


def _stringify(value: object) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(_to_plain(value), ensure_ascii=False)


def parse_output(raw: str, doc_type: str, pages: int = 1) -> tuple[FieldRecord, list[Violation]]:
    """Recover a FieldRecord from a model response.

    Takes the first well-formed JSON object found, tolerating code fences and
    surrounding prose (both reported as violations). Keys are trimmed and
    matched case-sensitively against the schema; anything else is dropped.
    """
    schema = get_schema(doc_type)
    violations: list[Violation] = []

    fence = _FENCE.search(raw)
    found = _find_object(fence.group(1)) if fence else None
    if found is not None:
        violations.append(Violation("fenced output"))
        inner = fence.group(1)
        pairs, start, end = found
        leftover = raw[: fence.start()] + inner[:start] + inner[end:] + raw[fence.end() :]
    else:
        found = _find_object(raw)
        if found is None:
            raise OutputParseError(raw)
        pairs, start, end = found
        leftover = raw[:start] + raw[end:]
    if leftover.strip():
        violations.append(Violation("extra text"))

    allowed = set(schema.keys)
    values: dict[str, str] = {}
    duplicates: list[str] = []
    for key, value in pairs:
        name = key.strip() if isinstance(key, str) else str(key)
        if name not in allowed:
            violations.append(Violation("spurious field", name))
            continue
        if name in values:
            duplicates.append(name)
            violations.append(Violation("duplicate key", name))
            continue
        if value is None:
            violations.append(Violation("null value", name))
            continue
        if not isinstance(value, str):
            violations.append(Violation("non-string value", name))
        values[name] = _stringify(value)
    return FieldRecord(doc_type, values, pages, tuple(duplicates)), violations


def serialize_record(rec: FieldRecord) -> str:
    """Key-value wire form, the JSON object the prompts ask for."""
    return json.dumps(rec.values, ensure_ascii=False, indent=2)


def validate_record(rec: FieldRecord, expected_doc_type: str | None = None) -> list[Violation]:
    out: list[Violation] = []
    if rec.doc_type not in DOC_TYPES:
        out.append(Violation("unknown doc_type", rec.doc_type))
    elif expected_doc_type is not None and rec.doc_type != expected_doc_type:
        out.append(Violation("doc_type mismatch", f"{rec.doc_type} != {expected_doc_type}"))
    if rec.doc_type in DOC_TYPES:
        allowed = set(get_schema(rec.doc_type).keys)
        out.extend(Violation("unknown field", k) for k in rec.values if k.strip() not in allowed)
    out.extend(Violation("empty value", k) for k, v in rec.values.items() if not v.strip())
    out.extend(Violation("duplicate key", k) for k in rec.duplicate_keys)
    return out
