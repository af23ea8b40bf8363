"""Benchmark manifests: one JSON record per line.

Each record names ``sample_id``, ``images``, ``language``, ``task``,
``doc_type`` and ``ground_truth``; image paths are relative to the manifest's
directory unless a root is given. A ``format_version`` key is optional and
must be 1 when present.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .schemas import DOC_TYPES, FieldRecord

__all__ = [
    "TASKS",
    "Manifest",
    "ManifestEntry",
    "ManifestError",
    "load_manifest",
    "stats",
    "write_manifest",
]

log = logging.getLogger(__name__)

TASKS = ("transcribe", "extract", "freeform_match")
FORMAT_VERSION = 1


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    images: tuple[str, ...]
    language: str
    task: str
    ground_truth: str | dict[str, str]
    doc_type: str | None = None

    @property
    def reference_record(self) -> FieldRecord:
        if not isinstance(self.ground_truth, dict):
            raise TypeError(f"{self.sample_id}: ground truth is not a field map")
        return FieldRecord(self.doc_type or "", dict(self.ground_truth), max(1, len(self.images)))

    def to_json(self) -> dict:
        d = {
            "sample_id": self.sample_id,
            "images": list(self.images),
            "language": self.language,
            "task": self.task,
            "doc_type": self.doc_type,
            "ground_truth": self.ground_truth,
        }
        return d


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    root: Path
    errors: list[str] = field(default_factory=list)
    missing_images: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def by_id(self) -> dict[str, ManifestEntry]:
        return {e.sample_id: e for e in self.entries}

    def image_paths(self, entry: ManifestEntry) -> list[Path]:
        return [self.root / p for p in entry.images]


def _entry_from_json(obj: dict) -> ManifestEntry:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    version = obj.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {version!r}")
    for key in ("sample_id", "language", "task", "ground_truth"):
        if key not in obj:
            raise ValueError(f"missing {key}")
    sample_id = str(obj["sample_id"])
    task = obj["task"]
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    images = obj.get("images") or []
    if isinstance(images, str):
        images = [images]
    doc_type = obj.get("doc_type")
    gt = obj["ground_truth"]
    if task == "transcribe":
        if not isinstance(gt, str):
            raise ValueError("transcribe task needs string ground_truth")
    else:
        if not isinstance(gt, dict) or not gt:
            raise ValueError(f"{task} task needs a non-empty field-map ground_truth")
        gt = {str(k): str(v) for k, v in gt.items()}
    if task == "extract":
        if not doc_type:
            raise ValueError("extract task needs doc_type")
        if doc_type not in DOC_TYPES:
            raise ValueError(f"unknown doc_type {doc_type!r}")
    return ManifestEntry(
        sample_id=sample_id,
        images=tuple(str(p) for p in images),
        language=str(obj["language"]),
        task=task,
        ground_truth=gt,
        doc_type=doc_type,
    )


def load_manifest(path: str | Path, root: str | Path | None = None) -> Manifest:
    """Load and validate a line-delimited manifest.

    Bad lines are collected in ``Manifest.errors`` with their line number and
    skipped. Duplicate sample ids and an empty result are fatal.
    """
    path = Path(path)
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    base = Path(root) if root is not None else path.parent
    entries: list[ManifestEntry] = []
    errors: list[str] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = _entry_from_json(json.loads(line))
        except (json.JSONDecodeError, ValueError) as exc:
            errors.append(f"line {lineno}: {exc}")
            continue
        if entry.sample_id in seen:
            raise ManifestError(
                f"duplicate sample_id {entry.sample_id!r} on lines {seen[entry.sample_id]} and {lineno}"
            )
        seen[entry.sample_id] = lineno
        entries.append(entry)
    for err in errors:
        log.warning("%s: %s", path, err)
    if not entries:
        raise ManifestError(f"{path}: no valid entries ({len(errors)} rejected)")
    missing = [p for e in entries for p in e.images if not (base / p).exists()]
    return Manifest(entries, base, errors, missing)


def write_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e.to_json(), ensure_ascii=False) + "\n")


def stats(m: Manifest | list[ManifestEntry]) -> dict[str, dict[str, int]]:
    """Entry counts per language and per doc type (entries without one count as ``-``)."""
    entries = m.entries if isinstance(m, Manifest) else m
    if not entries:
        return {}
    return {
        "language": dict(Counter(e.language for e in entries)),
        "doc_type": dict(Counter(e.doc_type or "-" for e in entries)),
        "task": dict(Counter(e.task for e in entries)),
    }
