"""Decoding-latency model and measurement.

Projected latency for generating ``T`` tokens is ``ttft + T * inter_token``,
with ``T`` taken from a per-language tokens-per-word ratio. Measured traces
from streamed responses give the two constants back.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

__all__ = [
    "DEFAULT_GROUPS",
    "LatencyParams",
    "LatencySummary",
    "TimingTrace",
    "TokenProfile",
    "estimate_params",
    "load_profiles",
    "project_latency",
    "project_tokens",
    "projection_table",
    "summarize_latency",
]

# English / Hindi / everything else, as in the end-to-end latency comparison
DEFAULT_GROUPS: dict[str, str] = {
    "en": "English",
    "hi": "Hindi",
    **{lang: "Others" for lang in ("bn", "kn", "ml", "mr", "or", "pa", "ta", "te", "sa")},
}


@dataclass(frozen=True)
class TokenProfile:
    language: str
    tokens_per_word: float
    source: str = "measured"

    def __post_init__(self) -> None:
        if not self.tokens_per_word > 0:
            raise ValueError(f"tokens_per_word must be positive, got {self.tokens_per_word}")


@dataclass(frozen=True)
class LatencyParams:
    ttft: float
    inter_token: float

    def __post_init__(self) -> None:
        if self.ttft < 0:
            raise ValueError("ttft must be non-negative")
        if not self.inter_token > 0:
            raise ValueError("inter_token must be positive")


@dataclass(frozen=True)
class TimingTrace:
    request_at: float
    first_token_at: float
    last_token_at: float
    token_count: int

    def __post_init__(self) -> None:
        if not self.request_at <= self.first_token_at <= self.last_token_at:
            raise ValueError("timestamps must be ordered request <= first <= last")
        if self.token_count < 1:
            raise ValueError("token_count must be >= 1")

    @property
    def ttft(self) -> float:
        return self.first_token_at - self.request_at

    @property
    def total(self) -> float:
        return self.last_token_at - self.request_at


@dataclass(frozen=True)
class LatencySummary:
    group: str
    mean_seconds: float
    n: int


def load_profiles(path: str | Path | None = None) -> list[TokenProfile]:
    """Read a ``language<TAB>tokens_per_word`` table.

    ``# source: <tag>`` in the leading comments tags every row; the bundled
    default is the published 10-language table.
    """
    if path is None:
        text = resources.files("indocr").joinpath("data/token_profile.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    source = "measured"
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            if key.strip() == "source":
                source = value.strip()
            continue
        if line.strip():
            rows.append(line)
    reader = csv.DictReader(io.StringIO("\n".join(rows)), delimiter="\t")
    if reader.fieldnames is None or not {"language", "tokens_per_word"} <= set(reader.fieldnames):
        raise ValueError("profile file needs 'language' and 'tokens_per_word' columns")
    return [TokenProfile(r["language"], float(r["tokens_per_word"]), source) for r in reader]


def project_tokens(words: float, profile: TokenProfile) -> float:
    if words < 0:
        raise ValueError("words must be non-negative")
    return words * profile.tokens_per_word


def project_latency(tokens: float, params: LatencyParams) -> float:
    if tokens < 0:
        raise ValueError("tokens must be non-negative")
    return params.ttft + tokens * params.inter_token


def projection_table(
    profiles: Iterable[TokenProfile], params: LatencyParams, words: float = 200
) -> list[tuple[str, float, float, float]]:
    """(language, tokens/word, tokens, seconds) for each profile, in order."""
    out = []
    for p in profiles:
        tokens = project_tokens(words, p)
        out.append((p.language, p.tokens_per_word, tokens, project_latency(tokens, params)))
    return out


def estimate_params(traces: Sequence[TimingTrace]) -> LatencyParams:
    """Mean TTFT and mean per-trace inter-token gap."""
    if not traces:
        raise ValueError("no traces")
    for t in traces:
        if t.token_count < 2:
            raise ValueError("inter-token latency undefined for a trace with < 2 tokens")
    n = len(traces)
    ttft = sum(t.ttft for t in traces) / n
    gap = sum((t.last_token_at - t.first_token_at) / (t.token_count - 1) for t in traces) / n
    return LatencyParams(ttft=ttft, inter_token=gap)


def summarize_latency(
    records: Iterable[tuple[str, float]],
    grouping: Mapping[str, str],
    order: Sequence[str] | None = None,
) -> list[LatencySummary]:
    """Unweighted mean end-to-end latency per group.

    Groups come out in ``order`` when given, else in first-seen order of the
    grouping map's values.
    """
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for language, seconds in records:
        if language not in grouping:
            raise KeyError(f"language {language!r} has no latency group")
        g = grouping[language]
        sums[g] = sums.get(g, 0.0) + seconds
        counts[g] = counts.get(g, 0) + 1
    if order is None:
        order = list(dict.fromkeys(grouping.values()))
    return [LatencySummary(g, sums[g] / counts[g], counts[g]) for g in order if g in counts]
