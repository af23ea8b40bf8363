"""OCR backend clients, prediction records and the on-disk prediction cache.

Two wire styles are supported: an OpenAI-compatible chat request with image
parts (``chat_image``) and a plain multipart upload (``simple_image``). Both
read server-sent events when the server streams and record first/last token
times from the event stream itself, so no local tokenizer is involved.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import mimetypes
import os
import re
import tempfile
import threading
import time
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .latency import TimingTrace

__all__ = [
    "BackendSpec",
    "HttpBackend",
    "Job",
    "MockBackend",
    "PredictionCache",
    "PredictionRecord",
    "prompt_digest",
    "read_predictions",
    "run_batch",
    "transcribe",
    "write_predictions",
]

log = logging.getLogger(__name__)

RECORD_VERSION = 1
REQUEST_STYLES = ("chat_image", "simple_image")


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class BackendSpec:
    name: str
    endpoint: str
    model: str = ""
    request_style: str = "chat_image"
    token_env: str | None = None
    timeout: float = 120.0
    max_concurrency: int = 1
    stream: bool = True
    retries: int = 1

    def __post_init__(self) -> None:
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.request_style not in REQUEST_STYLES:
            raise ValueError(f"request_style must be one of {REQUEST_STYLES}")

    @property
    def label(self) -> str:
        return self.model or self.name

    @classmethod
    def from_json(cls, obj: Mapping) -> BackendSpec:
        if "token" in obj or "api_key" in obj:
            raise ValueError("backend config must not carry secrets; use token_env")
        return cls(**obj)


@dataclass
class PredictionRecord:
    sample_id: str
    model: str
    output_text: str = ""
    parsed_fields: dict[str, str] | None = None
    trace: TimingTrace | None = None
    error: str | None = None
    elapsed: float | None = None
    prompt_digest: str = ""

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_json(self) -> dict:
        t = self.trace
        return {
            "format_version": RECORD_VERSION,
            "sample_id": self.sample_id,
            "model": self.model,
            "output_text": self.output_text,
            "parsed_fields": self.parsed_fields,
            "trace": None
            if t is None
            else {
                "request_at": t.request_at,
                "first_token_at": t.first_token_at,
                "last_token_at": t.last_token_at,
                "token_count": t.token_count,
            },
            "error": self.error,
            "elapsed": self.elapsed,
            "prompt_digest": self.prompt_digest,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> PredictionRecord:
        if obj.get("format_version") != RECORD_VERSION:
            raise ValueError(f"unsupported record format_version {obj.get('format_version')!r}")
        trace = obj.get("trace")
        return cls(
            sample_id=str(obj["sample_id"]),
            model=str(obj["model"]),
            output_text=obj.get("output_text") or "",
            parsed_fields=obj.get("parsed_fields"),
            trace=TimingTrace(**trace) if trace else None,
            error=obj.get("error"),
            elapsed=obj.get("elapsed"),
            prompt_digest=obj.get("prompt_digest", ""),
        )


def write_predictions(records: Sequence[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), ensure_ascii=False, sort_keys=True) + "\n")


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(PredictionRecord.from_json(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: bad prediction record: {exc}") from exc
    return out


def _relative_trace(t0: float, first: float | None, last: float | None, n: int) -> TimingTrace | None:
    if first is None or last is None or n < 1:
        return None
    return TimingTrace(0.0, first - t0, last - t0, n)


class _ConcurrencyGauge:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.in_flight = 0
        self.max_in_flight = 0
        self.calls = 0

    def __enter__(self):
        with self._lock:
            self.in_flight += 1
            self.calls += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
        return self

    def __exit__(self, *exc):
        with self._lock:
            self.in_flight -= 1


_CHUNK = re.compile(r"\S+\s*|\s+")


class MockBackend:
    """Deterministic stand-in backend.

    Responses come from a mapping or a callable keyed by sample id. Timing is
    synthesized on a virtual clock (``ttft`` then ``inter_token`` per streamed
    word chunk) unless ``realtime`` is set, in which case it actually sleeps.
    """

    def __init__(
        self,
        responses: Mapping[str, str] | Callable[[str], str],
        model: str = "mock",
        ttft: float = 0.125,
        inter_token: float = 0.004,
        realtime: bool = False,
        fail: bool = False,
        max_concurrency: int = 1,
    ):
        self.responses = responses
        self.model = model
        self.ttft = ttft
        self.inter_token = inter_token
        self.realtime = realtime
        self.fail = fail
        self.max_concurrency = max_concurrency
        self.gauge = _ConcurrencyGauge()

    def _text_for(self, sample_id: str) -> str:
        if callable(self.responses):
            return self.responses(sample_id)
        return self.responses[sample_id]

    def transcribe(
        self, images: Sequence[str | Path], prompt: str, sample_id: str = ""
    ) -> PredictionRecord:
        digest = prompt_digest(prompt)
        with self.gauge:
            if self.fail:
                return PredictionRecord(
                    sample_id, self.model, error="connection refused (mock backend down)",
                    prompt_digest=digest,
                )
            text = self._text_for(sample_id)
            chunks = _CHUNK.findall(text) or [""]
            if self.realtime:
                t0 = time.perf_counter()
                time.sleep(self.ttft)
                first = time.perf_counter()
                for _ in chunks[1:]:
                    time.sleep(self.inter_token)
                last = time.perf_counter()
            else:
                t0 = 0.0
                first = t0 + self.ttft
                last = first + (len(chunks) - 1) * self.inter_token
            trace = _relative_trace(t0, first, last, len(chunks))
            return PredictionRecord(
                sample_id, self.model, output_text=text, trace=trace,
                elapsed=trace.total, prompt_digest=digest,
            )


class HttpBackend:
    def __init__(self, spec: BackendSpec, transport: httpx.BaseTransport | None = None):
        self.spec = spec
        self.model = spec.label
        self.max_concurrency = spec.max_concurrency
        headers = {}
        if spec.token_env:
            token = os.environ.get(spec.token_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
            else:
                log.warning("environment variable %s is not set; sending no token", spec.token_env)
        self._client = httpx.Client(timeout=spec.timeout, headers=headers, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _request_kwargs(self, images: Sequence[str | Path], prompt: str) -> dict:
        spec = self.spec
        if spec.request_style == "chat_image":
            parts = []
            for p in images:
                mime = mimetypes.guess_type(str(p))[0] or "image/png"
                data = base64.b64encode(Path(p).read_bytes()).decode("ascii")
                parts.append({"type": "image_url", "image_url": {"url": f"data:{mime};base64,{data}"}})
            parts.append({"type": "text", "text": prompt})
            payload = {
                "model": spec.model or spec.name,
                "messages": [{"role": "user", "content": parts}],
                "stream": spec.stream,
                "temperature": 0,
            }
            return {"json": payload}
        files = [
            ("image", (Path(p).name, Path(p).read_bytes(), mimetypes.guess_type(str(p))[0] or "image/png"))
            for p in images
        ]
        data = {"prompt": prompt, "stream": "true" if spec.stream else "false"}
        if spec.model:
            data["model"] = spec.model
        return {"files": files, "data": data}

    @staticmethod
    def _event_text(obj: Mapping) -> str:
        if "choices" in obj and obj["choices"]:
            choice = obj["choices"][0]
            delta = choice.get("delta") or choice.get("message") or {}
            return delta.get("content") or choice.get("text") or ""
        return obj.get("text") or ""

    def _once(self, images, prompt, sample_id, digest) -> PredictionRecord:
        kwargs = self._request_kwargs(images, prompt)
        t0 = time.perf_counter()
        with self._client.stream("POST", self.spec.endpoint, **kwargs) as resp:
            if resp.status_code >= 400:
                body = resp.read().decode("utf-8", "replace")[:200]
                return PredictionRecord(
                    sample_id, self.model, error=f"HTTP {resp.status_code}: {body}",
                    elapsed=time.perf_counter() - t0, prompt_digest=digest,
                )
            if "text/event-stream" not in resp.headers.get("content-type", ""):
                obj = json.loads(resp.read())
                return PredictionRecord(
                    sample_id, self.model, output_text=self._event_text(obj),
                    elapsed=time.perf_counter() - t0, prompt_digest=digest,
                )
            pieces: list[str] = []
            first = last = None
            for line in resp.iter_lines():
                if not line.startswith("data:"):
                    continue
                data = line[5:].strip()
                if data == "[DONE]":
                    break
                try:
                    piece = self._event_text(json.loads(data))
                except (json.JSONDecodeError, AttributeError, TypeError):
                    return PredictionRecord(
                        sample_id, self.model, output_text="".join(pieces),
                        error=f"malformed stream event: {data[:80]!r}",
                        elapsed=time.perf_counter() - t0, prompt_digest=digest,
                    )
                if piece:
                    now = time.perf_counter()
                    first = now if first is None else first
                    last = now
                    pieces.append(piece)
            end = time.perf_counter()
        trace = _relative_trace(t0, first, last, len(pieces))
        return PredictionRecord(
            sample_id, self.model, output_text="".join(pieces), trace=trace,
            elapsed=end - t0, prompt_digest=digest,
        )

    def transcribe(
        self, images: Sequence[str | Path], prompt: str, sample_id: str = ""
    ) -> PredictionRecord:
        digest = prompt_digest(prompt)
        if not images:
            return PredictionRecord(sample_id, self.model, error="no images", prompt_digest=digest)
        last_error = ""
        for attempt in range(self.spec.retries + 1):
            try:
                return self._once(images, prompt, sample_id, digest)
            except OSError as exc:
                # missing image file: retrying will not help
                return PredictionRecord(sample_id, self.model, error=str(exc), prompt_digest=digest)
            except httpx.TimeoutException as exc:
                last_error = f"timeout: {exc}"
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
            except (json.JSONDecodeError, UnicodeDecodeError) as exc:
                return PredictionRecord(
                    sample_id, self.model, error=f"malformed response: {exc}", prompt_digest=digest
                )
        return PredictionRecord(sample_id, self.model, error=last_error, prompt_digest=digest)


def transcribe(
    spec: BackendSpec, images: Sequence[str | Path], prompt: str, sample_id: str = ""
) -> PredictionRecord:
    backend = HttpBackend(spec)
    try:
        return backend.transcribe(images, prompt, sample_id)
    finally:
        backend.close()


class PredictionCache:
    """One JSON file per record, addressed by (sample_id, model, prompt digest)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def key(self, sample_id: str, model: str, digest: str) -> str:
        return hashlib.sha256(f"{sample_id}\0{model}\0{digest}".encode("utf-8")).hexdigest()

    def path(self, sample_id: str, model: str, digest: str) -> Path:
        k = self.key(sample_id, model, digest)
        return self.root / k[:2] / f"{k}.json"

    def get(self, sample_id: str, model: str, digest: str) -> PredictionRecord | None:
        path = self.path(sample_id, model, digest)
        try:
            text = path.read_text("utf-8")
        except FileNotFoundError:
            return None
        except OSError as exc:
            raise OSError(f"cannot read cache entry {path}: {exc}") from exc
        try:
            doc = json.loads(text)
            if doc.get("format_version") != RECORD_VERSION:
                raise ValueError("format_version mismatch")
            return PredictionRecord.from_json(doc["record"])
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            log.warning("evicting corrupt cache entry %s (%s)", path, exc)
            path.unlink(missing_ok=True)
            return None

    def put(self, record: PredictionRecord) -> Path:
        path = self.path(record.sample_id, record.model, record.prompt_digest)
        doc = {"format_version": RECORD_VERSION, "record": record.to_json()}
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, ensure_ascii=False, sort_keys=True)
            os.replace(tmp, path)
        except OSError as exc:
            raise OSError(f"cannot write cache entry {path}: {exc}") from exc
        return path


@dataclass(frozen=True)
class Job:
    sample_id: str
    images: tuple[str | Path, ...]
    prompt: str
    meta: dict = field(default_factory=dict, compare=False)


def run_batch(
    backend: MockBackend | HttpBackend,
    jobs: Sequence[Job],
    cache: PredictionCache | None = None,
    max_concurrency: int | None = None,
    on_record: Callable[[Job, PredictionRecord], PredictionRecord] | None = None,
) -> list[PredictionRecord]:
    """Run every job through ``backend``, consulting ``cache`` first.

    ``max_concurrency`` of 1 issues requests strictly one at a time. Results
    come back in job order regardless of completion order.
    """
    limit = getattr(backend, "max_concurrency", 1) if max_concurrency is None else max_concurrency
    if limit < 1:
        raise ValueError("max_concurrency must be >= 1")

    def one(job: Job) -> PredictionRecord:
        digest = prompt_digest(job.prompt)
        if cache is not None:
            hit = cache.get(job.sample_id, backend.model, digest)
            if hit is not None:
                return hit
        rec = backend.transcribe(job.images, job.prompt, job.sample_id)
        if on_record is not None:
            rec = on_record(job, rec)
        if cache is not None and rec.ok:
            cache.put(rec)
        return rec

    if limit == 1:
        return [one(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=limit) as pool:
        return list(pool.map(one, jobs))
