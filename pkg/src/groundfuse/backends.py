"""Provider backends: image/text embedding, phrase detection, LLM completion.

Two interchangeable families implement the same call surface:

* fixture providers — deterministic, file-backed JSONL stores for offline
  tests (one JSON object per line, UTF-8);
* HTTP providers — clients for the wire protocol below (all endpoints POST
  JSON, errors are non-2xx with ``{"error": str}``):

    /v1/embed/image  {"image_png_b64": str}            -> {"vector": [f]}
    /v1/embed/text   {"text": str}                     -> {"vector": [f]}
    /v1/detect       {"image_png_b64", "phrase",
                      "box_threshold"}                 -> {"detections": [...]}
    /v1/complete     {"prompt": str}                   -> {"text": str}
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from types import MappingProxyType

import requests

from .core import BoundingBox, EmbeddingVector, Image, as_embedding
from .errors import BoxOutOfBounds, MissingFixture, ProviderError

log = logging.getLogger(__name__)

DEFAULT_BOX_THRESHOLD = 0.35


def prompt_digest(prompt: str) -> str:
    """Key LLM fixtures by the SHA-256 of the exact prompt text."""
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Detection:
    """One grounded phrase: box, detector confidence, and the query phrase."""

    box: BoundingBox
    confidence: float
    phrase: str

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


class ProviderKind(str, Enum):
    FIXTURE = "fixture"
    HTTP = "http"


@dataclass(frozen=True)
class ProviderConfig:
    """Where a provider lives and how patient the client is with it."""

    kind: ProviderKind
    location: str  # fixture directory or http base URL
    box_threshold: float = DEFAULT_BOX_THRESHOLD
    timeout_ms: int = 10_000
    retry_budget: int = 2
    bearer_token: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.box_threshold <= 1.0:
            raise ValueError(f"box_threshold must be in [0, 1], got {self.box_threshold}")
        if self.timeout_ms <= 0:
            raise ValueError(f"timeout_ms must be positive, got {self.timeout_ms}")
        if self.retry_budget < 0:
            raise ValueError(f"retry_budget must be >= 0, got {self.retry_budget}")

    @classmethod
    def parse(cls, spec: str, **overrides) -> "ProviderConfig":
        """Parse a "fixture:<dir>" or "http:<base-url>" spec string."""
        kind, sep, location = spec.partition(":")
        if not sep or not location:
            raise ValueError(f"provider spec must look like fixture:<dir> or http:<url>: {spec!r}")
        if kind == "fixture":
            return cls(kind=ProviderKind.FIXTURE, location=location, **overrides)
        if kind in ("http", "https"):
            # accept both "http:<base-url>" and a bare "http(s)://host:port"
            if location.startswith("//"):
                location = spec
            return cls(kind=ProviderKind.HTTP, location=location, **overrides)
        raise ValueError(f"unknown provider kind {kind!r} in {spec!r}")


# ---------------------------------------------------------------------------
# Fixture providers
# ---------------------------------------------------------------------------

IMAGE_EMBEDDINGS_FILE = "image_embeddings.jsonl"
TEXT_EMBEDDINGS_FILE = "text_embeddings.jsonl"
DETECTIONS_FILE = "detections.jsonl"
LLM_REPLIES_FILE = "llm_replies.jsonl"


def _read_jsonl(path: Path):
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise MissingFixture(f"{path}:{lineno}: corrupt JSONL line: {exc}") from exc


class FixtureStore:
    """Read-only maps loaded from a fixture directory.

    Missing files mean empty maps; corrupt content (bad JSON, mixed
    embedding dims, bad boxes) raises MissingFixture at load. The maps are
    frozen after load so providers stay referentially transparent.
    """

    def __init__(self, directory):
        directory = Path(directory)
        if not directory.is_dir():
            raise MissingFixture(f"fixture directory does not exist: {directory}")
        self.directory = directory
        self.image_embeddings: dict[str, EmbeddingVector] = {}
        self.text_embeddings: dict[str, EmbeddingVector] = {}
        self.detections: dict[tuple[str, str], tuple[Detection, ...]] = {}
        self.llm_replies: dict[str, str] = {}
        self.dim: int | None = None
        self._load()
        self.image_embeddings = MappingProxyType(self.image_embeddings)
        self.text_embeddings = MappingProxyType(self.text_embeddings)
        self.detections = MappingProxyType(self.detections)
        self.llm_replies = MappingProxyType(self.llm_replies)

    def _add_vector(self, target: dict, key, raw, where: str) -> None:
        try:
            vec = as_embedding(raw)
        except ValueError as exc:
            raise MissingFixture(f"{where}: bad vector for {key!r}: {exc}") from exc
        if self.dim is None:
            self.dim = vec.shape[0]
        elif vec.shape[0] != self.dim:
            raise MissingFixture(
                f"{where}: vector for {key!r} has dim {vec.shape[0]}, store dim is {self.dim}")
        target[key] = vec

    def _load(self) -> None:
        path = self.directory / IMAGE_EMBEDDINGS_FILE
        if path.is_file():
            for rec in _read_jsonl(path):
                self._add_vector(self.image_embeddings, rec["image_id"], rec["vector"], str(path))
        path = self.directory / TEXT_EMBEDDINGS_FILE
        if path.is_file():
            for rec in _read_jsonl(path):
                self._add_vector(self.text_embeddings, rec["text"], rec["vector"], str(path))
        path = self.directory / DETECTIONS_FILE
        if path.is_file():
            for rec in _read_jsonl(path):
                key = (rec["image_id"], rec["phrase"])
                try:
                    dets = tuple(
                        Detection(
                            box=BoundingBox(int(b["x"]), int(b["y"]), int(b["w"]), int(b["h"])),
                            confidence=float(b["confidence"]),
                            phrase=rec["phrase"],
                        )
                        for b in rec["boxes"]
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise MissingFixture(f"{path}: bad detection record for {key}: {exc}") from exc
                self.detections[key] = dets
        path = self.directory / LLM_REPLIES_FILE
        if path.is_file():
            for rec in _read_jsonl(path):
                self.llm_replies[rec["prompt_sha256"]] = rec["reply"]


def _sorted_detections(dets, threshold: float) -> list[Detection]:
    kept = [d for d in dets if d.confidence >= threshold]
    kept.sort(key=lambda d: (-d.confidence, d.box))
    return kept


class FixtureEmbedder:
    """Embeddings looked up by image id / exact text string."""

    def __init__(self, store: FixtureStore):
        self.store = store

    def embed_image(self, image: Image) -> EmbeddingVector:
        try:
            return self.store.image_embeddings[image.id]
        except KeyError:
            raise MissingFixture(f"no image embedding fixture for id {image.id}") from None

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("text must be nonempty")
        try:
            return self.store.text_embeddings[text]
        except KeyError:
            raise MissingFixture(f"no text embedding fixture for {text!r}") from None


class FixtureDetector:
    """Detections looked up by (image id, phrase); absent key means none."""

    def __init__(self, store: FixtureStore):
        self.store = store

    def detect(self, image: Image, phrase: str, threshold: float) -> list[Detection]:
        if not phrase:
            raise ValueError("phrase must be nonempty")
        if not 0.0 <= threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {threshold}")
        return _sorted_detections(self.store.detections.get((image.id, phrase), ()), threshold)


class FixtureLlm:
    """Replies looked up by SHA-256 of the exact prompt."""

    def __init__(self, store: FixtureStore):
        self.store = store

    def complete(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt must be nonempty")
        digest = prompt_digest(prompt)
        try:
            return self.store.llm_replies[digest]
        except KeyError:
            raise MissingFixture(
                f"no LLM reply fixture for digest {digest} (prompt starts {prompt[:60]!r})"
            ) from None


# ---------------------------------------------------------------------------
# HTTP providers
# ---------------------------------------------------------------------------


class HttpClient:
    """POSTs JSON to one base URL with a bounded retry budget.

    Retries on transport failures and 5xx responses only; 4xx means the
    request itself is wrong and is surfaced immediately. No backoff: the
    wire contract makes no latency promises and tests want determinism.
    """

    def __init__(self, config: ProviderConfig):
        if config.kind is not ProviderKind.HTTP:
            raise ValueError(f"HttpClient needs an http config, got {config.kind}")
        self.config = config
        self.base_url = config.location.rstrip("/")

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.bearer_token:
            headers["Authorization"] = f"Bearer {self.config.bearer_token}"
        return headers

    def post_json(self, path: str, body: dict) -> dict:
        url = f"{self.base_url}{path}"
        timeout = self.config.timeout_ms / 1000.0
        attempts = self.config.retry_budget + 1
        last_error = None
        for attempt in range(attempts):
            try:
                resp = requests.post(url, json=body, headers=self._headers(), timeout=timeout)
            except requests.RequestException as exc:
                last_error = f"transport failure: {exc}"
                log.warning("%s attempt %d/%d failed: %s", path, attempt + 1, attempts, exc)
                continue
            if 200 <= resp.status_code < 300:
                try:
                    payload = resp.json()
                except ValueError as exc:
                    raise ProviderError(f"{url}: response is not JSON: {exc}") from exc
                if not isinstance(payload, dict):
                    raise ProviderError(f"{url}: response must be a JSON object")
                return payload
            detail = _error_detail(resp)
            if 400 <= resp.status_code < 500:
                raise ProviderError(f"{url}: HTTP {resp.status_code}: {detail}")
            last_error = f"HTTP {resp.status_code}: {detail}"
            log.warning("%s attempt %d/%d failed: %s", path, attempt + 1, attempts, last_error)
        raise ProviderError(f"{url}: giving up after {attempts} attempts: {last_error}")


def _error_detail(resp) -> str:
    try:
        return str(resp.json().get("error", resp.text))
    except ValueError:
        return resp.text[:200]


def _image_payload(image: Image) -> str:
    return base64.b64encode(image.to_png_bytes()).decode("ascii")


class _DimGuard:
    """Pins the embedding dim on first success; mismatches are errors."""

    def __init__(self):
        self._lock = threading.Lock()
        self._dim: int | None = None

    def check(self, dim: int, source: str) -> None:
        with self._lock:
            if self._dim is None:
                self._dim = dim
            elif dim != self._dim:
                raise ProviderError(
                    f"{source}: embedding dim {dim} does not match session dim {self._dim}")


class HttpEmbedder:
    def __init__(self, config: ProviderConfig):
        self.client = HttpClient(config)
        self._dims = _DimGuard()

    def _vector(self, payload: dict, source: str) -> EmbeddingVector:
        raw = payload.get("vector")
        if not isinstance(raw, list):
            raise ProviderError(f"{source}: response has no 'vector' list")
        try:
            vec = as_embedding(raw)
        except ValueError as exc:
            raise ProviderError(f"{source}: bad vector: {exc}") from exc
        self._dims.check(vec.shape[0], source)
        return vec

    def embed_image(self, image: Image) -> EmbeddingVector:
        payload = self.client.post_json("/v1/embed/image", {"image_png_b64": _image_payload(image)})
        return self._vector(payload, "/v1/embed/image")

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("text must be nonempty")
        payload = self.client.post_json("/v1/embed/text", {"text": text})
        return self._vector(payload, "/v1/embed/text")


class HttpDetector:
    def __init__(self, config: ProviderConfig):
        self.client = HttpClient(config)

    def detect(self, image: Image, phrase: str, threshold: float) -> list[Detection]:
        if not phrase:
            raise ValueError("phrase must be nonempty")
        if not 0.0 <= threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {threshold}")
        payload = self.client.post_json(
            "/v1/detect",
            {"image_png_b64": _image_payload(image), "phrase": phrase, "box_threshold": threshold},
        )
        raw = payload.get("detections")
        if not isinstance(raw, list):
            raise ProviderError("/v1/detect: response has no 'detections' list")
        dets = []
        for item in raw:
            try:
                box = BoundingBox.clamped(
                    float(item["x"]), float(item["y"]), float(item["w"]), float(item["h"]),
                    image.width, image.height,
                )
                dets.append(Detection(box, float(item["confidence"]), phrase))
            except BoxOutOfBounds:
                log.warning("/v1/detect: dropping box outside the image frame: %s", item)
            except (KeyError, TypeError, ValueError) as exc:
                raise ProviderError(f"/v1/detect: bad detection {item!r}: {exc}") from exc
        return _sorted_detections(dets, threshold)


class HttpLlm:
    def __init__(self, config: ProviderConfig):
        self.client = HttpClient(config)

    def complete(self, prompt: str) -> str:
        if not prompt:
            raise ValueError("prompt must be nonempty")
        payload = self.client.post_json("/v1/complete", {"prompt": prompt})
        text = payload.get("text")
        if not isinstance(text, str):
            raise ProviderError("/v1/complete: response has no 'text' string")
        return text


# ---------------------------------------------------------------------------
# Construction helpers
# ---------------------------------------------------------------------------


def build_embedder(config: ProviderConfig):
    if config.kind is ProviderKind.FIXTURE:
        return FixtureEmbedder(FixtureStore(config.location))
    return HttpEmbedder(config)


def build_detector(config: ProviderConfig):
    if config.kind is ProviderKind.FIXTURE:
        return FixtureDetector(FixtureStore(config.location))
    return HttpDetector(config)


def build_llm(config: ProviderConfig):
    if config.kind is ProviderKind.FIXTURE:
        return FixtureLlm(FixtureStore(config.location))
    return HttpLlm(config)
