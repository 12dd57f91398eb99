"""Model adapters behind the shim endpoints.

Each endpoint family has a stub (deterministic, dependency-free, for offline
tests) and a real implementation loaded lazily from transformers. Checkpoint
names beginning with "stub" pick the stub family:

    stub-embedder-<dim>   hash-seeded unit embeddings of the given dim
    stub-detector         one centered box per phrase at confidence 0.9
    (llm stub is used whenever no llm endpoint is configured)

Real adapters raise at construction when their checkpoint cannot be loaded,
which the server turns into a startup failure.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .config import STUB_PREFIX, ShimConfig


def _seed_from_bytes(data: bytes) -> int:
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "big")


class StubEmbedder:
    """Deterministic unit vectors seeded by the exact input bytes."""

    def __init__(self, dim: int = 16):
        self.dim = dim

    def _vector(self, data: bytes) -> list[float]:
        rng = np.random.default_rng(_seed_from_bytes(data))
        vec = rng.normal(size=self.dim)
        vec /= np.linalg.norm(vec)
        return [float(x) for x in vec]

    def embed_image(self, pixels: np.ndarray) -> list[float]:
        return self._vector(np.ascontiguousarray(pixels).tobytes())

    def embed_text(self, text: str) -> list[float]:
        return self._vector(text.encode("utf-8"))


class StubDetector:
    """One centered box covering the middle half of the frame, conf 0.9."""

    def detect(self, pixels: np.ndarray, phrase: str, threshold: float) -> list[dict]:
        confidence = 0.9
        if confidence < threshold:
            return []
        h, w = pixels.shape[:2]
        return [{"x": w // 4, "y": h // 4, "w": max(w // 2, 1), "h": max(h // 2, 1),
                 "confidence": confidence}]


class StubLlm:
    """Echoes a canned reply keyed by the prompt digest."""

    def complete(self, prompt: str) -> str:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]
        return json.dumps({"stub_reply_for": digest})


class ClipEmbedder:
    """CLIP-family embedder via transformers; embeddings are L2-normalized."""

    def __init__(self, checkpoint: str):
        import torch
        from transformers import CLIPModel, CLIPProcessor

        self._torch = torch
        self.model = CLIPModel.from_pretrained(checkpoint)
        self.model.eval()
        self.processor = CLIPProcessor.from_pretrained(checkpoint)

    def _normalized(self, features) -> list[float]:
        vec = features[0] / features[0].norm()
        return [float(x) for x in vec.tolist()]

    def embed_image(self, pixels: np.ndarray) -> list[float]:
        from PIL import Image as PILImage

        with self._torch.no_grad():
            inputs = self.processor(images=PILImage.fromarray(pixels), return_tensors="pt")
            return self._normalized(self.model.get_image_features(**inputs))

    def embed_text(self, text: str) -> list[float]:
        with self._torch.no_grad():
            inputs = self.processor(text=[text], return_tensors="pt",
                                    padding=True, truncation=True)
            return self._normalized(self.model.get_text_features(**inputs))


class ZeroShotDetector:
    """Open-vocabulary detector via the transformers zero-shot pipeline.

    Box coordinates are returned in the pixel space of the sent image.
    """

    def __init__(self, checkpoint: str):
        from transformers import pipeline

        self.pipe = pipeline("zero-shot-object-detection", model=checkpoint)

    def detect(self, pixels: np.ndarray, phrase: str, threshold: float) -> list[dict]:
        from PIL import Image as PILImage

        results = self.pipe(PILImage.fromarray(pixels), candidate_labels=[phrase],
                            threshold=threshold)
        out = []
        for r in results:
            box = r["box"]
            out.append({
                "x": float(box["xmin"]),
                "y": float(box["ymin"]),
                "w": float(box["xmax"] - box["xmin"]),
                "h": float(box["ymax"] - box["ymin"]),
                "confidence": float(r["score"]),
            })
        return out


class PassthroughLlm:
    """Forwards prompts verbatim to an OpenAI-style chat completions endpoint."""

    def __init__(self, endpoint: str, api_key: str | None, model: str,
                 timeout_s: float = 60.0):
        import requests

        self._requests = requests
        self.endpoint = endpoint
        self.api_key = api_key
        self.model = model
        self.timeout_s = timeout_s

    def complete(self, prompt: str) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        resp = self._requests.post(
            self.endpoint,
            json={"model": self.model,
                  "messages": [{"role": "user", "content": prompt}]},
            headers=headers, timeout=self.timeout_s)
        resp.raise_for_status()
        return resp.json()["choices"][0]["message"]["content"]


def build_adapters(config: ShimConfig) -> dict:
    """Construct the adapter bundle; raises when a real checkpoint won't load."""
    if config.embedder.startswith(STUB_PREFIX):
        dim = int(config.embedder.rsplit("-", 1)[-1]) if config.embedder[-1].isdigit() else 16
        embedder = StubEmbedder(dim)
    else:
        embedder = ClipEmbedder(config.embedder)
    if config.detector.startswith(STUB_PREFIX):
        detector = StubDetector()
    else:
        detector = ZeroShotDetector(config.detector)
    if config.llm_endpoint:
        llm = PassthroughLlm(config.llm_endpoint, config.llm_api_key, config.llm_model)
    else:
        llm = StubLlm()
    return {"embedder": embedder, "detector": detector, "llm": llm}
