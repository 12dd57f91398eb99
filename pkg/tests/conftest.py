"""Shared test helpers: tiny images and on-disk fixture stores."""

import json

import numpy as np
import pytest

from groundfuse.backends import FixtureStore
from groundfuse.core import Image


def solid_image(width=4, height=4, color=(255, 255, 255)):
    px = np.zeros((height, width, 3), dtype=np.uint8)
    px[:, :] = color
    return Image(px)


def gradient_image(width=8, height=8, seed=0):
    """Deterministic non-uniform pixels so every box region differs."""
    rng = np.random.default_rng(seed)
    return Image(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


def write_store(directory, image_embeddings=None, text_embeddings=None,
                detections=None, llm_replies=None):
    """Write JSONL fixture files into `directory` and return it.

    detections: list of (image_id, phrase, [(x, y, w, h, confidence), ...]).
    """
    directory.mkdir(parents=True, exist_ok=True)
    if image_embeddings:
        lines = [json.dumps({"image_id": k, "vector": list(v)})
                 for k, v in image_embeddings.items()]
        (directory / "image_embeddings.jsonl").write_text("\n".join(lines) + "\n")
    if text_embeddings:
        lines = [json.dumps({"text": k, "vector": list(v)})
                 for k, v in text_embeddings.items()]
        (directory / "text_embeddings.jsonl").write_text("\n".join(lines) + "\n")
    if detections:
        lines = []
        for image_id, phrase, boxes in detections:
            lines.append(json.dumps({
                "image_id": image_id,
                "phrase": phrase,
                "boxes": [{"x": x, "y": y, "w": w, "h": h, "confidence": c}
                          for x, y, w, h, c in boxes],
            }))
        (directory / "detections.jsonl").write_text("\n".join(lines) + "\n")
    if llm_replies:
        lines = [json.dumps({"prompt_sha256": k, "reply": v})
                 for k, v in llm_replies.items()]
        (directory / "llm_replies.jsonl").write_text("\n".join(lines) + "\n")
    return directory


def load_store(directory, **kwargs):
    return FixtureStore(write_store(directory, **kwargs))


class ScriptedLlm:
    """Returns canned replies in order (last one repeats), recording prompts."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.prompts = []

    def complete(self, prompt):
        self.prompts.append(prompt)
        if not self.replies:
            raise AssertionError("ScriptedLlm ran out of replies")
        reply = self.replies[0]
        if len(self.replies) > 1:
            self.replies.pop(0)
        return reply


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
