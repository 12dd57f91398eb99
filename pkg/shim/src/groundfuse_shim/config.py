"""Shim configuration: which checkpoints to serve and where to listen."""

from __future__ import annotations

from dataclasses import dataclass

# Checkpoint names starting with this prefix select the deterministic stub
# adapters (no model downloads), e.g. "stub-embedder-16".
STUB_PREFIX = "stub"


@dataclass(frozen=True)
class ShimConfig:
    embedder: str = "openai/clip-vit-large-patch14"
    detector: str = "IDEA-Research/grounding-dino-tiny"
    llm_endpoint: str | None = None      # OpenAI-style chat completions URL
    llm_api_key: str | None = None
    llm_model: str = "gpt-3.5-turbo"
    host: str = "127.0.0.1"
    port: int = 8900
    box_threshold: float = 0.35

    def info(self) -> dict:
        """Checkpoint provenance, echoed verbatim by /v1/info."""
        llm = self.llm_endpoint or f"{STUB_PREFIX}-llm"
        if self.llm_endpoint:
            llm = f"{self.llm_endpoint} ({self.llm_model})"
        return {"embedder": self.embedder, "detector": self.detector, "llm": llm}
