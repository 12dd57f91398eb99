"""HTTP shim exposing vision-language models behind the groundfuse wire protocol."""

from .adapters import (
    ClipEmbedder,
    PassthroughLlm,
    StubDetector,
    StubEmbedder,
    StubLlm,
    ZeroShotDetector,
    build_adapters,
)
from .config import ShimConfig
from .server import create_app, serve

__version__ = "0.1.0"
