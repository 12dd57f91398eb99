"""FastAPI app serving the groundfuse wire protocol.

All endpoints are POST with JSON bodies; errors come back as non-2xx with
``{"error": str}`` (400 for malformed requests, 500 for inference failures).
GET /v1/info reports the configured checkpoints for provenance. Model access
is serialized with a lock: single-model runtimes are not reentrant and the
wire contract makes no latency promises.
"""

from __future__ import annotations

import base64
import binascii
import logging
import threading
from io import BytesIO

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .adapters import build_adapters
from .config import ShimConfig

log = logging.getLogger(__name__)


class BadRequest(Exception):
    pass


def _decode_image(body: dict) -> np.ndarray:
    raw = body.get("image_png_b64")
    if not isinstance(raw, str) or not raw:
        raise BadRequest("body needs a base64 'image_png_b64' string")
    try:
        data = base64.b64decode(raw, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise BadRequest(f"image_png_b64 is not valid base64: {exc}") from exc
    try:
        from PIL import Image as PILImage

        with PILImage.open(BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"))
    except Exception as exc:
        raise BadRequest(f"cannot decode image: {exc}") from exc


def _require_str(body: dict, key: str) -> str:
    value = body.get(key)
    if not isinstance(value, str) or not value:
        raise BadRequest(f"body needs a nonempty '{key}' string")
    return value


def create_app(config: ShimConfig, adapters: dict | None = None) -> FastAPI:
    adapters = adapters or build_adapters(config)
    embedder, detector, llm = adapters["embedder"], adapters["detector"], adapters["llm"]
    app = FastAPI(title="groundfuse-shim", docs_url=None, redoc_url=None)
    model_lock = threading.Lock()

    async def read_body(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception as exc:
            raise BadRequest(f"body is not JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise BadRequest("body must be a JSON object")
        return body

    @app.exception_handler(BadRequest)
    async def bad_request_handler(request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def inference_failure_handler(request, exc):
        log.exception("inference failure on %s", request.url.path)
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/v1/info")
    async def info():
        return config.info()

    @app.post("/v1/embed/image")
    async def embed_image(request: Request):
        pixels = _decode_image(await read_body(request))
        with model_lock:
            return {"vector": embedder.embed_image(pixels)}

    @app.post("/v1/embed/text")
    async def embed_text(request: Request):
        text = _require_str(await read_body(request), "text")
        with model_lock:
            return {"vector": embedder.embed_text(text)}

    @app.post("/v1/detect")
    async def detect(request: Request):
        body = await read_body(request)
        pixels = _decode_image(body)
        phrase = _require_str(body, "phrase")
        threshold = body.get("box_threshold", config.box_threshold)
        if not isinstance(threshold, (int, float)) or not 0.0 <= threshold <= 1.0:
            raise BadRequest(f"box_threshold must be a number in [0, 1], got {threshold!r}")
        with model_lock:
            detections = detector.detect(pixels, phrase, float(threshold))
        return {"detections": detections}

    @app.post("/v1/complete")
    async def complete(request: Request):
        prompt = _require_str(await read_body(request), "prompt")
        with model_lock:
            return {"text": llm.complete(prompt)}

    return app


def serve(config: ShimConfig) -> None:
    """Load the configured checkpoints and serve until interrupted."""
    import uvicorn

    app = create_app(config)  # fails fast when checkpoints are missing
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
