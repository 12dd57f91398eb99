"""Command-line entry point: `groundfuse-shim` or `python -m groundfuse_shim`."""

import argparse
import logging

from .config import ShimConfig
from .server import serve


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="groundfuse-shim",
        description="Serve embedding/detection/LLM models over the groundfuse wire protocol")
    parser.add_argument("--embedder", default=ShimConfig.embedder,
                        help="CLIP-family checkpoint, or stub-embedder-<dim>")
    parser.add_argument("--detector", default=ShimConfig.detector,
                        help="zero-shot detector checkpoint, or stub-detector")
    parser.add_argument("--llm-endpoint", default=None,
                        help="OpenAI-style chat completions URL to forward prompts to")
    parser.add_argument("--llm-key", default=None)
    parser.add_argument("--llm-model", default=ShimConfig.llm_model)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8900)
    parser.add_argument("--box-threshold", type=float, default=0.35)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO)
    serve(ShimConfig(
        embedder=args.embedder,
        detector=args.detector,
        llm_endpoint=args.llm_endpoint,
        llm_api_key=args.llm_key,
        llm_model=args.llm_model,
        host=args.host,
        port=args.port,
        box_threshold=args.box_threshold,
    ))


if __name__ == "__main__":
    main()
