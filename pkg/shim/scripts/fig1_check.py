#!/usr/bin/env python3
"""Non-gating real-model check: score a positive/negative image pair for the
caption "A man is holding a sign" through a live shim and compare the fused
scores against the reference values 0.2259 / 0.2151 (tolerance +/- 0.02).

This needs real checkpoints (a ViT-L/14-class embedder plus an open-vocab
detector) and the original image pair, neither of which ships with the
repository, so the script is informational: it prints the scores, whether
each lands inside the tolerance band, and whether the positive image wins.
Model-version drift moves the absolute numbers; the decision should hold.

Usage:
    groundfuse-shim --embedder openai/clip-vit-large-patch14 \
        --detector IDEA-Research/grounding-dino-tiny --port 8900 &
    python3 shim/scripts/fig1_check.py --shim http://127.0.0.1:8900 \
        --positive pos.jpg --negative neg.jpg
"""

import argparse
import sys

EXPECTED_POS = 0.2259
EXPECTED_NEG = 0.2151
TOLERANCE = 0.02
CAPTION = "A man is holding a sign"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--shim", required=True, help="base URL of a running shim")
    parser.add_argument("--positive", required=True, help="image matching the caption")
    parser.add_argument("--negative", required=True, help="distractor image")
    parser.add_argument("--caption", default=CAPTION)
    args = parser.parse_args()

    from groundfuse import Image, Providers, score_pair
    from groundfuse.backends import ProviderConfig, build_detector, build_embedder

    config = ProviderConfig.parse(f"http:{args.shim}", timeout_ms=120_000)
    providers = Providers(embedder=build_embedder(config),
                          detector=build_detector(config))

    scores = {}
    for side, path in (("positive", args.positive), ("negative", args.negative)):
        pair = score_pair(Image.from_file(path), args.caption, providers)
        scores[side] = pair
        print(f"{side}: base={pair.base_similarity:.4f} fused={pair.fused_similarity:.4f} "
              f"entities={[e.phrase for e in pair.entities]}")

    pos, neg = scores["positive"].fused_similarity, scores["negative"].fused_similarity
    in_band = (abs(pos - EXPECTED_POS) <= TOLERANCE
               and abs(neg - EXPECTED_NEG) <= TOLERANCE)
    decision = pos > neg
    print(f"\nreference band (+/-{TOLERANCE}): pos~{EXPECTED_POS} neg~{EXPECTED_NEG}")
    print(f"within band: {in_band}   positive wins: {decision}")
    if not decision:
        print("decision NOT preserved — investigate detector/embedder checkpoints")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
