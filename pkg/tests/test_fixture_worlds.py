"""Guards that the committed fixture worlds still match their design source.

If these fail, rerun `python3 tests/make_fixtures.py` (or revert the design
change) so the committed files and the oracle expectations stay in lockstep.
"""

import json
from pathlib import Path

import numpy as np
import pytest

import make_fixtures
import worlds
from groundfuse.core import Image

FIXTURES = Path(__file__).parent / "fixtures"


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


@pytest.mark.parametrize("name,builder,records_file", [
    ("match", make_fixtures.build_match_world, "pairs.jsonl"),
    ("retrieval", make_fixtures.build_retrieval_world, "queries.jsonl"),
])
def test_committed_world_matches_design(name, builder, records_file):
    store, images, records, manifest = builder()
    root = FIXTURES / name

    assert read_jsonl(root / records_file) == records
    assert read_jsonl(root / "manifest.jsonl") == manifest
    assert read_jsonl(root / "store" / "image_embeddings.jsonl") == [
        {"image_id": k, "vector": v} for k, v in store.image_embeddings.items()]
    assert read_jsonl(root / "store" / "text_embeddings.jsonl") == [
        {"text": k, "vector": v} for k, v in store.text_embeddings.items()]
    assert read_jsonl(root / "store" / "detections.jsonl") == store.detections
    assert read_jsonl(root / "store" / "llm_replies.jsonl") == [
        {"prompt_sha256": k, "reply": v} for k, v in store.llm_replies.items()]

    ids_by_path = {row["path"]: row["image_id"] for row in manifest}
    for filename, px in images.items():
        decoded = Image.from_file(root / filename)
        assert np.array_equal(decoded.pixels, px), filename
        assert decoded.id == ids_by_path[filename]


def test_match_design_outcomes_hold():
    expected = worlds.match_expected()
    assert [r["base_hit"] for r in expected] == worlds.MATCH_EXPECTED_BASE_HITS
    assert [r["fused_hit"] for r in expected] == worlds.MATCH_EXPECTED_FUSED_HITS


def test_retrieval_design_outcomes_hold():
    manifest = read_jsonl(FIXTURES / "retrieval" / "manifest.jsonl")
    image_ids = [row["image_id"] for row in manifest]
    expected = worlds.retrieval_expected_with_ids(image_ids)
    assert [r["gold_rank_before"] for r in expected] == worlds.EXPECTED_GOLD_BEFORE
    assert [r["gold_rank_after"] for r in expected] == worlds.EXPECTED_GOLD_AFTER
