#!/usr/bin/env python3
"""Run the two-alternative matching benchmark on the committed fixture world
and show where grounded fusion flips baseline decisions.

Each record pairs a caption with a positive and a negative image; a record
counts as correct when the positive image scores strictly higher. The world
under tests/fixtures/match is built so plain global-embedding scoring gets
4 of 6 right and fusion fixes exactly the two failures.

Run from the repository root:

    python3 demos/04_matching_benchmark.py

The CLI equivalent (same fixtures, JSON report plus the same table):

    groundfuse match --pairs tests/fixtures/match/pairs.jsonl \\
        --images tests/fixtures/match/manifest.jsonl \\
        --backend-embed fixture:tests/fixtures/match/store \\
        --backend-detect fixture:tests/fixtures/match/store \\
        --out match_report.json
"""

import json
from pathlib import Path

from groundfuse import (
    FixtureDetector,
    FixtureEmbedder,
    FixtureStore,
    Image,
    MatchOutcome,
    MatchRecord,
    Providers,
    VariedComponent,
    matching_accuracy,
    score_pair,
)
from groundfuse.decompose import decompose

ROOT = Path(__file__).parent.parent
WORLD = ROOT / "tests" / "fixtures" / "match"

store = FixtureStore(WORLD / "store")
providers = Providers(embedder=FixtureEmbedder(store), detector=FixtureDetector(store))

manifest = {row["image_id"]: WORLD / row["path"]
            for row in map(json.loads, (WORLD / "manifest.jsonl").read_text().splitlines())}
records = [json.loads(line) for line in (WORLD / "pairs.jsonl").read_text().splitlines()]

base_outcomes, fused_outcomes = [], []
print(f"{'caption':<30} {'base':>11} {'fused':>11}  verdict")
print("-" * 66)
for rec in records:
    record = MatchRecord(rec["caption"], rec["positive_image_id"],
                         rec["negative_image_id"], VariedComponent(rec["component"]))
    decomp = decompose(record.caption)
    pos = score_pair(Image.from_file(manifest[record.positive_image_id]),
                     record.caption, providers, decomposition=decomp)
    neg = score_pair(Image.from_file(manifest[record.negative_image_id]),
                     record.caption, providers, decomposition=decomp)
    base_outcomes.append(MatchOutcome(record, pos.base_similarity, neg.base_similarity))
    fused_outcomes.append(MatchOutcome(record, pos.fused_similarity, neg.fused_similarity))
    base_hit, fused_hit = base_outcomes[-1].hit, fused_outcomes[-1].hit
    verdict = "flipped!" if base_hit != fused_hit else ""
    print(f"{record.caption:<30} {'hit' if base_hit else 'MISS':>11} "
          f"{'hit' if fused_hit else 'MISS':>11}  {verdict}")

print()
base = matching_accuracy(base_outcomes)
fused = matching_accuracy(fused_outcomes)
print(f"{'':<10} {'Sub':>7} {'Rel':>7} {'Obj':>7} {'Total':>7}")
for label, report in (("baseline", base), ("fused", fused)):
    cells = [report.per_component.get(c, float('nan'))
             for c in ("subject", "relation", "object")]
    print(f"{label:<10} " + " ".join(f"{c:7.2f}" for c in cells) + f" {report.total:7.2f}")
