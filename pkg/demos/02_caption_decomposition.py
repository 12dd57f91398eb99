#!/usr/bin/env python3
"""Decompose captions two ways: the rule-based subject-verb-object parser
for templated captions, and two-stage LLM prompting for free-form ones.

Run from the repository root:

    python3 demos/02_caption_decomposition.py
"""

import json

from groundfuse import DecompositionPolicy, decompose, parse_svo
from groundfuse.prompts import PromptTemplates

# ---------------------------------------------------------------------------
# 1. Templated captions parse without any model in the loop.
# ---------------------------------------------------------------------------

for caption in ("A man is holding a sign", "A woman is riding a horse"):
    d = parse_svo(caption)
    print(caption)
    print("  entities :", [e.phrase for e in d.entities])
    print("  relation :", d.relations[0].to_dict())
print()

# ---------------------------------------------------------------------------
# 2. Free-form captions go through two LLM stages. Stage 1 extracts objects,
#    attributes, and relations as strict JSON; stage 2 merges attributes into
#    short groundable phrases. Here a tiny scripted provider stands in for
#    the real model so the demo runs offline.
# ---------------------------------------------------------------------------

caption = "A gray dog plays in the sand at the ocean"

stage1_reply = json.dumps({
    "objects": [{"name": "dog", "attribute": "gray"},
                {"name": "sand", "attribute": None},
                {"name": "ocean", "attribute": None}],
    "relations": [{"subject": "dog", "predicate": "plays in", "object": "sand"}],
})
stage2_reply = json.dumps({
    "phrases": ["gray dog", "sand", "ocean"],
    "relations": [{"subject": "dog", "predicate": "plays in", "object": "sand"}],
})


class DemoLlm:
    def __init__(self, replies):
        self.replies = list(replies)

    def complete(self, prompt):
        print(f"  -> prompt of {len(prompt)} chars sent to the provider")
        return self.replies.pop(0)


templates = PromptTemplates()
print("stage-1 prompt begins:")
print("  " + templates.render_stage1(caption).splitlines()[0])
print()

print(caption)
d = decompose(caption, DemoLlm([stage1_reply, stage2_reply]),
              DecompositionPolicy.LLM_ONLY)
print("  source   :", d.source.value)
print("  phrases  :", [e.phrase for e in d.entities])
print("  relations:", [r.to_dict() for r in d.relations])
print()

# ---------------------------------------------------------------------------
# 3. Policies: rule_first falls back to the LLM when the template misses;
#    llm_first falls back to the parser when the provider misbehaves.
# ---------------------------------------------------------------------------

broken = DemoLlm(["this is not json", "still not json", "nope"])
d = decompose("A man is holding a sign", broken, DecompositionPolicy.LLM_FIRST)
print("llm_first with a broken provider on a templated caption:")
print("  source:", d.source.value)
print("  still a valid triplet:", d.relations[0].to_dict())
