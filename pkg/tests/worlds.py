"""Hand-designed fixture worlds and their oracle-computed expected outcomes.

Two committed worlds drive the end-to-end tests:

* match world — 6 two-alternative records over 4-dim embeddings where
  grounded fusion flips exactly the two baseline-wrong decisions;
* retrieval world — 10 queries over a 20-image corpus (30-dim embeddings)
  where re-ranking lifts six mid-ranked gold images to rank 1.

The numbers here are design constants. Expected scores and ranks are
computed by the plain-arithmetic oracles in oracles.py, never by the
library under test. make_fixtures.py turns the same constants into the
JSONL/PNG files under tests/fixtures/.
"""

import json

import oracles

BOX_THRESHOLD = 0.35


def image_pixels(seed, width=16, height=16):
    """Deterministic distinct pixel pattern for a synthetic image."""
    return [[[(37 * seed + 11 * x + 7 * y + 3 * c) % 256 for c in range(3)]
             for x in range(width)]
            for y in range(height)]


# ---------------------------------------------------------------------------
# Match world (4-dim)
# ---------------------------------------------------------------------------
#
# Per record: caption, varied component, and for each side the raw global
# embedding, the detections per phrase, the masked-sub-image embedding for
# each phrase's TOP box, and the relation-mask embedding when both entities
# ground. The store also carries a text embedding for every caption and word.

_A = (1.0, 0.0, 0.0, 0.0)
_B = (0.0, 1.0, 0.0, 0.0)
_C = (0.0, 0.0, 1.0, 0.0)
_D = (0.0, 0.0, 0.0, 1.0)

MATCH_RECORDS = [
    {
        "caption": "A man is holding a sign",
        "component": "subject",
        "words": ("man", "holding", "sign"),
        "caption_vec": (1.0, 1.0, 0.0, 0.0),
        "word_vecs": {"man": _A, "holding": _D, "sign": _C},
        "pos": {"seed": 1, "global": (1.0, 1.0, 0.0, 0.0), "detections": {},
                "mask_embeddings": {}, "relation_embedding": None},
        "neg": {"seed": 2, "global": _A, "detections": {},
                "mask_embeddings": {}, "relation_embedding": None},
    },
    {
        "caption": "A dog is chasing a frisbee",
        "component": "relation",
        "words": ("dog", "chasing", "frisbee"),
        "caption_vec": (0.0, 1.0, 1.0, 0.0),
        "word_vecs": {"dog": _B, "chasing": _D, "frisbee": _C},
        "pos": {"seed": 3, "global": (0.0, 2.0, 1.0, 0.0), "detections": {},
                "mask_embeddings": {}, "relation_embedding": None},
        "neg": {"seed": 4, "global": (1.0, 0.0, 1.0, 0.0), "detections": {},
                "mask_embeddings": {}, "relation_embedding": None},
    },
    {
        # Baseline-wrong; positive grounds perfectly on all three terms -> flip.
        "caption": "A woman is riding a horse",
        "component": "object",
        "words": ("woman", "riding", "horse"),
        "caption_vec": (0.0, 1.0, 1.0, 1.0),
        "word_vecs": {"woman": _B, "riding": _D, "horse": _C},
        "pos": {
            "seed": 5,
            "global": _A,
            "detections": {"woman": [(1, 1, 6, 6, 0.9), (0, 0, 3, 3, 0.5)],
                           "horse": [(8, 8, 6, 6, 0.8), (0, 0, 2, 2, 0.2)]},
            "mask_embeddings": {"woman": _B, "horse": _C},
            "relation_embedding": _D,
        },
        "neg": {"seed": 6, "global": (1.0, 0.5, 0.0, 0.0), "detections": {},
                "mask_embeddings": {}, "relation_embedding": None},
    },
    {
        # Baseline-wrong; relation term scores exactly zero, negative grounds
        # one entity with weight zero -> flip driven by the entity terms.
        "caption": "A cat is watching a bird",
        "component": "subject",
        "words": ("cat", "watching", "bird"),
        "caption_vec": (0.0, 1.0, 1.0, 0.0),
        "word_vecs": {"cat": _B, "watching": _D, "bird": _C},
        "pos": {
            "seed": 7,
            "global": _A,
            "detections": {"cat": [(1, 1, 5, 5, 0.9)], "bird": [(9, 9, 5, 5, 0.8)]},
            "mask_embeddings": {"cat": _B, "bird": _C},
            "relation_embedding": _A,
        },
        "neg": {
            "seed": 8,
            "global": (1.0, 0.4, 0.4, 0.0),
            "detections": {"cat": [(0, 0, 4, 4, 0.7)]},
            "mask_embeddings": {"cat": _A},
            "relation_embedding": None,
        },
    },
    {
        # Baseline-right and fully grounded: fusion boosts without flipping.
        "caption": "A boy is kicking a balloon",
        "component": "relation",
        "words": ("boy", "kicking", "balloon"),
        "caption_vec": (1.0, 1.0, 1.0, 1.0),
        "word_vecs": {"boy": _B, "kicking": _D, "balloon": _C},
        "pos": {
            "seed": 9,
            "global": (1.0, 1.0, 0.0, 0.0),
            "detections": {"boy": [(2, 2, 4, 4, 0.9)], "balloon": [(10, 10, 4, 4, 0.8)]},
            "mask_embeddings": {"boy": _B, "balloon": _C},
            "relation_embedding": _D,
        },
        "neg": {"seed": 10, "global": _A, "detections": {},
                "mask_embeddings": {}, "relation_embedding": None},
    },
    {
        # Baseline-right; the only detection sits below threshold and must
        # be filtered, so both sides stay at baseline.
        "caption": "A girl is reading a book",
        "component": "object",
        "words": ("girl", "reading", "book"),
        "caption_vec": (1.0, 0.0, 1.0, 0.0),
        "word_vecs": {"girl": _B, "reading": _D, "book": _C},
        "pos": {"seed": 11, "global": (1.0, 0.0, 1.0, 0.0), "detections": {},
                "mask_embeddings": {}, "relation_embedding": None},
        "neg": {
            "seed": 12,
            "global": (1.0, 1.0, 0.0, 0.0),
            "detections": {"girl": [(0, 0, 3, 3, 0.2)]},
            "mask_embeddings": {},
            "relation_embedding": None,
        },
    },
]


def top_box(detections, phrase):
    """Best above-threshold box for a phrase, matching detector ordering."""
    boxes = [b for b in detections.get(phrase, []) if b[4] >= BOX_THRESHOLD]
    if not boxes:
        return None
    boxes.sort(key=lambda b: (-b[4], b[:4]))
    return boxes[0][:4]


def _match_side_terms(record, side):
    """Oracle fusion terms (sub_vec, text_vec) for one side of a record."""
    subject, _, obj = record["words"]
    grounded = {}
    for phrase in (subject, obj):
        if top_box(side["detections"], phrase) is not None:
            grounded[phrase] = (side["mask_embeddings"][phrase],
                                record["word_vecs"][phrase])
    terms = [grounded[p] for p in (subject, obj) if p in grounded]
    if len(grounded) == 2 and side["relation_embedding"] is not None:
        predicate = record["words"][1]
        terms.append((side["relation_embedding"], record["word_vecs"][predicate]))
    elif len(grounded) < 2:
        # entity terms only, in phrase sort order (the general fusion path)
        terms = [grounded[p] for p in sorted(grounded)]
    return terms


def match_expected():
    """Oracle base/fused scores and decisions per match record."""
    rows = []
    for record in MATCH_RECORDS:
        row = {}
        for side_name in ("pos", "neg"):
            side = record[side_name]
            base, fused = oracles.pair_score(
                list(side["global"]), list(record["caption_vec"]),
                [(list(e), list(t)) for e, t in _match_side_terms(record, side)])
            row[f"base_{side_name}"] = base
            row[f"fused_{side_name}"] = fused
        row["base_hit"] = row["base_pos"] > row["base_neg"]
        row["fused_hit"] = row["fused_pos"] > row["fused_neg"]
        rows.append(row)
    return rows


MATCH_EXPECTED_BASE_HITS = [True, True, False, False, True, True]
MATCH_EXPECTED_FUSED_HITS = [True] * 6
MATCH_EXPECTED_FLIPS = 2


# ---------------------------------------------------------------------------
# Retrieval world (30-dim: 10 query axes + 20 private image axes)
# ---------------------------------------------------------------------------
#
# Image i's embedding is c[i][q] on each query axis q plus a private-axis
# remainder that makes it exactly unit norm, so the baseline cosine of image
# i for query q IS c[i][q]. Gold images ground every entity phrase with
# weight 1 on the query axis, lifting their fused score to ~0.96.

RETRIEVAL_DIM = 30
N_QUERIES = 10
N_IMAGES = 20  # images 0..9 are golds, 10..19 are the paired distractors

GOLD_BASE_SCORES = [0.32, 0.32, 0.26, 0.26, 0.26, 0.26, 0.26, 0.26, 0.14, 0.035]
DISTRACTOR_SCORE = 0.30
FILLER_SCORES = [0.24, 0.22, 0.20, 0.18, 0.16, 0.12, 0.10, 0.08, 0.04]

RETRIEVAL_QUERIES = [
    {"caption": "A pilot is flying a kite", "kind": "svo",
     "words": ("pilot", "flying", "kite")},
    {"caption": "A clown is juggling a pin", "kind": "svo",
     "words": ("clown", "juggling", "pin")},
    {"caption": "A farmer is driving a tractor", "kind": "svo",
     "words": ("farmer", "driving", "tractor")},
    {"caption": "A chef is slicing a melon", "kind": "svo",
     "words": ("chef", "slicing", "melon")},
    {"caption": "A diver is feeding a turtle", "kind": "svo",
     "words": ("diver", "feeding", "turtle")},
    {"caption": "Two swimmers race across the cold lake at dawn", "kind": "llm",
     "objects": [("swimmers", None), ("lake", "cold"), ("dawn", None)],
     "phrases": ["swimmers", "cold lake", "dawn"],
     "relation": ("swimmers", "race across", "lake")},
    {"caption": "A striped umbrella shades the wooden bench in the park", "kind": "llm",
     "objects": [("umbrella", "striped"), ("bench", "wooden"), ("park", None)],
     "phrases": ["striped umbrella", "wooden bench", "park"],
     "relation": ("umbrella", "shades", "bench")},
    {"caption": "An orange tent stands between the tall pines near the river", "kind": "llm",
     "objects": [("tent", "orange"), ("pines", "tall"), ("river", None)],
     "phrases": ["orange tent", "tall pines", "river"],
     "relation": ("tent", "stands between", "pines")},
    {"caption": "Fresh bread cools on the metal rack beside the oven", "kind": "llm",
     "objects": [("bread", "fresh"), ("rack", "metal"), ("oven", None)],
     "phrases": ["fresh bread", "metal rack", "oven"],
     "relation": ("bread", "cools on", "rack")},
    {"caption": "A guard is opening a gate", "kind": "svo",
     "words": ("guard", "opening", "gate")},
]

# Queries whose gold image carries detections (everything they need to fuse
# to the top). Query 8 has no detections anywhere; query 9's gold falls
# outside the baseline top-10 and cannot be recovered.
GROUNDED_QUERIES = list(range(8))

SVO_BOXES = {"subject": (1, 1, 6, 6), "object": (8, 8, 6, 6)}
LLM_BOXES = [(1, 1, 5, 5), (6, 6, 5, 5), (11, 11, 4, 4)]

RETRIEVAL_IMAGE_SEEDS = [100 + i for i in range(N_IMAGES)]


def query_phrases(query):
    if query["kind"] == "svo":
        subject, _, obj = query["words"]
        return [subject, obj]
    return list(query["phrases"])


def retrieval_c_matrix():
    """Baseline cosine of every image for every query (N_IMAGES x N_QUERIES)."""
    c = [[0.0] * N_QUERIES for _ in range(N_IMAGES)]
    for q in range(N_QUERIES):
        c[q][q] = GOLD_BASE_SCORES[q]
        c[10 + q][q] = DISTRACTOR_SCORE
        pool = [i for i in range(N_IMAGES) if i not in (q, 10 + q)]
        for j, score in enumerate(FILLER_SCORES):
            c[pool[(2 * q + j) % len(pool)]][q] = score
    return c


def retrieval_image_vectors():
    """Unit-norm raw embeddings for the whole corpus."""
    c = retrieval_c_matrix()
    vectors = []
    for i in range(N_IMAGES):
        row = c[i]
        used = sum(x * x for x in row)
        assert used < 1.0, f"image {i} overcommitted: {used}"
        vec = [0.0] * RETRIEVAL_DIM
        vec[:N_QUERIES] = row
        vec[N_QUERIES + i] = (1.0 - used) ** 0.5
        vectors.append(vec)
    return vectors


def axis(q):
    vec = [0.0] * RETRIEVAL_DIM
    vec[q] = 1.0
    return vec


def private_axis(i):
    vec = [0.0] * RETRIEVAL_DIM
    vec[N_QUERIES + i] = 1.0
    return vec


def retrieval_detections():
    """Per gold image: {phrase: [(x, y, w, h, conf), ...]}, plus one
    deliberately useless grounding on distractor 10 (weight zero)."""
    per_image = {}
    for q in GROUNDED_QUERIES:
        query = RETRIEVAL_QUERIES[q]
        dets = {}
        if query["kind"] == "svo":
            subject, _, obj = query["words"]
            dets[subject] = [SVO_BOXES["subject"] + (0.9,)]
            dets[obj] = [SVO_BOXES["object"] + (0.8,)]
            if q == 2:  # two candidates: top-1 selection must pick the 0.9 box
                dets[subject].append((2, 2, 6, 6, 0.6))
            if q == 3:  # below-threshold extra must be filtered out
                dets[obj].append((0, 0, 2, 2, 0.2))
        else:
            for phrase, box in zip(query["phrases"], LLM_BOXES):
                dets[phrase] = [box + (0.85,)]
        per_image[q] = dets
    # distractor 10 grounds "pilot" onto its private axis: weight is exactly 0
    per_image[10] = {"pilot": [((2, 2, 5, 5) + (0.8,))]}
    return per_image


def retrieval_stage1_reply(query):
    """Canonical stage-1 JSON reply for an LLM-decomposed query."""
    subject, predicate, obj = query["relation"]
    return json.dumps({
        "objects": [{"name": n, "attribute": a} for n, a in query["objects"]],
        "relations": [{"subject": subject, "predicate": predicate, "object": obj}],
    })


def retrieval_stage2_reply(query):
    subject, predicate, obj = query["relation"]
    return json.dumps({
        "phrases": list(query["phrases"]),
        "relations": [{"subject": subject, "predicate": predicate, "object": obj}],
    })


def retrieval_expected_with_ids(image_ids, topk=10):
    """Oracle simulation of baseline ranking and fused re-ranking.

    `image_ids` (ordered like RETRIEVAL_IMAGE_SEEDS) supplies the ranking
    tie-break key and the vocabulary the report speaks in.
    """
    c = retrieval_c_matrix()
    detections = retrieval_detections()
    rows = []
    for q, query in enumerate(RETRIEVAL_QUERIES):
        scored = sorted(((c[i][q], image_ids[i], i) for i in range(N_IMAGES)),
                        key=lambda t: (-t[0], t[1]))
        baseline = scored[:topk]
        fused = []
        for score, image_id, i in baseline:
            dets = detections.get(i, {})
            terms = 0
            for phrase in query_phrases(query):
                if any(b[4] >= BOX_THRESHOLD for b in dets.get(phrase, [])):
                    terms += 1
            relation_term = (query["kind"] == "svo" and terms == 2)
            k_terms = terms + (1 if relation_term else 0)
            if i == 10 and q == 0:
                k_terms = 0  # its single grounded term has weight exactly 0
            if k_terms:
                # every grounded term contributes 1.0 * axis(q)
                vec = [0.0] * RETRIEVAL_DIM
                vec[:N_QUERIES] = c[i]
                vec[N_QUERIES + i] = (1.0 - sum(x * x for x in c[i])) ** 0.5
                vec[q] += float(k_terms)
                fused_score = oracles.cosine(vec, axis(q))
            else:
                fused_score = score
            fused.append((fused_score, image_id))
        fused.sort(key=lambda t: (-t[0], t[1]))
        gold_id = image_ids[q]
        before = next((pos for pos, (_, iid, _) in enumerate(baseline, 1)
                       if iid == gold_id), None)
        after = next((pos for pos, (_, iid) in enumerate(fused, 1)
                      if iid == gold_id), None)
        rows.append({
            "baseline_ids": [iid for _, iid, _ in baseline],
            "reranked_ids": [iid for _, iid in fused],
            "gold_rank_before": before,
            "gold_rank_after": after,
        })
    return rows


EXPECTED_GOLD_BEFORE = [1, 1, 2, 2, 2, 2, 2, 2, 7, None]
EXPECTED_GOLD_AFTER = [1, 1, 1, 1, 1, 1, 1, 1, 7, None]


def counting_recall(ranks, k):
    return 100.0 * sum(1 for r in ranks if r is not None and r <= k) / len(ranks)
