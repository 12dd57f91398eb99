"""Benchmark protocols: two-alternative matching and top-K retrieval re-ranking.

Matching: a caption paired with a positive and a negative image; a prediction
is correct when the positive scores strictly higher. Accuracy is reported in
total and split by which component (subject/relation/object) varies.

Retrieval: a baseline ranker picks the top-K corpus images per caption; the
fused pair scorer then re-ranks those candidates. Recall@K counts queries
whose gold image lands in the final top k.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .core import Image, Similarity, cosine_similarity
from .decompose import CaptionDecomposition
from .errors import EmptyInput, GroundfuseError
from .fusion import FusionConfig, Providers, score_pair

log = logging.getLogger(__name__)


class VariedComponent(str, Enum):
    SUBJECT = "subject"
    RELATION = "relation"
    OBJECT = "object"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class MatchRecord:
    caption: str
    positive_image_id: str
    negative_image_id: str
    component: VariedComponent = VariedComponent.UNKNOWN

    def __post_init__(self):
        if self.positive_image_id == self.negative_image_id:
            raise ValueError("positive and negative image must differ")


@dataclass(frozen=True)
class MatchOutcome:
    record: MatchRecord
    pos_score: Similarity
    neg_score: Similarity

    @property
    def hit(self) -> bool:
        return match_decide(self.pos_score, self.neg_score)


def match_decide(pos_score: float, neg_score: float) -> bool:
    """True iff the positive image scores strictly higher (ties are misses)."""
    if not (math.isfinite(pos_score) and math.isfinite(neg_score)):
        raise ValueError(f"scores must be finite, got {pos_score}, {neg_score}")
    return pos_score > neg_score


@dataclass(frozen=True)
class AccuracyReport:
    total: float                      # percent
    per_component: dict[str, float]   # percent, only components that occur
    hits: int
    count: int

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "per_component": dict(self.per_component),
            "hits": self.hits,
            "count": self.count,
        }


def matching_accuracy(outcomes) -> AccuracyReport:
    """Percent correct, in total and per varied component."""
    outcomes = list(outcomes)
    if not outcomes:
        raise EmptyInput("no match outcomes")
    hits = sum(1 for o in outcomes if o.hit)
    per_component: dict[str, float] = {}
    for component in VariedComponent:
        subset = [o for o in outcomes if o.record.component is component]
        if subset:
            per_component[component.value] = 100.0 * sum(1 for o in subset if o.hit) / len(subset)
    return AccuracyReport(
        total=100.0 * hits / len(outcomes),
        per_component=per_component,
        hits=hits,
        count=len(outcomes),
    )


@dataclass(frozen=True)
class Candidate:
    """A corpus image with its current ranking score."""

    image: Image
    score: Similarity

    @property
    def image_id(self) -> str:
        return self.image.id


def baseline_topk(caption: str, corpus, k: int, embedder) -> list[Candidate]:
    """Rank the corpus by global cosine against the caption; keep the top k.

    Ties break by image id so the ranking is total and deterministic.
    """
    corpus = list(corpus)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not corpus:
        raise EmptyInput("corpus is empty")
    t_caption = embedder.embed_text(caption)
    scored = [
        Candidate(img, cosine_similarity(embedder.embed_image(img), t_caption))
        for img in corpus
    ]
    scored.sort(key=lambda c: (-c.score, c.image_id))
    return scored[:k]


def rerank(caption: str, candidates, providers: Providers,
           config: FusionConfig = FusionConfig(),
           decomposition: CaptionDecomposition | None = None,
           warnings: list | None = None) -> list[Candidate]:
    """Re-order candidates by fused pair score (descending, ties by id).

    A candidate whose fused scoring fails keeps its baseline score, with a
    warning appended to `warnings` when given; the output is always a
    permutation of the input.
    """
    candidates = list(candidates)
    if not candidates:
        raise EmptyInput("no candidates to rerank")
    rescored = []
    for cand in candidates:
        try:
            pair = score_pair(cand.image, caption, providers, config,
                              decomposition=decomposition)
            rescored.append(Candidate(cand.image, pair.fused_similarity))
        except GroundfuseError as exc:
            message = f"candidate {cand.image_id[:12]}: {exc}; keeping baseline score"
            log.warning("%s", message)
            if warnings is not None:
                warnings.append(message)
            rescored.append(cand)
    rescored.sort(key=lambda c: (-c.score, c.image_id))
    return rescored


@dataclass(frozen=True)
class RetrievalQuery:
    caption: str
    gold_image_id: str


@dataclass(frozen=True)
class RetrievalOutcome:
    query: RetrievalQuery
    baseline_ranking: tuple[tuple[str, float], ...]  # (image_id, score), best first
    reranked: tuple[tuple[str, float], ...]
    gold_rank_before: int | None  # 1-based; None when outside the candidates
    gold_rank_after: int | None

    def __post_init__(self):
        if sorted(i for i, _ in self.baseline_ranking) != sorted(i for i, _ in self.reranked):
            raise ValueError("reranked list is not a permutation of the baseline ranking")


def gold_rank(ranking, gold_image_id: str) -> int | None:
    """1-based position of the gold image in a ranking of (id, score) pairs."""
    for pos, (image_id, _) in enumerate(ranking, start=1):
        if image_id == gold_image_id:
            return pos
    return None


def recall_at_k(outcomes, ks, use: str = "after") -> dict[int, float]:
    """Percent of queries whose gold rank is <= k; absent ranks are misses."""
    outcomes = list(outcomes)
    ks = list(ks)
    if not outcomes:
        raise EmptyInput("no retrieval outcomes")
    if not ks or any(k < 1 for k in ks):
        raise ValueError(f"ks must be nonempty positive integers, got {ks}")
    attr = {"after": "gold_rank_after", "before": "gold_rank_before"}[use]
    result = {}
    for k in ks:
        found = sum(1 for o in outcomes
                    if getattr(o, attr) is not None and getattr(o, attr) <= k)
        result[k] = 100.0 * found / len(outcomes)
    return result


# ---------------------------------------------------------------------------
# Record / manifest loaders (JSONL, one object per line)
# ---------------------------------------------------------------------------


def _iter_jsonl(path: Path):
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                yield lineno, line


def load_match_records(path) -> tuple[list[MatchRecord], list[str]]:
    """Parse match records; malformed lines become error strings, not crashes."""
    records, errors = [], []
    for lineno, line in _iter_jsonl(Path(path)):
        try:
            rec = json.loads(line)
            records.append(MatchRecord(
                caption=rec["caption"],
                positive_image_id=rec["positive_image_id"],
                negative_image_id=rec["negative_image_id"],
                component=VariedComponent(rec.get("component", "unknown")),
            ))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            errors.append(f"{path}:{lineno}: {exc}")
    return records, errors


def load_retrieval_queries(path) -> tuple[list[RetrievalQuery], list[str]]:
    queries, errors = [], []
    for lineno, line in _iter_jsonl(Path(path)):
        try:
            rec = json.loads(line)
            queries.append(RetrievalQuery(caption=rec["caption"],
                                          gold_image_id=rec["gold_image_id"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            errors.append(f"{path}:{lineno}: {exc}")
    return queries, errors


def load_corpus_manifest(path) -> dict[str, Path]:
    """Map image ids to paths; relative paths resolve against the manifest."""
    path = Path(path)
    base = path.parent
    manifest: dict[str, Path] = {}
    for lineno, line in _iter_jsonl(path):
        try:
            rec = json.loads(line)
            image_id, rel = rec["image_id"], rec["path"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad manifest line: {exc}") from exc
        target = Path(rel)
        manifest[image_id] = target if target.is_absolute() else base / target
    return manifest


def load_image_checked(image_id: str, manifest: dict[str, Path]) -> Image:
    """Load an image by id and verify the pixels hash to that id."""
    try:
        path = manifest[image_id]
    except KeyError:
        raise ValueError(f"image id {image_id} is not in the manifest") from None
    image = Image.from_file(path)
    if image.id != image_id:
        raise ValueError(f"{path}: pixel hash {image.id} does not match manifest id {image_id}")
    return image
