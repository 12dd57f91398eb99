"""Grounded embedding fusion: per-entity scores and the adjusted image embedding.

The adjusted embedding is the global image embedding plus each grounded
sub-image embedding weighted by its cosine similarity to its own phrase
embedding. Triplet captions (two entities, one relation) additionally
contribute a relation term built from the combined subject+object mask.
The pair score is the cosine between the adjusted embedding and the
full-caption embedding.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .backends import DEFAULT_BOX_THRESHOLD
from .core import (
    ZERO_NORM_THRESHOLD,
    BoundingBox,
    EmbeddingVector,
    Image,
    Similarity,
    apply_mask,
    apply_multi_mask,
    as_embedding,
    cosine_similarity,
    l2_normalize,
    union_box,
)
from .decompose import CaptionDecomposition, DecompositionPolicy, decompose
from .errors import DimensionMismatch, GroundingEmpty, ZeroVector
from .prompts import PromptTemplates

log = logging.getLogger(__name__)


class WeightMode(str, Enum):
    RAW_COSINE = "raw_cosine"
    SOFTMAX = "softmax"  # softmax over raw dot products, for the ablation


class MissingEntityPolicy(str, Enum):
    SKIP = "skip"
    ERROR = "error"


class RelationMask(str, Enum):
    COMBINED_BOXES = "combined_boxes"        # union of the two masked sub-images
    BOUNDING_RECTANGLE = "bounding_rectangle"  # filled extreme-coordinate rectangle


@dataclass(frozen=True)
class FusionConfig:
    normalize_embeddings: bool = True
    missing_entity_policy: MissingEntityPolicy = MissingEntityPolicy.SKIP
    weight_mode: WeightMode = WeightMode.RAW_COSINE
    relation_mask: RelationMask = RelationMask.COMBINED_BOXES

    def to_dict(self) -> dict:
        return {
            "normalize_embeddings": self.normalize_embeddings,
            "missing_entity_policy": self.missing_entity_policy.value,
            "weight_mode": self.weight_mode.value,
            "relation_mask": self.relation_mask.value,
        }


@dataclass(frozen=True)
class GroundedEntity:
    """A phrase grounded to a box, with its sub-image and phrase embeddings."""

    phrase: str
    box: BoundingBox
    confidence: float
    sub_embedding: EmbeddingVector
    text_embedding: EmbeddingVector
    score: Similarity

    def to_dict(self) -> dict:
        return {
            "phrase": self.phrase,
            "box": self.box.to_dict(),
            "confidence": self.confidence,
            "score": self.score,
        }


@dataclass(frozen=True)
class PairScore:
    """Result of scoring one image against one caption."""

    caption: str
    image_id: str
    base_similarity: Similarity   # cosine of global image embedding vs caption
    fused_similarity: Similarity  # cosine of adjusted embedding vs caption
    entities: tuple[GroundedEntity, ...]
    relation_score: Similarity | None
    config: FusionConfig

    def to_dict(self) -> dict:
        # Field order is part of the serialization contract.
        return {
            "caption": self.caption,
            "image_id": self.image_id,
            "base_similarity": self.base_similarity,
            "fused_similarity": self.fused_similarity,
            "entities": [e.to_dict() for e in self.entities],
            "relation_score": self.relation_score,
            "config": self.config.to_dict(),
        }


def entity_score(sub: EmbeddingVector, text: EmbeddingVector) -> Similarity:
    """Grounding weight: cosine between a sub-image embedding and its phrase."""
    return cosine_similarity(sub, text)


def relation_embedding(image: Image, subj_box: BoundingBox, obj_box: BoundingBox,
                       embedder, mask_mode: RelationMask = RelationMask.COMBINED_BOXES
                       ) -> EmbeddingVector:
    """Embed the relation sub-image built from the subject and object boxes."""
    if mask_mode is RelationMask.BOUNDING_RECTANGLE:
        masked = apply_mask(image, union_box([subj_box, obj_box]))
    else:
        masked = apply_multi_mask(image, [subj_box, obj_box])
    return embedder.embed_image(masked)


def _softmax(xs: np.ndarray) -> np.ndarray:
    shifted = xs - np.max(xs)
    exp = np.exp(shifted)
    return exp / np.sum(exp)


def fuse_general(e_img, terms, weight_mode: WeightMode = WeightMode.RAW_COSINE
                 ) -> EmbeddingVector:
    """Adjusted embedding: e_img plus the weighted sum of term embeddings.

    ``terms`` is a list of (sub_embedding, text_embedding) pairs; each weight
    is the cosine of its pair (or, in softmax mode, the softmax over raw dot
    products). Zero-weight terms are skipped so the empty/all-zero case
    returns an exact copy of e_img. Summation follows list order.
    """
    e_img = as_embedding(e_img)
    pairs = [(as_embedding(e), as_embedding(t)) for e, t in terms]
    for e, t in pairs:
        if e.shape[0] != e_img.shape[0] or t.shape[0] != e_img.shape[0]:
            raise DimensionMismatch(
                f"term dims ({e.shape[0]}, {t.shape[0]}) != image dim {e_img.shape[0]}")
        for v in (e, t):
            if float(np.linalg.norm(v)) < ZERO_NORM_THRESHOLD:
                raise ZeroVector("fusion term has near-zero norm")
    if not pairs:
        out = e_img.copy()
        out.setflags(write=False)
        return out

    if weight_mode is WeightMode.SOFTMAX:
        dots = np.array([float(np.dot(e, t)) for e, t in pairs])
        weights = _softmax(dots)
    else:
        weights = [entity_score(e, t) for e, t in pairs]

    acc = e_img.copy()
    for (e, _), s in zip(pairs, weights):
        s = float(s)
        if s == 0.0:
            continue
        acc += s * e
    acc.setflags(write=False)
    return acc


def fuse_triplet(e_img, e_subj, e_obj, e_rel, t_subj, t_obj, t_rel) -> EmbeddingVector:
    """Adjusted embedding for a subject-relation-object caption.

    e_img + s_obj*e_obj + s_subj*e_subj + s_rel*e_rel, with each weight the
    cosine of the sub-image embedding against its own word embedding.
    """
    return fuse_general(e_img, [(e_subj, t_subj), (e_obj, t_obj), (e_rel, t_rel)])


@dataclass(frozen=True)
class Providers:
    """The provider bundle score_pair needs (LLM optional)."""

    embedder: object
    detector: object
    llm: object = None
    box_threshold: float = DEFAULT_BOX_THRESHOLD


def _is_triplet(decomp: CaptionDecomposition) -> bool:
    if len(decomp.entities) != 2 or len(decomp.relations) != 1:
        return False
    rel = decomp.relations[0]
    return decomp.entity_index(rel.subject) != decomp.entity_index(rel.object)


def score_pair(image: Image, caption: str, providers: Providers,
               config: FusionConfig = FusionConfig(),
               policy: DecompositionPolicy = DecompositionPolicy.RULE_FIRST,
               templates: PromptTemplates | None = None,
               decomposition: CaptionDecomposition | None = None) -> PairScore:
    """Score one image/caption pair end to end.

    Decompose the caption (or reuse a precomputed decomposition), ground each
    entity phrase with the detector (top detection above threshold), embed
    the masked sub-images and phrases, add the relation term for triplet
    captions, fuse, and compare against the full-caption embedding. Entities
    with no detections are skipped under the skip policy (their term
    vanishes); under the error policy they raise GroundingEmpty.
    """
    decomp = decomposition or decompose(caption, providers.llm, policy, templates)

    def prep(vec) -> EmbeddingVector:
        return l2_normalize(vec) if config.normalize_embeddings else as_embedding(vec)

    e_img = prep(providers.embedder.embed_image(image))
    t_caption = prep(providers.embedder.embed_text(caption))
    base = cosine_similarity(e_img, t_caption)

    grounded: dict[int, GroundedEntity] = {}
    for idx, entity in enumerate(decomp.entities):
        dets = providers.detector.detect(image, entity.phrase, providers.box_threshold)
        if not dets:
            if config.missing_entity_policy is MissingEntityPolicy.ERROR:
                raise GroundingEmpty(f"no detection for phrase {entity.phrase!r}")
            log.debug("no detection for %r on image %s; skipping", entity.phrase, image.id[:12])
            continue
        top = dets[0]
        sub = prep(providers.embedder.embed_image(apply_mask(image, top.box)))
        text = prep(providers.embedder.embed_text(entity.phrase))
        grounded[idx] = GroundedEntity(
            phrase=entity.phrase,
            box=top.box,
            confidence=top.confidence,
            sub_embedding=sub,
            text_embedding=text,
            score=entity_score(sub, text),
        )

    relation_score = None
    if _is_triplet(decomp) and len(grounded) == 2:
        # Triplet captions add a relation term from the combined subject+object
        # mask; term order is subject, object, relation.
        rel = decomp.relations[0]
        subj = grounded[decomp.entity_index(rel.subject)]
        obj = grounded[decomp.entity_index(rel.object)]
        e_rel = prep(relation_embedding(
            image, subj.box, obj.box, providers.embedder, config.relation_mask))
        t_rel = prep(providers.embedder.embed_text(rel.predicate))
        relation_score = entity_score(e_rel, t_rel)
        terms = [
            (subj.sub_embedding, subj.text_embedding),
            (obj.sub_embedding, obj.text_embedding),
            (e_rel, t_rel),
        ]
    else:
        # General captions contribute entity terms only, summed in phrase
        # order so reports are byte-stable.
        ordered = sorted(grounded.values(), key=lambda g: g.phrase)
        terms = [(g.sub_embedding, g.text_embedding) for g in ordered]

    fused_vec = fuse_general(e_img, terms, config.weight_mode)
    fused = cosine_similarity(fused_vec, t_caption)

    return PairScore(
        caption=caption,
        image_id=image.id,
        base_similarity=base,
        fused_similarity=fused,
        entities=tuple(g for _, g in sorted(grounded.items())),
        relation_score=relation_score,
        config=config,
    )
