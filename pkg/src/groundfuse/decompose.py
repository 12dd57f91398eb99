"""Caption decomposition: entities, attributes, relations, groundable phrases.

Two paths produce the same structure: a rule-based parser for templated
subject-verb-object captions, and two-stage LLM prompting for free-form
captions (stage 1 extracts objects/attributes/relations as JSON, stage 2
turns them into short groundable phrases).
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from enum import Enum

from .errors import BackendError, DecompositionFailed, MalformedReply, UnparseableCaption
from .prompts import PromptTemplates

log = logging.getLogger(__name__)

# Additional attempts after the first malformed LLM reply.
JSON_RETRY_BUDGET = 2


class DecompositionSource(str, Enum):
    RULE_BASED = "rule_based"
    LLM = "llm"
    LLM_FALLBACK_RULE_BASED = "llm_fallback_rule_based"


class DecompositionPolicy(str, Enum):
    RULE_FIRST = "rule_first"
    LLM_FIRST = "llm_first"
    RULE_ONLY = "rule_only"
    LLM_ONLY = "llm_only"


@dataclass(frozen=True)
class EntityPhrase:
    """One groundable entity: bare object word, optional attribute, merged phrase."""

    name: str
    attribute: str | None
    phrase: str

    def __post_init__(self):
        if not self.phrase:
            raise ValueError("entity phrase must be nonempty")
        if self.name.lower() not in self.phrase.lower():
            raise ValueError(f"phrase {self.phrase!r} does not contain object {self.name!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "attribute": self.attribute, "phrase": self.phrase}


@dataclass(frozen=True)
class RelationTuple:
    subject: str
    predicate: str
    object: str

    def __post_init__(self):
        if not (self.subject and self.predicate and self.object):
            raise ValueError("relation fields must be nonempty")

    def to_dict(self) -> dict:
        return {"subject": self.subject, "predicate": self.predicate, "object": self.object}


@dataclass(frozen=True)
class CaptionDecomposition:
    caption: str
    entities: tuple[EntityPhrase, ...]
    relations: tuple[RelationTuple, ...]
    source: DecompositionSource

    def __post_init__(self):
        if not self.entities:
            raise ValueError("decomposition needs at least one entity")
        for rel in self.relations:
            self.entity_index(rel.subject)
            self.entity_index(rel.object)

    def entity_index(self, ref: str) -> int:
        """Resolve an entity reference (object word or full phrase) to its index."""
        low = ref.lower()
        for i, ent in enumerate(self.entities):
            if ent.name.lower() == low:
                return i
        for i, ent in enumerate(self.entities):
            if ent.phrase.lower() == low:
                return i
        raise ValueError(f"relation endpoint {ref!r} matches no entity")

    def to_dict(self) -> dict:
        return {
            "caption": self.caption,
            "source": self.source.value,
            "entities": [e.to_dict() for e in self.entities],
            "relations": [r.to_dict() for r in self.relations],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# "A/An/The <subject> is <verb-ing> a/an/the <object>", tolerant of trailing
# punctuation and extra whitespace.
_TEMPLATE_RE = re.compile(
    r"^(?:a|an|the)\s+([a-z]+)\s+is\s+([a-z]+ing)\s+(?:a|an|the)\s+([a-z]+)\s*[.!]?$",
    re.IGNORECASE,
)
_BARE_RE = re.compile(r"^([a-z]+)\s+([a-z]+)\s+([a-z]+)\s*[.!]?$", re.IGNORECASE)


def parse_svo(caption: str) -> CaptionDecomposition:
    """Parse a templated subject-verb-object caption.

    The "-ing" verb form is kept verbatim as the predicate. Raises
    UnparseableCaption when the caption matches neither the templated form
    nor a bare three-word triple.
    """
    text = caption.strip()
    m = _TEMPLATE_RE.match(text) or _BARE_RE.match(text)
    if m is None:
        raise UnparseableCaption(f"caption does not match the SVO template: {caption!r}")
    subject, predicate, obj = (g.lower() for g in m.groups())
    return CaptionDecomposition(
        caption=caption,
        entities=(
            EntityPhrase(subject, None, subject),
            EntityPhrase(obj, None, obj),
        ),
        relations=(RelationTuple(subject, predicate, obj),),
        source=DecompositionSource.RULE_BASED,
    )


@dataclass(frozen=True)
class Stage1Result:
    """Parsed stage-1 reply: raw objects/attributes/relations before phrasing."""

    objects: tuple[tuple[str, str | None], ...]  # (name, attribute)
    relations: tuple[RelationTuple, ...]

    def to_dict(self) -> dict:
        return {
            "objects": [{"name": n, "attribute": a} for n, a in self.objects],
            "relations": [r.to_dict() for r in self.relations],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _strip_fences(reply: str) -> str:
    text = reply.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        if lines and lines[0].startswith("```"):
            lines = lines[1:]
        if lines and lines[-1].strip() == "```":
            lines = lines[:-1]
        text = "\n".join(lines).strip()
    return text


def _load_reply_json(reply: str) -> dict:
    try:
        parsed = json.loads(_strip_fences(reply))
    except json.JSONDecodeError as exc:
        raise MalformedReply(f"reply is not valid JSON: {exc}") from exc
    if not isinstance(parsed, dict):
        raise MalformedReply(f"reply must be a JSON object, got {type(parsed).__name__}")
    return parsed


def _parse_reply_relations(raw) -> tuple[RelationTuple, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise MalformedReply("'relations' must be a list")
    out = []
    for item in raw:
        if not isinstance(item, dict):
            raise MalformedReply("each relation must be an object")
        try:
            subject = str(item["subject"]).strip()
            predicate = str(item["predicate"]).strip()
            obj = str(item["object"]).strip()
        except KeyError as exc:
            raise MalformedReply(f"relation missing key {exc}") from exc
        if not (subject and predicate and obj):
            raise MalformedReply("relation fields must be nonempty strings")
        out.append(RelationTuple(subject, predicate, obj))
    return tuple(out)


def _parse_stage1_reply(reply: str) -> Stage1Result:
    parsed = _load_reply_json(reply)
    raw_objects = parsed.get("objects")
    if not isinstance(raw_objects, list) or not raw_objects:
        raise MalformedReply("'objects' must be a nonempty list")
    objects = []
    for item in raw_objects:
        if not isinstance(item, dict) or "name" not in item:
            raise MalformedReply("each object needs a 'name'")
        name = str(item["name"]).strip()
        if not name:
            raise MalformedReply("object name must be nonempty")
        attr = item.get("attribute")
        if attr is not None:
            attr = str(attr).strip() or None
        objects.append((name, attr))
    return Stage1Result(tuple(objects), _parse_reply_relations(parsed.get("relations")))


def _complete_json(llm, prompt: str, parser, retries: int):
    """Call the provider, parse the reply, retrying on malformed JSON."""
    attempts = retries + 1
    last_error = None
    for attempt in range(attempts):
        reply = llm.complete(prompt)
        try:
            return parser(reply)
        except MalformedReply as exc:
            last_error = exc
            log.warning("malformed LLM reply (attempt %d/%d): %s", attempt + 1, attempts, exc)
    raise MalformedReply(f"reply still malformed after {attempts} attempts: {last_error}")


def decompose_stage1(caption: str, llm, templates: PromptTemplates | None = None,
                     retries: int = JSON_RETRY_BUDGET) -> Stage1Result:
    """Stage 1: ask the LLM for objects, attributes, and relations as JSON."""
    if not caption.strip():
        raise ValueError("caption must be nonempty")
    templates = templates or PromptTemplates()
    return _complete_json(llm, templates.render_stage1(caption), _parse_stage1_reply, retries)


def decompose_stage2(stage1: Stage1Result, llm, caption: str,
                     templates: PromptTemplates | None = None,
                     retries: int = JSON_RETRY_BUDGET) -> CaptionDecomposition:
    """Stage 2: ask the LLM to merge attributes into short groundable phrases.

    Reply phrases are matched to stage-1 objects by substring; an object with
    no matching phrase falls back to the locally merged "attribute object"
    form, so the decomposition stays total on sloppy replies.
    """
    if not stage1.objects:
        raise ValueError("stage-1 record has no objects")
    templates = templates or PromptTemplates()
    prompt = templates.render_stage2(caption, stage1.to_json())

    def parse(reply: str) -> tuple[list[str], tuple[RelationTuple, ...]]:
        parsed = _load_reply_json(reply)
        raw_phrases = parsed.get("phrases")
        if not isinstance(raw_phrases, list):
            raise MalformedReply("'phrases' must be a list")
        phrases = [str(p).strip() for p in raw_phrases if str(p).strip()]
        return phrases, _parse_reply_relations(parsed.get("relations"))

    phrases, reply_relations = _complete_json(llm, prompt, parse, retries)

    entities = []
    unused = list(phrases)
    for name, attr in stage1.objects:
        chosen = None
        for p in unused:
            if name.lower() in p.lower():
                chosen = p
                break
        if chosen is not None:
            unused.remove(chosen)
        else:
            chosen = f"{attr} {name}" if attr else name
            log.warning("no reply phrase contains %r; using %r", name, chosen)
        entities.append(EntityPhrase(name, attr, chosen))

    relations = reply_relations if reply_relations else stage1.relations
    entity_keys = {e.name.lower() for e in entities} | {e.phrase.lower() for e in entities}
    kept = []
    for rel in relations:
        if rel.subject.lower() in entity_keys and rel.object.lower() in entity_keys:
            kept.append(rel)
        else:
            log.warning("dropping relation %s: endpoint matches no entity", rel.to_dict())

    return CaptionDecomposition(
        caption=caption,
        entities=tuple(entities),
        relations=tuple(kept),
        source=DecompositionSource.LLM,
    )


def decompose(caption: str, llm=None,
              policy: DecompositionPolicy = DecompositionPolicy.RULE_FIRST,
              templates: PromptTemplates | None = None,
              retries: int = JSON_RETRY_BUDGET) -> CaptionDecomposition:
    """Decompose a caption under the given policy, with fallback between paths.

    rule_first tries the SVO parser and falls back to the LLM; llm_first does
    the reverse (fallback decompositions are marked llm_fallback_rule_based).
    Raises DecompositionFailed when every permitted path fails, ValueError
    when the policy requires an absent LLM provider.
    """
    if not caption.strip():
        raise ValueError("caption must be nonempty")
    policy = DecompositionPolicy(policy)
    needs_llm = policy in (DecompositionPolicy.LLM_FIRST, DecompositionPolicy.LLM_ONLY)
    if needs_llm and llm is None:
        raise ValueError(f"policy {policy.value} requires an LLM provider")

    def llm_path() -> CaptionDecomposition:
        stage1 = decompose_stage1(caption, llm, templates, retries)
        return decompose_stage2(stage1, llm, caption, templates, retries)

    if policy is DecompositionPolicy.RULE_ONLY:
        try:
            return parse_svo(caption)
        except UnparseableCaption as exc:
            raise DecompositionFailed(str(exc)) from exc

    if policy is DecompositionPolicy.LLM_ONLY:
        try:
            return llm_path()
        except (MalformedReply, BackendError) as exc:
            raise DecompositionFailed(f"LLM path failed: {exc}") from exc

    if policy is DecompositionPolicy.RULE_FIRST:
        try:
            return parse_svo(caption)
        except UnparseableCaption as rule_exc:
            if llm is None:
                raise DecompositionFailed(str(rule_exc)) from rule_exc
            try:
                return llm_path()
            except (MalformedReply, BackendError) as exc:
                raise DecompositionFailed(
                    f"rule path: {rule_exc}; LLM path: {exc}") from exc

    # llm_first
    try:
        return llm_path()
    except (MalformedReply, BackendError) as llm_exc:
        try:
            rule = parse_svo(caption)
        except UnparseableCaption as rule_exc:
            raise DecompositionFailed(
                f"LLM path: {llm_exc}; rule path: {rule_exc}") from llm_exc
        return CaptionDecomposition(
            caption=rule.caption,
            entities=rule.entities,
            relations=rule.relations,
            source=DecompositionSource.LLM_FALLBACK_RULE_BASED,
        )
