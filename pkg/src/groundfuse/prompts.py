"""Prompt templates for the two-stage caption decomposition.

Templates are plain UTF-8 text with literal ``{caption}`` (and, for stage 2,
``{stage1_json}``) placeholders, substituted verbatim so JSON braces in the
template body survive. Defaults live here; users point ``--prompts`` at a
directory with ``stage1.txt`` / ``stage2.txt`` to tune them without rebuilds.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

DEFAULT_STAGE1 = """\
You extract structure from image captions.
Identify every object mentioned in the caption, each object's attribute when
one is present, and how the objects are connected as subject-verb-object
relations. Reply with strict JSON only, no prose and no code fences, using
exactly this shape:
{"objects": [{"name": "...", "attribute": null}], "relations": [{"subject": "...", "predicate": "...", "object": "..."}]}

Example 1
Caption: A red car parked near a tall tree
Reply: {"objects": [{"name": "car", "attribute": "red"}, {"name": "tree", "attribute": "tall"}], "relations": [{"subject": "car", "predicate": "parked near", "object": "tree"}]}

Example 2
Caption: A woman throws a frisbee
Reply: {"objects": [{"name": "woman", "attribute": null}, {"name": "frisbee", "attribute": null}], "relations": [{"subject": "woman", "predicate": "throws", "object": "frisbee"}]}

Caption: {caption}
Reply:"""

DEFAULT_STAGE2 = """\
You turn caption structure into short groundable phrases.
For every object in the structure below, produce one short natural phrase:
the attribute merged with the object when an attribute is present, otherwise
the object word alone. Keep the object word inside its phrase, keep phrases
in the same order as the objects, and carry the relations over. Reply with
strict JSON only, exactly this shape:
{"phrases": ["..."], "relations": [{"subject": "...", "predicate": "...", "object": "..."}]}

Example 1
Structure: {"objects": [{"name": "car", "attribute": "red"}, {"name": "tree", "attribute": "tall"}], "relations": [{"subject": "car", "predicate": "parked near", "object": "tree"}]}
Reply: {"phrases": ["red car", "tall tree"], "relations": [{"subject": "car", "predicate": "parked near", "object": "tree"}]}

Example 2
Structure: {"objects": [{"name": "woman", "attribute": null}, {"name": "frisbee", "attribute": null}], "relations": [{"subject": "woman", "predicate": "throws", "object": "frisbee"}]}
Reply: {"phrases": ["woman", "frisbee"], "relations": [{"subject": "woman", "predicate": "throws", "object": "frisbee"}]}

Caption: {caption}
Structure: {stage1_json}
Reply:"""


@dataclass(frozen=True)
class PromptTemplates:
    stage1: str = DEFAULT_STAGE1
    stage2: str = DEFAULT_STAGE2

    @classmethod
    def from_dir(cls, path) -> "PromptTemplates":
        """Load stage1.txt / stage2.txt from a directory; missing files keep defaults."""
        path = Path(path)
        stage1 = DEFAULT_STAGE1
        stage2 = DEFAULT_STAGE2
        f1 = path / "stage1.txt"
        f2 = path / "stage2.txt"
        if f1.is_file():
            stage1 = f1.read_text(encoding="utf-8")
        if f2.is_file():
            stage2 = f2.read_text(encoding="utf-8")
        return cls(stage1=stage1, stage2=stage2)

    def render_stage1(self, caption: str) -> str:
        return self.stage1.replace("{caption}", caption)

    def render_stage2(self, caption: str, stage1_json: str) -> str:
        return self.stage2.replace("{caption}", caption).replace("{stage1_json}", stage1_json)
