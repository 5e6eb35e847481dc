"""The task template library: canonical queries paired with gold snippets.

Each template is a JSON file under ``data/templates/`` with a task id, a
category, natural-language query variants containing ``{SLOT}`` holes, the
gold snippet (same holes), and per-slot value domains.  Slot names are
UPPERCASE so they can never collide with the lowercase ``{expr}`` holes
the snippet language resolves at run time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

CATEGORIES = ("data_extraction", "plan_generation", "what_if")


class TemplateError(Exception):
    """Malformed template file or slot mismatch."""


@dataclass(frozen=True)
class TaskTemplate:
    task_id: str
    category: str
    query_variants: tuple[str, ...]
    gold_snippet: str
    slot_domains: Mapping[str, tuple[str, ...]]

    def first_slots(self) -> dict[str, str]:
        """A deterministic slot assignment (first value of every domain)."""
        return {name: values[0] for name, values in self.slot_domains.items()}


def fill_slots(text: str, slots: Mapping[str, str]) -> str:
    """Replace declared ``{SLOT}`` holes; anything else is left alone."""
    for name, value in slots.items():
        text = text.replace("{" + name + "}", value)
    return text


def data_path(*parts: str):
    return resources.files("fulfil").joinpath("data", *parts)


def _template_from_dict(raw: dict, origin: str) -> TaskTemplate:
    for key in ("task_id", "category", "query_variants", "gold_snippet", "slot_domains"):
        if key not in raw:
            raise TemplateError(f"{origin}: missing key {key!r}")
    if raw["category"] not in CATEGORIES:
        raise TemplateError(
            f"{origin}: category must be one of {CATEGORIES}, got {raw['category']!r}"
        )
    variants = tuple(raw["query_variants"])
    if not variants:
        raise TemplateError(f"{origin}: query_variants is empty")
    domains = {
        name: tuple(str(v) for v in values)
        for name, values in raw["slot_domains"].items()
    }
    for name, values in domains.items():
        if not values:
            raise TemplateError(f"{origin}: slot {name!r} has an empty domain")
        if not name.isupper():
            raise TemplateError(f"{origin}: slot names must be uppercase: {name!r}")
    template = TaskTemplate(
        task_id=raw["task_id"],
        category=raw["category"],
        query_variants=variants,
        gold_snippet=raw["gold_snippet"],
        slot_domains=domains,
    )
    # every declared slot must appear in the gold snippet or a variant;
    # every {UPPER} hole used must be declared
    import re

    used = set()
    for text in variants + (template.gold_snippet,):
        used.update(re.findall(r"\{([A-Z][A-Z0-9_]*)\}", text))
    undeclared = used - set(domains)
    if undeclared:
        raise TemplateError(
            f"{origin}: undeclared slot(s) {sorted(undeclared)}"
        )
    return template


def load_templates(path=None) -> list[TaskTemplate]:
    """Load all templates, sorted by task id.

    ``path`` may point at a directory of ``*.json`` files; by default the
    packaged library is used.
    """
    if path is not None:
        files = sorted(Path(path).glob("*.json"))
        raws = [(f.name, json.loads(f.read_text())) for f in files]
    else:
        root = data_path("templates")
        raws = [
            (entry.name, json.loads(entry.read_text()))
            for entry in sorted(root.iterdir(), key=lambda e: e.name)
            if entry.name.endswith(".json")
        ]
    templates = [_template_from_dict(raw, origin) for origin, raw in raws]
    templates.sort(key=lambda t: t.task_id)
    seen = set()
    for t in templates:
        if t.task_id in seen:
            raise TemplateError(f"duplicate task_id {t.task_id!r}")
        seen.add(t.task_id)
    return templates


def load_ood_pool(path=None) -> list[str]:
    """Out-of-domain query pool (everyday requests the app must refuse)."""
    if path is not None:
        raw = json.loads(Path(path).read_text())
    else:
        raw = json.loads(data_path("ood_pool.json").read_text())
    queries = raw["queries"] if isinstance(raw, dict) else raw
    if not queries:
        raise TemplateError("out-of-domain pool is empty")
    return [str(q) for q in queries]
