"""Synthetic dataset generation from task templates.

Each record's randomness comes from its own stream, derived by hashing
(seed, task_id, index) — so generation is order-independent, trivially
parallelizable, and byte-reproducible.  Perturbations imitate how people
actually type: character swaps/drops in the literal text (never inside a
slot value, so ids always survive) and greeting-style distraction phrases
wrapped around the query.

Also exports the fine-tuning hyperparameter set as an inert JSON config;
nothing in this package consumes it.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .templates import TaskTemplate, fill_slots, load_templates, load_ood_pool

OOD_TASK_ID = "OOD"

TRAINING_CONFIG = {
    "batch_size": 16,
    "optimizer": "AdamW",
    "learning_rate": 0.0002,
    "max_input_tokens": 1024,
    "max_output_tokens": 500,
    "max_steps": 100000,
    "adapter": "LoRA",
}


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class PerturbationConfig:
    typo_rate: float = 0.0
    distraction_phrases: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.typo_rate <= 1.0:
            raise ValueError(f"typo_rate must be in [0, 1], got {self.typo_rate}")
        object.__setattr__(
            self, "distraction_phrases", tuple(self.distraction_phrases)
        )


@dataclass(frozen=True)
class DatasetRecord:
    query: str
    task_id: str
    in_domain: bool
    slots: Mapping[str, str] = field(default_factory=dict)
    gold_snippet: Optional[str] = None

    def __post_init__(self):
        if self.in_domain:
            if self.task_id == OOD_TASK_ID or self.gold_snippet is None:
                raise ValueError("in-domain records need a real task and snippet")
        else:
            if self.task_id != OOD_TASK_ID or self.gold_snippet is not None:
                raise ValueError(
                    "out-of-domain records carry task_id 'OOD' and no snippet"
                )


def record_stream(seed: int, task_id: str, index: int) -> random.Random:
    """The deterministic RNG stream owned by one dataset record."""
    digest = hashlib.sha256(f"{seed}:{task_id}:{index}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def _fill_with_spans(
    text: str, slots: Mapping[str, str]
) -> tuple[str, list[tuple[int, int]]]:
    """fill_slots, but also reporting each value's span in the output."""
    if not slots:
        return text, []
    pattern = re.compile(
        "|".join("\\{" + re.escape(name) + "\\}" for name in sorted(slots))
    )
    out = []
    spans = []
    pos = 0
    length = 0
    for match in pattern.finditer(text):
        literal = text[pos : match.start()]
        out.append(literal)
        length += len(literal)
        value = slots[match.group()[1:-1]]
        out.append(value)
        spans.append((length, length + len(value)))
        length += len(value)
        pos = match.end()
    out.append(text[pos:])
    return "".join(out), spans


def _typo_segment(text: str, rate: float, stream: random.Random) -> str:
    out = []
    i = 0
    chars = list(text)
    while i < len(chars):
        if stream.random() < rate:
            if stream.random() < 0.5 and i + 1 < len(chars):
                out.append(chars[i + 1])
                out.append(chars[i])
                i += 2
            else:
                i += 1  # dropped
            continue
        out.append(chars[i])
        i += 1
    return "".join(out)


def perturb(
    text: str,
    cfg: PerturbationConfig,
    stream: random.Random,
    protected_spans: Sequence[tuple[int, int]] = (),
) -> str:
    """Apply typos outside the protected spans, then maybe wrap the text
    with a distraction phrase (half the time none, else prefix or suffix)."""
    if cfg.typo_rate > 0:
        spans = sorted(protected_spans)
        pieces = []
        pos = 0
        for start, end in spans:
            pieces.append(_typo_segment(text[pos:start], cfg.typo_rate, stream))
            pieces.append(text[start:end])
            pos = end
        pieces.append(_typo_segment(text[pos:], cfg.typo_rate, stream))
        text = "".join(pieces)
    if cfg.distraction_phrases:
        roll = stream.random()
        if roll >= 0.5:
            phrase = stream.choice(cfg.distraction_phrases)
            if roll < 0.75:
                text = phrase + " " + text
            else:
                text = text + " " + phrase
    return text


def ood_count(n_in_domain: int, fraction) -> int:
    """Number of OOD records so they make up ``fraction`` of the output.

    Exact rational arithmetic: ceil(f/(1-f) * N).
    """
    f = Fraction(str(fraction))
    if not 0 <= f < 1:
        raise ValueError(f"ood_fraction must be in [0, 1), got {fraction}")
    if f == 0:
        return 0
    return math.ceil(f / (1 - f) * n_in_domain)


def generate_dataset(
    templates: Sequence[TaskTemplate],
    ood_pool: Sequence[str],
    shots_per_task: int,
    ood_fraction,
    cfg: PerturbationConfig,
) -> list[DatasetRecord]:
    """Expand every template into ``shots_per_task`` records plus the OOD mix.

    Per record: cycle through the query variants, draw slot values from the
    record's own stream, fill, perturb.  Output order is deterministic:
    in-domain sorted by (task_id, index), then the OOD block.
    """
    if shots_per_task < 1:
        raise ValueError("shots_per_task must be >= 1")
    records: list[DatasetRecord] = []
    for template in sorted(templates, key=lambda t: t.task_id):
        if not template.query_variants:
            raise DatasetError(f"{template.task_id}: no query variants")
        for name, values in template.slot_domains.items():
            if not values:
                raise DatasetError(f"{template.task_id}: slot {name!r} empty")
        for index in range(shots_per_task):
            stream = record_stream(cfg.seed, template.task_id, index)
            variant = template.query_variants[index % len(template.query_variants)]
            slots = {
                name: stream.choice(domain)
                for name, domain in sorted(template.slot_domains.items())
            }
            filled, spans = _fill_with_spans(variant, slots)
            query = perturb(filled, cfg, stream, spans)
            records.append(
                DatasetRecord(
                    query=query,
                    task_id=template.task_id,
                    in_domain=True,
                    slots=slots,
                    gold_snippet=fill_slots(template.gold_snippet, slots),
                )
            )
    extra = ood_count(len(records), ood_fraction)
    if extra:
        if not ood_pool:
            raise DatasetError("ood_fraction > 0 but the OOD pool is empty")
        for index in range(extra):
            stream = record_stream(cfg.seed, OOD_TASK_ID, index)
            query = perturb(ood_pool[index % len(ood_pool)], cfg, stream)
            records.append(
                DatasetRecord(query=query, task_id=OOD_TASK_ID, in_domain=False)
            )
    return records


def record_to_dict(record: DatasetRecord) -> dict:
    data = {
        "query": record.query,
        "task_id": record.task_id,
        "in_domain": record.in_domain,
        "slots": dict(record.slots),
    }
    if record.gold_snippet is not None:
        data["gold_snippet"] = record.gold_snippet
    return data


def record_from_dict(data: dict) -> DatasetRecord:
    return DatasetRecord(
        query=data["query"],
        task_id=data["task_id"],
        in_domain=data["in_domain"],
        slots=dict(data.get("slots") or {}),
        gold_snippet=data.get("gold_snippet"),
    )


def dataset_to_jsonl(records: Sequence[DatasetRecord]) -> str:
    lines = [
        json.dumps(record_to_dict(r), sort_keys=True, ensure_ascii=False)
        for r in records
    ]
    return "\n".join(lines) + "\n" if lines else ""


def write_dataset(records: Sequence[DatasetRecord], path) -> None:
    Path(path).write_text(dataset_to_jsonl(records), encoding="utf-8")


def load_dataset(path) -> list[DatasetRecord]:
    records = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            records.append(record_from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise DatasetError(f"{path} line {i + 1}: {exc}") from None
    return records


def export_training_config(path) -> None:
    """Write the fine-tuning hyperparameters as-is (documentation only)."""
    Path(path).write_text(
        json.dumps(TRAINING_CONFIG, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
