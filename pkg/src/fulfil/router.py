"""Query routing: domain gate, snippet generation, execution, answer.

A backend decides whether a query is in scope and, if so, produces a
snippet in the restricted language.  Two backends ship: a deterministic
fixture backend (template retrieval by token containment plus slot
extraction — no network, fully reproducible) and a remote backend that
talks to a chat-completion HTTP endpoint.
"""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from .dsl import (
    OK,
    DEFAULT_STEP_BUDGET,
    ExecEnv,
    ExecutionResult,
    run_source,
)
from .model import PlanningInstance
from .query import TableStore
from .solver import ModelState, PlanStore
from .templates import CATEGORIES, TaskTemplate, fill_slots, load_templates

logger = logging.getLogger(__name__)

TASK_RESULT = "task_result"
DEFAULT_RESPONSE = "default_response"
EXECUTION_FAILURE = "execution_failure"

DEFAULT_SIMILARITY_THRESHOLD = 0.35


class RouterError(Exception):
    pass


class SlotExtractionError(RouterError):
    """The query matched a template but its slots could not be recovered."""


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(
            self.input_tokens + other.input_tokens,
            self.output_tokens + other.output_tokens,
        )


@dataclass(frozen=True)
class RouteDecision:
    in_domain: bool
    task_id: Optional[str]
    confidence: float

    def __post_init__(self):
        if not self.in_domain and self.task_id is not None:
            raise ValueError("out-of-domain decisions carry no task_id")


@dataclass(frozen=True)
class Answer:
    kind: str
    logs: tuple
    snippet: Optional[str]
    usage: TokenUsage


@dataclass
class HostContext:
    """The state a snippet execution runs against."""

    store: TableStore
    model: ModelState
    plan_store: PlanStore
    step_budget: int = DEFAULT_STEP_BUDGET

    @classmethod
    def for_instance(cls, instance: PlanningInstance, **kwargs) -> "HostContext":
        return cls(
            store=TableStore.from_instance(instance),
            model=ModelState(instance),
            plan_store=PlanStore(),
            **kwargs,
        )

    def fresh_env(self) -> ExecEnv:
        return ExecEnv(
            store=self.store,
            model=self.model,
            plan_store=self.plan_store,
            step_budget=self.step_budget,
        )


_FRAGMENT_RE = re.compile(r"\w+|[^\w\s]")


def count_tokens(text: str) -> int:
    """Cheap, deterministic token estimate used for cost accounting.

    Words and punctuation marks count one token each; unusually long words
    count one token per four characters.
    """
    total = 0
    for fragment in _FRAGMENT_RE.findall(text):
        total += 1 if len(fragment) <= 8 else math.ceil(len(fragment) / 4)
    return total


_SIM_TOKEN_RE = re.compile(r"[a-z0-9]+")
_SLOT_RE = re.compile(r"\{[A-Z][A-Z0-9_]*\}")


def _sim_tokens(text: str) -> frozenset:
    return frozenset(_SIM_TOKEN_RE.findall(text.lower()))


def _variant_regex(variant: str) -> re.Pattern:
    """Turn a query variant into a slot-capturing regex.

    Literal stretches are matched loosely over whitespace; each hole
    becomes a lazy named group.
    """
    def literal(text: str) -> str:
        # escape after splitting: re.escape backslashes spaces, which would
        # otherwise corrupt the \s+ flexibility rewrite
        return r"\s+".join(re.escape(part) for part in re.split(r"\s+", text))

    pattern = []
    pos = 0
    for match in _SLOT_RE.finditer(variant):
        pattern.append(literal(variant[pos : match.start()]))
        name = match.group()[1:-1]
        pattern.append(f"(?P<{name}>.+?)")
        pos = match.end()
    pattern.append(literal(variant[pos:]))
    return re.compile("".join(pattern), re.IGNORECASE)


class FixtureBackend:
    """Deterministic stand-in for a language model.

    Classification scores each template by token containment: the share of
    a variant's tokens (slots stripped) present in the query.  The best
    template wins (ties break to the lexicographically smallest task id);
    the query is in-domain when the best score reaches the threshold.
    Generation recovers slot values with per-variant regexes and fills the
    template's gold snippet.
    """

    kind = "fixture"

    def __init__(
        self,
        templates: Optional[Sequence[TaskTemplate]] = None,
        threshold: float = DEFAULT_SIMILARITY_THRESHOLD,
    ):
        if not 0.0 <= threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {threshold}")
        self.templates = list(templates) if templates is not None else load_templates()
        self.templates.sort(key=lambda t: t.task_id)
        self.threshold = float(threshold)
        self.name = "fixture"
        self._by_id = {t.task_id: t for t in self.templates}
        self._variant_tokens = {
            t.task_id: [
                _sim_tokens(_SLOT_RE.sub(" ", variant))
                for variant in t.query_variants
            ]
            for t in self.templates
        }
        self._variant_regexes = {
            t.task_id: [_variant_regex(v) for v in t.query_variants]
            for t in self.templates
        }

    def score(self, query: str, template: TaskTemplate) -> float:
        query_tokens = _sim_tokens(query)
        best = 0.0
        for tokens in self._variant_tokens[template.task_id]:
            if not tokens:
                continue
            best = max(best, len(tokens & query_tokens) / len(tokens))
        return best

    def classify(self, query: str) -> tuple[RouteDecision, TokenUsage]:
        usage = TokenUsage(input_tokens=count_tokens(query), output_tokens=1)
        best_id = None
        best_score = -1.0
        for template in self.templates:  # already sorted by task_id
            score = self.score(query, template)
            if score > best_score:
                best_score = score
                best_id = template.task_id
        if best_score >= self.threshold:
            return RouteDecision(True, best_id, best_score), usage
        return RouteDecision(False, None, max(best_score, 0.0)), usage

    def extract_slots(self, query: str, template: TaskTemplate) -> dict[str, str]:
        query = query.strip()
        for regex in self._variant_regexes[template.task_id]:
            match = regex.fullmatch(query) or regex.search(query)
            if match:
                return {k: v.strip() for k, v in match.groupdict().items()}
        raise SlotExtractionError(
            f"could not extract slots for task {template.task_id!r} from {query!r}"
        )

    def generate(
        self, query: str, decision: RouteDecision
    ) -> tuple[str, TokenUsage]:
        if not decision.in_domain or decision.task_id not in self._by_id:
            raise RouterError("generate() requires an in-domain decision")
        template = self._by_id[decision.task_id]
        slots = self.extract_slots(query, template)
        snippet = fill_slots(template.gold_snippet, slots)
        usage = TokenUsage(
            input_tokens=count_tokens(query),
            output_tokens=count_tokens(snippet),
        )
        return snippet, usage


def _default_post(url: str, payload: dict, headers: dict, timeout: float) -> dict:
    import requests

    response = requests.post(url, json=payload, headers=headers, timeout=timeout)
    response.raise_for_status()
    return response.json()


def _load_prompt(name: str) -> str:
    from .templates import data_path

    return data_path("prompts", name).read_text()


class RemoteBackend:
    """Chat-completion client for a real model endpoint.

    Sends the gate prompt first, then (for in-domain queries) the coder
    prompt; reply text is taken verbatim as the snippet.  Token usage comes
    from the endpoint when reported, otherwise from count_tokens.
    """

    kind = "remote"

    def __init__(
        self,
        endpoint: str,
        model: str,
        auth_header: Optional[str] = None,
        auth_value: Optional[str] = None,
        max_input_tokens: int = 1024,
        max_output_tokens: int = 500,
        timeout: float = 30.0,
        post: Optional[Callable] = None,
    ):
        if max_input_tokens <= 0 or max_output_tokens <= 0:
            raise ValueError("token caps must be positive")
        self.endpoint = endpoint
        self.model = model
        self.name = model
        self.max_input_tokens = max_input_tokens
        self.max_output_tokens = max_output_tokens
        self.timeout = timeout
        self.templates = None
        self._headers = {"Content-Type": "application/json"}
        if auth_header and auth_value:
            self._headers[auth_header] = auth_value
        self._post = post or _default_post
        self._gate_prompt = _load_prompt("gate_prompt.txt")
        self._coder_prompt = _load_prompt("coder_prompt.txt")

    def _chat(self, prompt: str, max_tokens: int) -> tuple[str, TokenUsage]:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": max_tokens,
        }
        try:
            data = self._post(self.endpoint, payload, self._headers, self.timeout)
        except Exception as exc:
            raise RouterError(f"remote transport error: {exc}") from exc
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise RouterError(f"malformed completion response: {data!r}") from None
        usage_raw = data.get("usage") or {}
        usage = TokenUsage(
            input_tokens=int(usage_raw.get("prompt_tokens", count_tokens(prompt))),
            output_tokens=int(usage_raw.get("completion_tokens", count_tokens(text))),
        )
        return text, usage

    def classify(self, query: str) -> tuple[RouteDecision, TokenUsage]:
        prompt = self._gate_prompt.replace("{query}", query)
        text, usage = self._chat(prompt, max_tokens=8)
        verdict = text.strip().split()
        if verdict and verdict[0].upper() == "IN":
            task_id = verdict[1] if len(verdict) > 1 else None
            return RouteDecision(True, task_id, 1.0), usage
        if verdict and verdict[0].upper() == "OUT":
            return RouteDecision(False, None, 1.0), usage
        logger.warning("unparseable gate verdict %r; treating as out-of-domain", text)
        return RouteDecision(False, None, 0.0), usage

    def generate(
        self, query: str, decision: RouteDecision
    ) -> tuple[str, TokenUsage]:
        prompt = self._coder_prompt.replace("{query}", query)
        text, usage = self._chat(prompt, max_tokens=self.max_output_tokens)
        snippet = text.strip()
        # models love to wrap code in fences; unwrap the common case
        if snippet.startswith("```"):
            snippet = re.sub(r"^```[a-zA-Z]*\n?", "", snippet)
            snippet = re.sub(r"\n?```$", "", snippet)
        return snippet, usage


def classify(query: str, backend) -> RouteDecision:
    if not query or not query.strip():
        raise ValueError("query must be nonempty")
    decision, _ = backend.classify(query)
    return decision


def generate_snippet(query: str, decision: RouteDecision, backend) -> str:
    snippet, _ = backend.generate(query, decision)
    return snippet


def default_guidance(templates: Optional[Sequence[TaskTemplate]] = None) -> tuple:
    """The canned reply for out-of-domain queries."""
    lines = [
        "I can only help with fulfillment planning: data questions, plan "
        "generation, and what-if analysis."
    ]
    if templates:
        by_category: dict[str, TaskTemplate] = {}
        for template in sorted(templates, key=lambda t: t.task_id):
            by_category.setdefault(template.category, template)
        for category in CATEGORIES:
            template = by_category.get(category)
            if template is None:
                continue
            example = fill_slots(template.query_variants[0], template.first_slots())
            lines.append(
                f"For {category.replace('_', ' ')}, try: {example!r}"
            )
    return tuple(lines)


def handle_query(
    query: str,
    backend,
    hosts: HostContext,
    runner: Optional[Callable[[str], ExecutionResult]] = None,
) -> Answer:
    """The full pipeline: gate, generate, execute, answer.

    ``runner`` overrides how a generated snippet is executed; the service
    uses it to serialize mutating snippets behind its writer lock.
    """
    if not query or not query.strip():
        raise ValueError("query must be nonempty")
    decision, gate_usage = backend.classify(query)
    if not decision.in_domain:
        return Answer(
            kind=DEFAULT_RESPONSE,
            logs=default_guidance(backend.templates),
            snippet=None,
            usage=gate_usage,
        )
    try:
        snippet, gen_usage = backend.generate(query, decision)
    except SlotExtractionError as exc:
        return Answer(
            kind=EXECUTION_FAILURE,
            logs=(f"error: {exc}",),
            snippet=None,
            usage=gate_usage,
        )
    usage = gate_usage + gen_usage
    if runner is None:
        result = run_source(snippet, hosts.fresh_env())
    else:
        result = runner(snippet)
    if result.status == OK:
        return Answer(
            kind=TASK_RESULT, logs=result.logs, snippet=snippet, usage=usage
        )
    return Answer(
        kind=EXECUTION_FAILURE,
        logs=result.logs + (f"error [{result.status}]: {result.error_detail}",),
        snippet=snippet,
        usage=usage,
    )
