"""Front-door routing: gating, slot filling, generation, and the answer pipeline."""

import logging
import math

import pytest

from fulfil.dsl import OK, PARSE_ERROR, ExecutionResult
from fulfil.router import (
    DEFAULT_RESPONSE,
    EXECUTION_FAILURE,
    TASK_RESULT,
    Answer,
    FixtureBackend,
    HostContext,
    RemoteBackend,
    RouteDecision,
    RouterError,
    SlotExtractionError,
    TokenUsage,
    classify,
    count_tokens,
    default_guidance,
    generate_snippet,
    handle_query,
)
from fulfil.templates import TaskTemplate, load_templates

GUIDANCE_LEAD = (
    "I can only help with fulfillment planning: data questions, plan "
    "generation, and what-if analysis."
)


@pytest.fixture(scope="module")
def backend():
    return FixtureBackend(load_templates())


@pytest.fixture()
def hosts(sample_instance):
    return HostContext.for_instance(sample_instance)


class TestCountTokens:
    def test_empty_is_zero(self):
        assert count_tokens("") == 0
        assert count_tokens("   ") == 0

    def test_short_words_count_one_each(self):
        assert count_tokens("optimize plan") == 2

    def test_long_fragments_split_by_four(self):
        assert count_tokens("abcdefghijkl") == math.ceil(12 / 4)
        assert count_tokens("internationalization") == math.ceil(20 / 4)

    def test_punctuation_counts(self):
        # don / ' / t
        assert count_tokens("don't") == 3
        assert count_tokens("model.optimize()") == 5

    def test_usage_addition(self):
        assert TokenUsage(2, 3) + TokenUsage(5, 7) == TokenUsage(7, 10)


class TestRouteDecision:
    def test_out_of_domain_cannot_carry_task(self):
        with pytest.raises(ValueError):
            RouteDecision(False, "inventory_stddev", 0.0)


class TestFixtureClassification:
    def test_kind_marker(self, backend):
        assert backend.kind == "fixture"

    def test_empty_query_rejected(self, backend):
        with pytest.raises(ValueError):
            classify("", backend)
        with pytest.raises(ValueError):
            classify("   ", backend)

    def test_small_talk_is_out_of_domain(self, backend):
        for query in ("how is the weather today", "how are you",
                      "help me rewrite this email"):
            decision = classify(query, backend)
            assert not decision.in_domain
            assert decision.task_id is None

    def test_paraphrases_share_a_route(self, backend):
        queries = (
            "why is my demand D3 not fulfilled?",
            "there is no docking for my demand D3",
            "can you dock my demand D3?",
        )
        decisions = [classify(q, backend) for q in queries]
        assert all(d.in_domain for d in decisions)
        assert {d.task_id for d in decisions} == {"whatif_unfulfilled_demand"}

    def test_exact_variant_scores_full_confidence(self):
        strict = FixtureBackend(load_templates(), threshold=0.5)
        decision = classify(
            "What is the standard deviation of supplier S1's inventory "
            "in the last 4 weeks?",
            strict,
        )
        assert decision.in_domain
        assert decision.task_id == "inventory_stddev"
        assert decision.confidence == 1.0

    def test_repeated_calls_agree(self, backend):
        query = "how volatile was supplier S2's stock over the past 6 weeks?"
        first, usage_a = backend.classify(query)
        second, usage_b = backend.classify(query)
        assert first == second
        assert usage_a == usage_b
        assert usage_a.input_tokens == count_tokens(query)
        assert usage_a.output_tokens == 1

    def test_score_ties_break_to_smallest_task_id(self):
        variants = ("count all demand rows now",)
        pair = [
            TaskTemplate("zz_later", "data_extraction", variants,
                         'logger.log("z")', {}),
            TaskTemplate("aa_first", "data_extraction", variants,
                         'logger.log("a")', {}),
        ]
        decision = classify("count all demand rows now", FixtureBackend(pair))
        assert decision.task_id == "aa_first"


class TestFixtureGeneration:
    def test_slots_flow_into_snippet(self, backend):
        # S9 is not a supplier in any packaged instance; generation is
        # purely textual, so the snippet still carries it through.
        query = ("What is the standard deviation of supplier S9's inventory "
                 "in the last 6 weeks?")
        decision = classify(query, backend)
        snippet = generate_snippet(query, decision, backend)
        assert "supplier_id = 'S9'" in snippet
        assert "INTERVAL 6" in snippet

    def test_usage_counts_query_and_snippet(self, backend):
        query = ("What is the standard deviation of supplier S1's inventory "
                 "in the last 4 weeks?")
        decision, _ = backend.classify(query)
        snippet, usage = backend.generate(query, decision)
        assert usage == TokenUsage(
            input_tokens=count_tokens(query),
            output_tokens=count_tokens(snippet),
        )

    def test_generate_requires_in_domain_decision(self, backend):
        with pytest.raises(RouterError):
            backend.generate("anything", RouteDecision(False, None, 0.0))

    def test_unmatchable_but_similar_query_fails_slot_extraction(self, backend):
        query = "What is the standard deviation of all inventory everywhere"
        decision, _ = backend.classify(query)
        assert decision.in_domain  # close enough to an inventory task
        with pytest.raises(SlotExtractionError):
            backend.generate(query, decision)


class TestDefaultGuidance:
    def test_lead_line_without_templates(self):
        assert default_guidance(None) == (GUIDANCE_LEAD,)

    def test_one_example_per_category(self, backend):
        lines = default_guidance(backend.templates)
        assert lines[0] == GUIDANCE_LEAD
        assert len(lines) == 4
        assert any("data extraction" in line for line in lines[1:])
        assert any("plan generation" in line for line in lines[1:])
        assert any("what if" in line for line in lines[1:])


class TestHandleQuery:
    def test_empty_query_rejected(self, backend, hosts):
        with pytest.raises(ValueError):
            handle_query("", backend, hosts)

    def test_out_of_domain_gets_guidance_and_touches_nothing(self, backend, hosts):
        answer = handle_query("how is the weather today", backend, hosts)
        assert answer.kind == DEFAULT_RESPONSE
        assert answer.logs[0] == GUIDANCE_LEAD
        assert answer.snippet is None
        assert answer.usage.output_tokens == 1  # the gate verdict only
        assert hosts.model.last_outcome is None
        assert hosts.plan_store.current is None

    def test_data_question_round_trip(self, backend, hosts):
        query = ("What is the standard deviation of supplier S1's inventory "
                 "in the last 4 weeks?")
        answer = handle_query(query, backend, hosts)
        assert answer.kind == TASK_RESULT
        assert answer.logs == ("The std is 4.2426",)
        assert "STDDEV" in answer.snippet
        gate = TokenUsage(count_tokens(query), 1)
        gen = TokenUsage(count_tokens(query), count_tokens(answer.snippet))
        assert answer.usage == gate + gen

    def test_slot_extraction_failure_reports_error(self, backend, hosts):
        query = "What is the standard deviation of all inventory everywhere"
        answer = handle_query(query, backend, hosts)
        assert answer.kind == EXECUTION_FAILURE
        assert len(answer.logs) == 1
        assert answer.logs[0].startswith("error: ")
        assert answer.snippet is None
        # only the gate ran; no generation tokens were spent
        assert answer.usage == TokenUsage(count_tokens(query), 1)

    def test_bad_snippet_surfaces_execution_failure(self, hosts):
        class ImportingBackend:
            templates = None

            def classify(self, query):
                return RouteDecision(True, "inventory_stddev", 1.0), TokenUsage(4, 1)

            def generate(self, query, decision):
                return "import os", TokenUsage(4, 2)

        answer = handle_query("whatever question", ImportingBackend(), hosts)
        assert answer.kind == EXECUTION_FAILURE
        assert answer.snippet == "import os"
        assert answer.logs[-1].startswith(f"error [{PARSE_ERROR}]:")
        assert answer.usage == TokenUsage(8, 3)

    def test_runner_override_is_used(self, backend, hosts):
        seen = []

        def runner(snippet):
            seen.append(snippet)
            return ExecutionResult(status=OK, logs=("stubbed",))

        query = ("What is the standard deviation of supplier S1's inventory "
                 "in the last 4 weeks?")
        answer = handle_query(query, backend, hosts, runner=runner)
        assert answer.logs == ("stubbed",)
        assert seen == [answer.snippet]


def _completion(text, usage=None):
    data = {"choices": [{"message": {"content": text}}]}
    if usage is not None:
        data["usage"] = usage
    return data


class RecordingPost:
    """Stub transport: yields scripted responses, records each request."""

    def __init__(self, *replies):
        self.replies = list(replies)
        self.calls = []

    def __call__(self, url, payload, headers, timeout):
        self.calls.append((url, payload, headers, timeout))
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        return reply


def remote(post, **kwargs):
    return RemoteBackend(
        endpoint="http://model.test/v1/chat/completions",
        model="m-small",
        post=post,
        **kwargs,
    )


class TestRemoteBackend:
    def test_kind_and_caps(self):
        backend = remote(RecordingPost())
        assert backend.kind == "remote"
        assert backend.templates is None
        with pytest.raises(ValueError):
            remote(RecordingPost(), max_output_tokens=0)

    def test_chat_payload_shape(self):
        post = RecordingPost(_completion("OUT"))
        backend = remote(post, auth_header="Authorization", auth_value="Bearer k")
        backend.classify("how are you")
        ((url, payload, headers, timeout),) = post.calls
        assert url == "http://model.test/v1/chat/completions"
        assert payload["model"] == "m-small"
        assert payload["max_tokens"] == 8
        [message] = payload["messages"]
        assert message["role"] == "user"
        assert "how are you" in message["content"]
        assert headers["Authorization"] == "Bearer k"
        assert headers["Content-Type"] == "application/json"
        assert timeout == 30.0

    def test_in_verdict_with_reported_usage(self):
        post = RecordingPost(
            _completion(
                "IN inventory_stddev",
                usage={"prompt_tokens": 42, "completion_tokens": 3},
            )
        )
        decision, usage = remote(post).classify("stddev of S1 inventory?")
        assert decision == RouteDecision(True, "inventory_stddev", 1.0)
        assert usage == TokenUsage(42, 3)

    def test_out_verdict_case_insensitive(self):
        decision, _ = remote(RecordingPost(_completion("out"))).classify("hi")
        assert decision == RouteDecision(False, None, 1.0)

    def test_garbage_verdict_warns_and_defaults_out(self, caplog):
        post = RecordingPost(_completion("perhaps, who can say"))
        with caplog.at_level(logging.WARNING, logger="fulfil.router"):
            decision, _ = remote(post).classify("hi")
        assert decision == RouteDecision(False, None, 0.0)
        assert "unparseable gate verdict" in caplog.text

    def test_missing_usage_falls_back_to_local_count(self):
        post = RecordingPost(_completion("OUT"))
        backend = remote(post)
        _, usage = backend.classify("hello there")
        ((_, payload, _, _),) = post.calls
        assert usage.input_tokens == count_tokens(payload["messages"][0]["content"])
        assert usage.output_tokens == count_tokens("OUT")

    def test_generate_strips_code_fences(self):
        post = RecordingPost(_completion("```python\nmodel.optimize()\n```"))
        snippet, _ = remote(post).generate(
            "optimize", RouteDecision(True, "optimize_plan", 1.0)
        )
        assert snippet == "model.optimize()"

    def test_generate_respects_output_cap(self):
        post = RecordingPost(_completion("model.optimize()"))
        remote(post, max_output_tokens=77).generate(
            "optimize", RouteDecision(True, "optimize_plan", 1.0)
        )
        ((_, payload, _, _),) = post.calls
        assert payload["max_tokens"] == 77

    def test_transport_error_wrapped(self):
        post = RecordingPost(OSError("connection refused"))
        with pytest.raises(RouterError, match="remote transport error"):
            remote(post).classify("hi")

    def test_malformed_response_wrapped(self):
        post = RecordingPost({"nope": 1})
        with pytest.raises(RouterError, match="malformed completion response"):
            remote(post).classify("hi")

    def test_full_pipeline_through_remote(self, hosts):
        post = RecordingPost(
            _completion("IN inventory_stddev"),
            _completion('```\nlogger.log("The std is 4.2426")\n```'),
        )
        answer = handle_query("stddev please", remote(post), hosts)
        assert answer.kind == TASK_RESULT
        assert answer.logs == ("The std is 4.2426",)
        assert len(post.calls) == 2

    def test_remote_out_of_domain_has_bare_guidance(self, hosts):
        post = RecordingPost(_completion("OUT"))
        answer = handle_query("how are you", remote(post), hosts)
        assert answer.kind == DEFAULT_RESPONSE
        assert answer.logs == (GUIDANCE_LEAD,)
