"""Synthetic dataset generation: determinism, mixing ratios, perturbations."""

import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fulfil.dsl import OK, ExecEnv, parse_script, run_source
from fulfil.query import TableStore
from fulfil.solver import ModelState, PlanStore
from fulfil.taskgen import (
    OOD_TASK_ID,
    TRAINING_CONFIG,
    DatasetError,
    DatasetRecord,
    PerturbationConfig,
    dataset_to_jsonl,
    export_training_config,
    generate_dataset,
    load_dataset,
    ood_count,
    perturb,
    record_stream,
    write_dataset,
)
from fulfil.templates import TaskTemplate, fill_slots, load_ood_pool, load_templates

CLEAN = PerturbationConfig()
NOISY = PerturbationConfig(
    typo_rate=0.3,
    distraction_phrases=("hi there!", "thanks a lot,", "quick question:"),
    seed=7,
)


@pytest.fixture(scope="module")
def templates():
    return load_templates()


@pytest.fixture(scope="module")
def pool():
    return load_ood_pool()


class TestOodCount:
    def test_paper_scale_example(self):
        assert ood_count(50000, 0.04) == 2084

    def test_zero_fraction(self):
        assert ood_count(1000, 0) == 0
        assert ood_count(1000, "0.0") == 0

    def test_small_example(self):
        # 200 in-domain at 4%: 8.33… extra needed, rounded up
        assert ood_count(200, 0.04) == 9

    def test_invalid_fractions(self):
        with pytest.raises(ValueError):
            ood_count(100, 1)
        with pytest.raises(ValueError):
            ood_count(100, -0.1)

    @given(
        st.integers(1, 100_000),
        st.sampled_from(["0.01", "0.04", "0.1", "0.25", "0.5", "0.75"]),
    )
    def test_count_is_the_minimal_sufficient_one(self, n, frac):
        k = ood_count(n, frac)
        f = Fraction(frac)
        assert Fraction(k, n + k) >= f
        if k > 0:
            assert Fraction(k - 1, n + k - 1) < f


class TestRecordStream:
    def test_same_key_same_sequence(self):
        a = record_stream(3, "inventory_stddev", 12)
        b = record_stream(3, "inventory_stddev", 12)
        assert [a.random() for _ in range(5)] == [b.random() for _ in range(5)]

    def test_any_key_part_changes_the_stream(self):
        base = record_stream(3, "t", 0).random()
        assert base != record_stream(4, "t", 0).random()
        assert base != record_stream(3, "u", 0).random()
        assert base != record_stream(3, "t", 1).random()


class TestPerturb:
    def test_identity_with_no_noise(self):
        text = "why is my demand D2 not fulfilled?"
        assert perturb(text, CLEAN, record_stream(0, "x", 0)) == text

    def test_reproducible_for_a_fixed_stream(self):
        text = "how volatile was supplier S3's stock over the past 8 weeks?"
        first = perturb(text, NOISY, record_stream(9, "x", 4))
        second = perturb(text, NOISY, record_stream(9, "x", 4))
        assert first == second

    def test_protected_span_survives_total_typo_rate(self):
        text = "check supplier S1 stock"
        start = text.index("S1")
        cfg = PerturbationConfig(typo_rate=1.0)
        out = perturb(text, cfg, record_stream(0, "x", 0), [(start, start + 2)])
        assert "S1" in out

    def test_distraction_wraps_prefix_suffix_or_not_at_all(self):
        text = "optimize the plan"
        cfg = PerturbationConfig(distraction_phrases=("hello!",))
        shapes = {"bare": 0, "prefix": 0, "suffix": 0}
        for i in range(400):
            out = perturb(text, cfg, record_stream(1, "x", i))
            if out == text:
                shapes["bare"] += 1
            elif out == "hello! " + text:
                shapes["prefix"] += 1
            elif out == text + " hello!":
                shapes["suffix"] += 1
            else:
                pytest.fail(f"unexpected shape: {out!r}")
        assert all(shapes.values()), shapes
        assert 120 <= shapes["bare"] <= 280  # about half stay bare

    def test_typo_rate_bounds_enforced(self):
        with pytest.raises(ValueError):
            PerturbationConfig(typo_rate=1.5)
        with pytest.raises(ValueError):
            PerturbationConfig(typo_rate=-0.1)


class TestGenerateDataset:
    def test_small_end_to_end_mix(self, templates, pool):
        records = generate_dataset(templates[:10], pool, 20, 0.04, CLEAN)
        in_domain = [r for r in records if r.in_domain]
        ood = [r for r in records if not r.in_domain]
        assert len(in_domain) == 200
        assert len(ood) == 9
        assert records[-9:] == ood  # OOD block sits at the end
        assert all(r.task_id == OOD_TASK_ID for r in ood)
        assert all(r.gold_snippet is None for r in ood)

    def test_in_domain_block_sorted_by_task(self, templates, pool):
        records = generate_dataset(templates, pool, 3, 0, CLEAN)
        ids = [r.task_id for r in records]
        assert ids == sorted(ids)
        for t in templates:
            assert ids.count(t.task_id) == 3

    def test_byte_identical_reruns(self, templates, pool):
        first = dataset_to_jsonl(generate_dataset(templates, pool, 15, 0.04, NOISY))
        second = dataset_to_jsonl(generate_dataset(templates, pool, 15, 0.04, NOISY))
        assert first == second

    def test_seed_changes_the_noise(self, templates, pool):
        reseeded = PerturbationConfig(
            typo_rate=NOISY.typo_rate,
            distraction_phrases=NOISY.distraction_phrases,
            seed=NOISY.seed + 1,
        )
        a = dataset_to_jsonl(generate_dataset(templates, pool, 15, 0.04, NOISY))
        b = dataset_to_jsonl(generate_dataset(templates, pool, 15, 0.04, reseeded))
        assert a != b

    def test_single_clean_shot_is_the_raw_first_variant(self, templates):
        records = generate_dataset(templates, [], 1, 0, CLEAN)
        by_id = {r.task_id: r for r in records}
        for t in templates:
            record = by_id[t.task_id]
            assert record.query == fill_slots(t.query_variants[0], record.slots)
            assert record.gold_snippet == fill_slots(t.gold_snippet, record.slots)

    def test_variants_cycle_evenly(self, templates):
        t = next(x for x in templates if len(x.query_variants) >= 3)
        records = generate_dataset([t], [], 20, 0, CLEAN)
        for position, record in enumerate(records):
            variant = t.query_variants[position % len(t.query_variants)]
            assert record.query == fill_slots(variant, record.slots)

    def test_slot_values_come_from_the_domain(self, templates):
        records = generate_dataset(templates, [], 25, 0, CLEAN)
        by_id = {t.task_id: t for t in templates}
        for record in records:
            domains = by_id[record.task_id].slot_domains
            assert set(record.slots) == set(domains)
            for name, value in record.slots.items():
                assert value in domains[name]

    def test_ood_queries_cycle_through_the_pool(self, templates):
        records = generate_dataset([templates[0]], ["alpha?", "beta?"], 100, 0.04, CLEAN)
        ood = [r.query for r in records if not r.in_domain]
        assert ood == ["alpha?", "beta?", "alpha?", "beta?", "alpha?"]

    def test_slots_survive_ten_thousand_noisy_perturbations(self, templates, pool):
        records = generate_dataset(templates, pool, 625, 0, NOISY)
        assert len(records) == len(templates) * 625
        checked = 0
        for record in records:
            for value in record.slots.values():
                assert value in record.query, (record.task_id, record.query)
                checked += 1
        assert checked >= 10_000

    def test_generated_golds_parse_and_run(self, templates, pool, sample_instance):
        records = generate_dataset(templates[:10], pool, 20, 0.04, NOISY)
        store = TableStore.from_instance(sample_instance)
        solved = ModelState(sample_instance)
        solved.optimize()
        for record in records:
            if not record.in_domain:
                continue
            parse_script(record.gold_snippet)
            env = ExecEnv(store=store, model=solved.clone(), plan_store=PlanStore())
            result = run_source(record.gold_snippet, env)
            assert result.status == OK, (record.task_id, result.error_detail)

    def test_bad_inputs_rejected(self, templates, pool):
        with pytest.raises(ValueError):
            generate_dataset(templates, pool, 0, 0, CLEAN)
        hollow = TaskTemplate(
            "hollow", "data_extraction", ("what about {S}?",),
            'logger.log("{S}")', {"S": []},
        )
        with pytest.raises(DatasetError, match="slot 'S' empty"):
            generate_dataset([hollow], pool, 1, 0, CLEAN)
        with pytest.raises(DatasetError, match="OOD pool is empty"):
            generate_dataset(templates, [], 10, 0.04, CLEAN)


class TestRecordValidation:
    def test_in_domain_needs_a_snippet(self):
        with pytest.raises(ValueError):
            DatasetRecord(query="q", task_id="t", in_domain=True)

    def test_ood_must_stay_bare(self):
        with pytest.raises(ValueError):
            DatasetRecord(query="q", task_id="t", in_domain=False)
        with pytest.raises(ValueError):
            DatasetRecord(
                query="q", task_id=OOD_TASK_ID, in_domain=False, gold_snippet="x"
            )


class TestSerialization:
    def test_jsonl_round_trip(self, templates, pool, tmp_path):
        records = generate_dataset(templates, pool, 4, 0.04, NOISY)
        path = tmp_path / "train.jsonl"
        write_dataset(records, path)
        assert load_dataset(path) == records

    def test_ood_lines_have_no_snippet_key(self, templates, pool, tmp_path):
        records = generate_dataset(templates[:1], pool, 1, 0.5, CLEAN)
        path = tmp_path / "train.jsonl"
        write_dataset(records, path)
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        assert "gold_snippet" in lines[0]
        assert "gold_snippet" not in lines[-1]

    def test_malformed_line_reports_its_number(self, tmp_path):
        path = tmp_path / "broken.jsonl"
        path.write_text(
            '{"query": "q", "task_id": "OOD", "in_domain": false}\nnot json\n'
        )
        with pytest.raises(DatasetError, match="line 2"):
            load_dataset(path)


class TestTrainingConfigExport:
    def test_hyperparameters(self, tmp_path):
        path = tmp_path / "training.json"
        export_training_config(path)
        config = json.loads(path.read_text())
        assert config == TRAINING_CONFIG
        assert config["learning_rate"] == 0.0002
        assert config["batch_size"] == 16
        assert config["optimizer"] == "AdamW"
        assert config["adapter"] == "LoRA"
        assert config["max_steps"] == 100_000
        assert config["max_input_tokens"] == 1024
        assert config["max_output_tokens"] == 500

    def test_export_is_byte_stable(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        export_training_config(a)
        export_training_config(b)
        assert a.read_bytes() == b.read_bytes()
