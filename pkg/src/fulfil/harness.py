"""Evaluation: execution-equivalence judging, metrics, and cost accounting.

Judging never compares snippet text.  An in-domain prediction is correct
when running it and the gold snippet on identical fresh copies of the
store and model state produces byte-equal (trimmed) logs and the same
resulting plan version and active constraint multiset.  An out-of-domain
record is correct simply when the prediction routed it out of domain.

Metrics follow the three report columns: overall accuracy, coder accuracy
(in-domain records only), and F-1 over the out-of-domain class.  Costs
are computed in cents, either per-token or as an amortized GPU rate.
"""

from __future__ import annotations

import json
import logging
import statistics
from collections import Counter
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP
from pathlib import Path
from typing import Optional, Sequence

from .dsl import OK, DEFAULT_STEP_BUDGET, ExecEnv, run_source
from .model import PlanningInstance
from .query import TableStore
from .router import RouterError, TokenUsage
from .solver import ModelState, PlanStore

logger = logging.getLogger(__name__)

PER_TOKEN = "per_token"
GPU_AMORTIZED = "gpu_amortized"

_CENT = Decimal("0.01")


class FixtureError(Exception):
    """The gold snippet itself failed: a test-set bug, not a model miss."""


class EvalError(Exception):
    pass


@dataclass
class EvalRecord:
    query: str
    gold_in_domain: bool
    gold_task_id: Optional[str] = None
    gold_snippet: Optional[str] = None
    predicted_in_domain: Optional[bool] = None
    predicted_snippet: Optional[str] = None
    judged_correct: Optional[bool] = None
    model: str = ""
    method: str = ""
    usage: Optional[TokenUsage] = None


@dataclass(frozen=True)
class MetricsReport:
    overall_acc: float
    coder_acc: float
    f1_ood: float
    n_total: int
    n_in_domain: int
    n_ood: int


@dataclass(frozen=True)
class CostModel:
    kind: str
    input_price: Decimal = Decimal(0)  # dollars per million input tokens
    output_price: Decimal = Decimal(0)  # dollars per million output tokens
    gpu_hourly_rate: Decimal = Decimal(0)  # dollars per hour
    queries_per_hour: int = 0

    def __post_init__(self):
        if self.kind not in (PER_TOKEN, GPU_AMORTIZED):
            raise ValueError(f"unknown cost model kind: {self.kind!r}")
        for name in ("input_price", "output_price", "gpu_hourly_rate"):
            value = getattr(self, name)
            object.__setattr__(self, name, Decimal(str(value)))
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "CostModel":
        return cls(
            kind=data["kind"],
            input_price=Decimal(str(data.get("input_price", 0))),
            output_price=Decimal(str(data.get("output_price", 0))),
            gpu_hourly_rate=Decimal(str(data.get("gpu_hourly_rate", 0))),
            queries_per_hour=int(data.get("queries_per_hour", 0)),
        )


def load_cost_model(path) -> CostModel:
    return CostModel.from_dict(json.loads(Path(path).read_text()))


def query_cost(usage: TokenUsage, cm: CostModel) -> Decimal:
    """Cost of one query in cents, rounded half-up to 2 decimals."""
    if cm.kind == PER_TOKEN:
        dollars = (
            Decimal(str(usage.input_tokens)) * cm.input_price
            + Decimal(str(usage.output_tokens)) * cm.output_price
        ) / Decimal(1_000_000)
    else:
        if cm.queries_per_hour <= 0:
            raise ValueError("gpu_amortized cost model needs queries_per_hour > 0")
        dollars = cm.gpu_hourly_rate / Decimal(cm.queries_per_hour)
    return (dollars * 100).quantize(_CENT, rounding=ROUND_HALF_UP)


def trimmed(logs: Sequence[str]) -> list[str]:
    return [line.strip() for line in logs]


def _plan_version(plan_store: PlanStore) -> int:
    return 0 if plan_store.current is None else plan_store.current.version


def judge(
    record: EvalRecord,
    store: TableStore,
    model_snapshot: ModelState,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> bool:
    """Judge one record on fresh copies of the snapshot state."""
    if not record.gold_in_domain:
        return record.predicted_in_domain is False
    if record.gold_snippet is None:
        raise FixtureError(f"in-domain record without gold snippet: {record.query!r}")

    def run(snippet: str):
        env = ExecEnv(
            store=store,
            model=model_snapshot.clone(),
            plan_store=PlanStore(),
            step_budget=step_budget,
        )
        result = run_source(snippet, env)
        return result, env

    gold_result, gold_env = run(record.gold_snippet)
    if gold_result.status != OK:
        raise FixtureError(
            f"gold snippet failed ({gold_result.status}): {gold_result.error_detail}"
        )
    if record.predicted_in_domain is not True or not record.predicted_snippet:
        return False
    pred_result, pred_env = run(record.predicted_snippet)
    if pred_result.status != OK:
        return False
    if trimmed(gold_result.logs) != trimmed(pred_result.logs):
        return False
    if _plan_version(gold_env.plan_store) != _plan_version(pred_env.plan_store):
        return False
    return Counter(gold_env.model.active_constraints()) == Counter(
        pred_env.model.active_constraints()
    )


def judge_records(
    records: Sequence[EvalRecord],
    instance: PlanningInstance,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> None:
    """Judge in place against a solved-baseline snapshot of the instance."""
    store = TableStore.from_instance(instance)
    snapshot = ModelState(instance)
    snapshot.optimize()
    for record in records:
        record.judged_correct = judge(record, store, snapshot, step_budget)


def compute_metrics(records: Sequence[EvalRecord]) -> MetricsReport:
    if not records:
        raise EvalError("no records to score")
    for record in records:
        if record.judged_correct is None:
            raise EvalError(f"record not judged yet: {record.query!r}")
    total = len(records)
    correct = sum(1 for r in records if r.judged_correct)
    in_domain = [r for r in records if r.gold_in_domain]
    ood = [r for r in records if not r.gold_in_domain]

    overall = 100 * correct / total
    coder = (
        100 * sum(1 for r in in_domain if r.judged_correct) / len(in_domain)
        if in_domain
        else 100.0
    )

    if correct == total:
        f1 = 100.0
    else:
        tp = sum(1 for r in ood if r.predicted_in_domain is False)
        fp = sum(1 for r in in_domain if r.predicted_in_domain is False)
        fn = len(ood) - tp
        if tp == 0:
            f1 = 0.0
        else:
            precision = tp / (tp + fp)
            recall = tp / (tp + fn)
            f1 = 200 * precision * recall / (precision + recall)

    def pct(x: float) -> float:
        return float(Decimal(str(x)).quantize(_CENT, rounding=ROUND_HALF_UP))

    return MetricsReport(
        overall_acc=pct(overall),
        coder_acc=pct(coder),
        f1_ood=pct(f1),
        n_total=total,
        n_in_domain=len(in_domain),
        n_ood=len(ood),
    )


def mean_cost(records: Sequence[EvalRecord], cm: CostModel) -> Optional[Decimal]:
    """Average per-query cost in cents over records that carry usage."""
    costs = [query_cost(r.usage, cm) for r in records if r.usage is not None]
    if not costs:
        return None
    return (sum(costs) / len(costs)).quantize(_CENT, rounding=ROUND_HALF_UP)


@dataclass
class EvalRun:
    report: MetricsReport
    records: list[EvalRecord]
    mean_cost_cents: Optional[Decimal] = None


def run_eval(
    dataset,
    backend,
    cost_model: Optional[CostModel] = None,
    *,
    instance: Optional[PlanningInstance] = None,
    method: str = "",
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> EvalRun:
    """Route every dataset record through the backend, judge, aggregate.

    ``dataset`` is a sequence of taskgen DatasetRecords.  Transport
    failures mark the record failed (incorrect) and keep going.
    """
    if instance is None:
        instance = _default_instance()
    records: list[EvalRecord] = []
    method = method or getattr(backend, "kind", "")
    model_name = getattr(backend, "name", getattr(backend, "kind", "backend"))
    for item in dataset:
        record = EvalRecord(
            query=item.query,
            gold_in_domain=item.in_domain,
            gold_task_id=None if not item.in_domain else item.task_id,
            gold_snippet=item.gold_snippet,
            model=model_name,
            method=method,
        )
        try:
            decision, usage = backend.classify(item.query)
            record.predicted_in_domain = decision.in_domain
            if decision.in_domain:
                snippet, gen_usage = backend.generate(item.query, decision)
                record.predicted_snippet = snippet
                usage = usage + gen_usage
            record.usage = usage
        except RouterError as exc:
            logger.warning("backend failed on %r: %s", item.query, exc)
            record.judged_correct = False
        records.append(record)

    store = TableStore.from_instance(instance)
    snapshot = ModelState(instance)
    snapshot.optimize()
    for record in records:
        if record.judged_correct is None:
            record.judged_correct = judge(record, store, snapshot, step_budget)

    run = EvalRun(report=compute_metrics(records), records=records)
    if cost_model is not None:
        run.mean_cost_cents = mean_cost(records, cost_model)
    return run


def _default_instance() -> PlanningInstance:
    from .io import load_instance
    from .templates import data_path

    return load_instance(str(data_path("sample_instance")))


# ---------------------------------------------------------------------------
# predictions files

def load_predictions(path) -> list[EvalRecord]:
    records = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
            usage = None
            if "input_tokens" in data or "output_tokens" in data:
                usage = TokenUsage(
                    input_tokens=data.get("input_tokens", 0),
                    output_tokens=data.get("output_tokens", 0),
                )
            records.append(
                EvalRecord(
                    query=data["query"],
                    gold_in_domain=data["gold_in_domain"],
                    gold_task_id=data.get("gold_task_id"),
                    gold_snippet=data.get("gold_snippet"),
                    predicted_in_domain=data.get("predicted_in_domain"),
                    predicted_snippet=data.get("predicted_snippet"),
                    judged_correct=data.get("judged_correct"),
                    model=data.get("model", ""),
                    method=data.get("method", ""),
                    usage=usage,
                )
            )
        except (json.JSONDecodeError, KeyError) as exc:
            raise EvalError(f"{path} line {i + 1}: {exc}") from None
    return records


def record_to_jsonl_dict(record: EvalRecord) -> dict:
    data = {
        "query": record.query,
        "gold_in_domain": record.gold_in_domain,
        "gold_task_id": record.gold_task_id,
        "gold_snippet": record.gold_snippet,
        "predicted_in_domain": record.predicted_in_domain,
        "predicted_snippet": record.predicted_snippet,
        "judged_correct": record.judged_correct,
        "model": record.model,
        "method": record.method,
    }
    if record.usage is not None:
        data["input_tokens"] = record.usage.input_tokens
        data["output_tokens"] = record.usage.output_tokens
    return data


def write_predictions(records: Sequence[EvalRecord], path) -> None:
    lines = [
        json.dumps(record_to_jsonl_dict(r), sort_keys=True, ensure_ascii=False)
        for r in records
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# reports

_REPORT_COLUMNS = (
    "Model",
    "Method",
    "Overall Acc. (%)",
    "Coder Acc. (%)",
    "F-1 (%)",
    "Cost (¢)",
)


def report_rows(
    records: Sequence[EvalRecord], cost_model: Optional[CostModel] = None
) -> list[dict]:
    """Aggregate records into Table-style rows grouped by (model, method)."""
    groups: dict[tuple[str, str], list[EvalRecord]] = {}
    for record in records:
        groups.setdefault((record.model, record.method), []).append(record)
    rows = []
    for (model, method) in sorted(groups):
        group = groups[(model, method)]
        report = compute_metrics(group)
        cost = mean_cost(group, cost_model) if cost_model else None
        rows.append(
            {
                "model": model,
                "method": method,
                "report": report,
                "mean_cost_cents": cost,
            }
        )
    return rows


def _row_cells(row: dict) -> list[str]:
    report: MetricsReport = row["report"]
    cost = row["mean_cost_cents"]
    return [
        row["model"],
        row["method"],
        f"{report.overall_acc:.2f}",
        f"{report.coder_acc:.2f}",
        f"{report.f1_ood:.2f}",
        "-" if cost is None else f"{cost:.2f}",
    ]


def render_report_table(rows: Sequence[dict]) -> str:
    table = [list(_REPORT_COLUMNS)] + [_row_cells(row) for row in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(table[0]))]
    out = []
    for idx, line in enumerate(table):
        out.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip())
        if idx == 0:
            out.append("  ".join("-" * widths[i] for i in range(len(widths))))
    return "\n".join(out) + "\n"


def render_report_csv(rows: Sequence[dict]) -> str:
    out = ["model,method,overall_acc,coder_acc,f1_ood,mean_cost_cents"]
    for row in rows:
        report: MetricsReport = row["report"]
        cost = row["mean_cost_cents"]
        out.append(
            ",".join(
                [
                    row["model"],
                    row["method"],
                    f"{report.overall_acc:.2f}",
                    f"{report.coder_acc:.2f}",
                    f"{report.f1_ood:.2f}",
                    "" if cost is None else f"{cost:.2f}",
                ]
            )
        )
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# sweeps

def sweep(
    spec: dict,
    base_dir=None,
    instance: Optional[PlanningInstance] = None,
) -> str:
    """Accuracy-vs-shots CSV from per-cell predictions files.

    Spec schema: {"cells": [{"model": str, "shots": int, "runs": [path, ...]}]}.
    Each run file is a predictions JSONL; overall accuracy is averaged over
    runs and the population standard deviation reported alongside.  Cells
    whose files are missing are skipped with a warning.
    """
    base = Path(base_dir) if base_dir else Path(".")
    if instance is None:
        instance = _default_instance()
    lines = ["model,shots,overall_acc,stddev"]
    for cell in spec.get("cells", []):
        accuracies = []
        missing = False
        for run_path in cell.get("runs", []):
            path = Path(run_path)
            if not path.is_absolute():
                path = base / path
            if not path.exists():
                logger.warning(
                    "sweep: missing predictions file %s; dropping row "
                    "(model=%s shots=%s)",
                    path,
                    cell.get("model"),
                    cell.get("shots"),
                )
                missing = True
                break
            records = load_predictions(path)
            needs_judging = any(r.judged_correct is None for r in records)
            if needs_judging:
                judge_records(records, instance)
            accuracies.append(compute_metrics(records).overall_acc)
        if missing or not accuracies:
            continue
        avg = sum(accuracies) / len(accuracies)
        sd = statistics.pstdev(accuracies)
        lines.append(
            f"{cell['model']},{cell['shots']},{avg:.2f},{sd:.4f}"
        )
    return "\n".join(lines) + "\n"


def load_sweep_spec(path) -> dict:
    return json.loads(Path(path).read_text())
