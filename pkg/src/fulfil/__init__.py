"""Fulfillment-planning copilot: exact planner, query engine, restricted
snippet language, query router, synthetic data generation, execution-based
evaluation, and an HTTP service tying them together."""

from .model import (
    Constraint,
    CostConfig,
    Demand,
    Horizon,
    InvalidInstanceError,
    InventoryRecord,
    ModelError,
    PatternError,
    Plan,
    PlanLine,
    PlanningInstance,
    ShipmentRecord,
    ShippingMethod,
    Supplier,
    EXACT_MATCH,
    PROHIBIT,
    WILDCARD,
    line_cost,
    validate_instance,
)
from .io import InstanceLoadError, load_instance, plan_to_dict, write_instance
from .solver import (
    CommitError,
    ModelState,
    PlanStore,
    SolveOutcome,
    SolverError,
    StateError,
    WhatIfResult,
    solve,
)
from .query import (
    QueryEvalError,
    QuerySyntaxError,
    TableStore,
    eval_query,
    parse_query,
    retrieve,
    to_sql,
)
from .dsl import (
    DslParseError,
    DslRuntimeError,
    ExecEnv,
    ExecutionResult,
    is_mutating,
    parse_script,
    render_value,
    run_source,
)
from .templates import TaskTemplate, load_ood_pool, load_templates
from .router import (
    Answer,
    FixtureBackend,
    HostContext,
    RemoteBackend,
    RouteDecision,
    RouterError,
    TokenUsage,
    count_tokens,
    handle_query,
)
from .taskgen import (
    DatasetRecord,
    PerturbationConfig,
    TRAINING_CONFIG,
    generate_dataset,
    load_dataset,
    write_dataset,
)
from .harness import (
    CostModel,
    EvalRecord,
    FixtureError,
    MetricsReport,
    compute_metrics,
    judge,
    query_cost,
    run_eval,
    sweep,
)
from .service import create_app

__version__ = "0.1.0"

__all__ = [
    "Answer",
    "CommitError",
    "Constraint",
    "CostConfig",
    "CostModel",
    "DatasetRecord",
    "Demand",
    "DslParseError",
    "DslRuntimeError",
    "EXACT_MATCH",
    "EvalRecord",
    "ExecEnv",
    "ExecutionResult",
    "FixtureBackend",
    "FixtureError",
    "Horizon",
    "HostContext",
    "InstanceLoadError",
    "InvalidInstanceError",
    "InventoryRecord",
    "MetricsReport",
    "ModelError",
    "ModelState",
    "PatternError",
    "PerturbationConfig",
    "Plan",
    "PlanLine",
    "PlanStore",
    "PlanningInstance",
    "PROHIBIT",
    "QueryEvalError",
    "QuerySyntaxError",
    "RemoteBackend",
    "RouteDecision",
    "RouterError",
    "ShipmentRecord",
    "ShippingMethod",
    "SolveOutcome",
    "SolverError",
    "StateError",
    "Supplier",
    "TableStore",
    "TaskTemplate",
    "TokenUsage",
    "TRAINING_CONFIG",
    "WILDCARD",
    "WhatIfResult",
    "compute_metrics",
    "count_tokens",
    "create_app",
    "eval_query",
    "generate_dataset",
    "handle_query",
    "is_mutating",
    "judge",
    "line_cost",
    "load_dataset",
    "load_instance",
    "load_ood_pool",
    "load_templates",
    "parse_query",
    "parse_script",
    "plan_to_dict",
    "query_cost",
    "render_value",
    "retrieve",
    "run_eval",
    "run_source",
    "solve",
    "sweep",
    "to_sql",
    "validate_instance",
    "write_dataset",
    "write_instance",
]
