"""Exact assignment solver and what-if scenario analysis.

Every demand gets exactly one (supplier, method, ship_week) line; supplier
inventory is consumed per (supplier, week) slot.  The search is plain
branch and bound over demands ordered by descending rack count: candidate
lines are pre-filtered against the active constraints, sorted by cost with
a lexicographic tie-break, and partial branches are pruned with a
capacity-free lower bound.  Costs are integer ten-thousandths of a unit
internally, so objective comparisons are exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Optional, Sequence

from .model import (
    Constraint,
    InvalidInstanceError,
    Plan,
    PlanLine,
    PlanningInstance,
    dock_week,
    line_allowed,
    line_cost,
    validate_instance,
)

BASELINE = "baseline"
SCENARIO = "scenario"

_TICKS = 10_000  # fixed-point ticks per cost unit


class SolverError(Exception):
    """Base class for solver-layer errors."""


class StateError(SolverError):
    """An operation was called in a state that cannot support it."""


class CommitError(SolverError):
    """A plan commit was attempted without a feasible solve."""


@dataclass(frozen=True)
class SolveOutcome:
    feasible: bool
    objective: Optional[Decimal]
    assignment: Optional[tuple[PlanLine, ...]]
    nodes_explored: int


@dataclass(frozen=True)
class WhatIfResult:
    feasible: bool
    scenario_objective: Optional[Decimal]
    delta_vs_baseline: Optional[Decimal]


def _candidate_lines(
    instance: PlanningInstance,
    demand,
    constraints: Sequence[Constraint],
    capacity: dict,
) -> list[tuple[int, PlanLine]]:
    """All feasible lines for one demand, cheapest first.

    Ties break lexicographically on (supplier_id, method name, ship_week)
    so the solver is deterministic regardless of input ordering.
    """
    options = []
    for supplier in instance.suppliers:
        for method in instance.methods:
            for ship_week in instance.horizon.weeks():
                dock = dock_week(ship_week, method)
                if dock >= instance.horizon.num_weeks:
                    continue
                if capacity.get((supplier.id, ship_week), 0) < demand.racks:
                    continue
                cost = line_cost(
                    demand, supplier, method, ship_week, instance.cost_config
                )
                line = PlanLine(
                    demand_id=demand.id,
                    supplier_id=supplier.id,
                    method=method.name,
                    ship_week=ship_week,
                    dock_week=dock,
                    line_cost=cost,
                )
                if not line_allowed(line, constraints, instance.horizon):
                    continue
                options.append((int(cost * _TICKS), line))
    options.sort(
        key=lambda item: (
            item[0],
            item[1].supplier_id,
            item[1].method,
            item[1].ship_week,
        )
    )
    return options


def solve(
    instance: PlanningInstance, constraints: Sequence[Constraint] = ()
) -> SolveOutcome:
    """Minimize total plan cost subject to inventory and constraints.

    Returns the cheapest complete assignment; among equal-cost optima the
    lexicographically smallest assignment (by demand id, then supplier id,
    method, ship week) wins.  Raises InvalidInstanceError when the instance
    fails validation.
    """
    problems = validate_instance(instance)
    if problems:
        raise InvalidInstanceError(problems)

    demands = sorted(instance.demands, key=lambda d: (-d.racks, d.id))
    capacity = instance.capacity_map()
    constraints = list(constraints)

    per_demand = [
        _candidate_lines(instance, d, constraints, capacity) for d in demands
    ]
    nodes = 0
    if any(not options for options in per_demand):
        return SolveOutcome(False, None, None, nodes)

    n = len(demands)
    # capacity-free lower bound on the cost of completing from position i
    suffix_min = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_min[i] = suffix_min[i + 1] + per_demand[i][0][0]

    best_ticks: Optional[int] = None
    best_key: Optional[tuple] = None
    best_lines: Optional[list[PlanLine]] = None
    chosen: list[PlanLine] = []

    def lex_key(lines: Iterable[PlanLine]) -> tuple:
        return tuple(
            (l.demand_id, l.supplier_id, l.method, l.ship_week)
            for l in sorted(lines, key=lambda l: l.demand_id)
        )

    def descend(i: int, acc: int) -> None:
        nonlocal best_ticks, best_key, best_lines, nodes
        if best_ticks is not None and acc + suffix_min[i] > best_ticks:
            return
        if i == n:
            key = lex_key(chosen)
            if best_ticks is None or acc < best_ticks or (
                acc == best_ticks and key < best_key
            ):
                best_ticks = acc
                best_key = key
                best_lines = list(chosen)
            return
        racks = demands[i].racks
        for ticks, line in per_demand[i]:
            nodes += 1
            slot = (line.supplier_id, line.ship_week)
            if capacity.get(slot, 0) < racks:
                continue
            capacity[slot] -= racks
            chosen.append(line)
            descend(i + 1, acc + ticks)
            chosen.pop()
            capacity[slot] += racks

    descend(0, 0)

    if best_lines is None:
        return SolveOutcome(False, None, None, nodes)
    lines = tuple(sorted(best_lines, key=lambda l: l.demand_id))
    objective = Decimal(best_ticks).scaleb(-4).quantize(Decimal("0.0001"))
    return SolveOutcome(True, objective, lines, nodes)


class ModelState:
    """Mutable wrapper: an instance plus baseline/scenario constraint sets
    and the outcome of the most recent solve."""

    def __init__(
        self,
        instance: PlanningInstance,
        baseline_constraints: Sequence[Constraint] = (),
    ):
        self.instance = instance
        self.baseline_constraints: list[Constraint] = list(baseline_constraints)
        self.scenario_constraints: list[Constraint] = []
        self.last_outcome: Optional[SolveOutcome] = None

    def active_constraints(self) -> list[Constraint]:
        return self.baseline_constraints + self.scenario_constraints

    def add_constraint(self, constraint: Constraint, scope: str = SCENARIO) -> None:
        if scope == BASELINE:
            self.baseline_constraints.append(constraint)
        elif scope == SCENARIO:
            self.scenario_constraints.append(constraint)
        else:
            raise ValueError(f"unknown constraint scope: {scope!r}")

    def reset(self) -> None:
        """Drop all scenario constraints; baseline constraints survive."""
        self.scenario_constraints.clear()

    def optimize(self) -> SolveOutcome:
        outcome = solve(self.instance, self.active_constraints())
        self.last_outcome = outcome
        return outcome

    def what_if(self, constraints: Sequence[Constraint]) -> WhatIfResult:
        """Cost delta of adding ``constraints`` on top of the current state.

        Requires a prior feasible solve as the baseline.  The model is
        restored exactly afterwards: scenario constraints, baseline
        constraints and last outcome are all as before the call.
        """
        if self.last_outcome is None:
            raise StateError("what_if requires a prior optimize() call")
        if not self.last_outcome.feasible:
            raise StateError("what_if requires a feasible baseline outcome")
        baseline = self.last_outcome
        saved_scenario = list(self.scenario_constraints)
        try:
            for c in constraints:
                self.add_constraint(c, SCENARIO)
            outcome = self.optimize()
        finally:
            self.scenario_constraints = saved_scenario
            self.last_outcome = baseline
        if not outcome.feasible:
            return WhatIfResult(False, None, None)
        return WhatIfResult(
            True, outcome.objective, outcome.objective - baseline.objective
        )

    def clone(self) -> "ModelState":
        """Independent copy sharing only the immutable instance."""
        twin = ModelState(self.instance, self.baseline_constraints)
        twin.scenario_constraints = list(self.scenario_constraints)
        twin.last_outcome = self.last_outcome
        return twin


class PlanStore:
    """Committed plans: the current one plus full history, versions from 1."""

    def __init__(self):
        self.current: Optional[Plan] = None
        self.history: list[Plan] = []

    def commit(self, outcome: SolveOutcome) -> Plan:
        if outcome is None or not outcome.feasible:
            raise CommitError("cannot commit: no feasible solve outcome")
        version = 1 if self.current is None else self.current.version + 1
        plan = Plan(
            lines=outcome.assignment,
            total_cost=outcome.objective,
            version=version,
        )
        self.current = plan
        self.history.append(plan)
        return plan
