"""Core domain model for rack fulfillment planning.

Time is discretized into weeks indexed from 0; week ``w`` starts at
``horizon.week0_start + 7*w`` days.  Money is fixed-point: every cost is a
``Decimal`` quantized to four decimal places (half-up), so totals are exact
and reproducible across platforms.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field, replace
from decimal import Decimal, ROUND_HALF_UP
from typing import Iterable, Mapping, Optional, Sequence, Union

WILDCARD = "*"

# constraint kinds
DOCK_DATE = "DockDate"
SUPPLY_PAIRING = "SupplyPairing"
SHIPPING_METHOD = "ShippingMethod"
CONSTRAINT_KINDS = (DOCK_DATE, SUPPLY_PAIRING, SHIPPING_METHOD)

# enforcement modes
EXACT_MATCH = "Exact Match"
PROHIBIT = "Prohibit"
ENFORCE_MODES = (EXACT_MATCH, PROHIBIT)

COST_QUANTUM = Decimal("0.0001")

_MONTH_PATTERN_RE = re.compile(r"^(\d{4})-(\d{2})-\*$")

# A week slot in a constraint: a concrete week index, a "YYYY-MM-*" month
# pattern, or the wildcard.
WeekPattern = Union[int, str]


class ModelError(Exception):
    """Base class for domain-model errors."""


class PatternError(ModelError):
    """Raised for malformed week/month patterns."""


class InvalidInstanceError(ModelError):
    """Raised when a planning instance fails validation."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def quantize_cost(value) -> Decimal:
    """Quantize a money amount to the fixed four-decimal grid, half-up."""
    return Decimal(value).quantize(COST_QUANTUM, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class Demand:
    id: str
    racks: int
    ideal_dock_week: int
    dest_geo: str


@dataclass(frozen=True)
class Supplier:
    id: str
    region: str
    src_geo: str


@dataclass(frozen=True)
class InventoryRecord:
    supplier_id: str
    week: int
    quantity: int
    record_date: dt.date


@dataclass(frozen=True)
class ShippingMethod:
    name: str
    lead_time_weeks: int
    cost_per_rack: Decimal
    cross_geo_multiplier: Decimal


@dataclass(frozen=True)
class ShipmentRecord:
    """A historical shipment row (data queries only; not planned lines)."""

    date: dt.date
    quantity: int
    src_geo: str
    dest_geo: str
    method: str


@dataclass(frozen=True)
class Horizon:
    num_weeks: int
    week0_start: dt.date

    def week_start(self, week: int) -> dt.date:
        return self.week0_start + dt.timedelta(days=7 * week)

    def weeks(self) -> range:
        return range(self.num_weeks)


@dataclass(frozen=True)
class CostConfig:
    lateness_penalty_per_week: Decimal


@dataclass(frozen=True)
class Constraint:
    """A planning restriction, enforced either way ("Exact Match"/"Prohibit").

    ``demand_id`` scopes the constraint; ``"*"`` means all demands.  The week
    slot accepts a concrete week index, a month pattern like ``"2024-02-*"``,
    or ``"*"``.  ``supplier_id`` is meaningful for SupplyPairing constraints,
    ``method`` for ShippingMethod constraints.
    """

    kind: str
    enforce: str
    demand_id: str = WILDCARD
    supplier_id: str = WILDCARD
    week_or_pattern: WeekPattern = WILDCARD
    method: str = WILDCARD

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise PatternError(f"unknown constraint kind: {self.kind!r}")
        if self.enforce not in ENFORCE_MODES:
            raise PatternError(f"unknown enforcement mode: {self.enforce!r}")
        # normalize/validate the week slot eagerly so bad patterns fail at
        # construction, not mid-solve
        object.__setattr__(
            self, "week_or_pattern", parse_week_pattern(self.week_or_pattern)
        )


@dataclass(frozen=True)
class PlanLine:
    demand_id: str
    supplier_id: str
    method: str
    ship_week: int
    dock_week: int
    line_cost: Decimal


@dataclass(frozen=True)
class Plan:
    lines: tuple[PlanLine, ...]
    total_cost: Decimal
    version: int


@dataclass(frozen=True)
class PlanningInstance:
    """An immutable bundle of all planning inputs."""

    demands: tuple[Demand, ...]
    suppliers: tuple[Supplier, ...]
    inventory: tuple[InventoryRecord, ...]
    shipments: tuple[ShipmentRecord, ...]
    methods: tuple[ShippingMethod, ...]
    horizon: Horizon
    cost_config: CostConfig
    now: dt.date
    name: str = "instance"

    def demand(self, demand_id: str) -> Demand:
        for d in self.demands:
            if d.id == demand_id:
                return d
        raise KeyError(demand_id)

    def supplier(self, supplier_id: str) -> Supplier:
        for s in self.suppliers:
            if s.id == supplier_id:
                return s
        raise KeyError(supplier_id)

    def method(self, name: str) -> ShippingMethod:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def capacity_map(self) -> dict[tuple[str, int], int]:
        """Available quantity per (supplier_id, week); missing rows mean 0."""
        return {(r.supplier_id, r.week): r.quantity for r in self.inventory}


def parse_week_pattern(raw) -> WeekPattern:
    """Normalize a week slot: int week index, "YYYY-MM-*", or "*"."""
    if isinstance(raw, bool):
        raise PatternError(f"bad week pattern: {raw!r}")
    if isinstance(raw, int):
        if raw < 0:
            raise PatternError(f"week index must be >= 0, got {raw}")
        return raw
    if isinstance(raw, str):
        text = raw.strip()
        if text == WILDCARD:
            return WILDCARD
        if _MONTH_PATTERN_RE.match(text):
            month = int(text[5:7])
            if not 1 <= month <= 12:
                raise PatternError(f"bad month in pattern: {raw!r}")
            return text
        if text.lstrip("-").isdigit():
            return parse_week_pattern(int(text))
    raise PatternError(f"bad week pattern: {raw!r}")


def week_matches(pattern: WeekPattern, week: int, horizon: Horizon) -> bool:
    """True if ``week`` satisfies the pattern under the horizon calendar."""
    pattern = parse_week_pattern(pattern)
    if pattern == WILDCARD:
        return True
    if isinstance(pattern, int):
        return week == pattern
    start = horizon.week_start(week)
    return (start.year, start.month) == (int(pattern[:4]), int(pattern[5:7]))


def dock_week(ship_week: int, method: ShippingMethod) -> int:
    return ship_week + method.lead_time_weeks


def line_cost(
    demand: Demand,
    supplier: Supplier,
    method: ShippingMethod,
    ship_week: int,
    cost_config: CostConfig,
) -> Decimal:
    """Fixed-point cost of one plan line: shipping plus lateness penalty.

    Shipping is racks * cost_per_rack, multiplied by the cross-geo factor
    when the supplier's geo differs from the demand's.  Lateness is charged
    per rack per week of |dock - ideal| deviation, early or late.
    """
    shipping = Decimal(demand.racks) * method.cost_per_rack
    if supplier.src_geo != demand.dest_geo:
        shipping *= method.cross_geo_multiplier
    deviation = abs(dock_week(ship_week, method) - demand.ideal_dock_week)
    penalty = (
        Decimal(demand.racks)
        * cost_config.lateness_penalty_per_week
        * deviation
    )
    return quantize_cost(shipping + penalty)


def constraint_matches(c: Constraint, line: PlanLine, horizon: Horizon) -> bool:
    """Full match: the line satisfies every populated field of ``c``.

    Used directly for Prohibit semantics (a prohibited pattern may not be
    fully matched by any line).
    """
    if c.demand_id != WILDCARD and c.demand_id != line.demand_id:
        return False
    if c.kind == SUPPLY_PAIRING:
        if c.supplier_id != WILDCARD and c.supplier_id != line.supplier_id:
            return False
    if c.kind == SHIPPING_METHOD:
        if c.method != WILDCARD and c.method != line.method:
            return False
    week = line.dock_week if c.kind == DOCK_DATE else line.ship_week
    return week_matches(c.week_or_pattern, week, horizon)


def line_allowed(
    line: PlanLine, constraints: Iterable[Constraint], horizon: Horizon
) -> bool:
    """Check one candidate line against every active constraint.

    Prohibit constraints forbid fully matching lines.  Exact Match
    constraints require every line in their demand scope to satisfy the
    constraint's value fields.
    """
    for c in constraints:
        if c.enforce == PROHIBIT:
            if constraint_matches(c, line, horizon):
                return False
            continue
        # Exact Match: only lines in the demand scope are restricted
        if c.demand_id != WILDCARD and c.demand_id != line.demand_id:
            continue
        if c.kind == DOCK_DATE:
            ok = week_matches(c.week_or_pattern, line.dock_week, horizon)
        elif c.kind == SUPPLY_PAIRING:
            ok = (
                c.supplier_id in (WILDCARD, line.supplier_id)
                and week_matches(c.week_or_pattern, line.ship_week, horizon)
            )
        else:  # ShippingMethod
            ok = (
                c.method in (WILDCARD, line.method)
                and week_matches(c.week_or_pattern, line.ship_week, horizon)
            )
        if not ok:
            return False
    return True


def validate_instance(instance: PlanningInstance) -> list[str]:
    """Return a list of human-readable violations; empty means valid."""
    problems: list[str] = []
    if instance.horizon.num_weeks < 1:
        problems.append(
            f"horizon: num_weeks must be >= 1, got {instance.horizon.num_weeks}"
        )
    if instance.cost_config.lateness_penalty_per_week < 0:
        problems.append("cost_config: lateness_penalty_per_week must be >= 0")

    seen_demands: set[str] = set()
    for d in instance.demands:
        if d.id in seen_demands:
            problems.append(f"demand {d.id}: duplicate id")
        seen_demands.add(d.id)
        if d.racks < 1:
            problems.append(f"demand {d.id}: racks must be >= 1, got {d.racks}")
        if d.ideal_dock_week < 0:
            problems.append(
                f"demand {d.id}: ideal_dock_week must be >= 0, got {d.ideal_dock_week}"
            )

    seen_suppliers: set[str] = set()
    for s in instance.suppliers:
        if s.id in seen_suppliers:
            problems.append(f"supplier {s.id}: duplicate id")
        seen_suppliers.add(s.id)

    seen_methods: set[str] = set()
    for m in instance.methods:
        if m.name in seen_methods:
            problems.append(f"method {m.name}: duplicate name")
        seen_methods.add(m.name)
        if m.lead_time_weeks < 0:
            problems.append(
                f"method {m.name}: lead_time_weeks must be >= 0, got {m.lead_time_weeks}"
            )
        if m.cost_per_rack < 0:
            problems.append(f"method {m.name}: cost_per_rack must be >= 0")
        if m.cross_geo_multiplier < 1:
            problems.append(
                f"method {m.name}: cross_geo_multiplier must be >= 1"
            )

    seen_slots: set[tuple[str, int]] = set()
    for r in instance.inventory:
        key = (r.supplier_id, r.week)
        if key in seen_slots:
            problems.append(
                f"inventory ({r.supplier_id}, week {r.week}): duplicate slot"
            )
        seen_slots.add(key)
        if r.quantity < 0:
            problems.append(
                f"inventory ({r.supplier_id}, week {r.week}): quantity must be >= 0"
            )
        if r.supplier_id not in seen_suppliers:
            problems.append(
                f"inventory ({r.supplier_id}, week {r.week}): unknown supplier"
            )
        if r.week < 0:
            problems.append(
                f"inventory ({r.supplier_id}, week {r.week}): week must be >= 0"
            )

    for i, rec in enumerate(instance.shipments):
        if rec.quantity < 1:
            problems.append(f"shipment row {i}: quantity must be >= 1")
        if rec.method and rec.method not in seen_methods:
            problems.append(f"shipment row {i}: unknown method {rec.method!r}")

    return problems
