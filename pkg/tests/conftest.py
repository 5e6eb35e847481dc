"""Shared fixtures and independent oracle helpers.

The oracles here deliberately re-derive behavior from first principles
(exhaustive enumeration, naive row scans, calendar arithmetic) rather
than calling back into the code paths they check.
"""

from __future__ import annotations

import datetime as dt
import itertools
from decimal import Decimal

import pytest

from fulfil import (
    CostConfig,
    Demand,
    Horizon,
    InventoryRecord,
    PlanningInstance,
    ShipmentRecord,
    ShippingMethod,
    Supplier,
)
from fulfil.io import load_instance
from fulfil.model import (
    DOCK_DATE,
    EXACT_MATCH,
    PROHIBIT,
    SHIPPING_METHOD,
    SUPPLY_PAIRING,
    WILDCARD,
)
from fulfil.router import HostContext
from fulfil.templates import data_path

WEEK0 = dt.date(2024, 1, 1)


# ---------------------------------------------------------------------------
# instance builders


def make_instance(
    demands,
    suppliers,
    methods,
    capacities,
    *,
    num_weeks=6,
    penalty="10",
    now=None,
    shipments=(),
    name="test",
):
    """Assemble an instance from terse tuples.

    demands: (id, racks, ideal_dock_week, dest_geo)
    suppliers: (id, region, src_geo)
    methods: (name, lead_time_weeks, cost_per_rack, cross_geo_multiplier)
    capacities: {(supplier_id, week): quantity}; absent pairs hold nothing
    """
    horizon = Horizon(num_weeks=num_weeks, week0_start=WEEK0)
    inventory = tuple(
        InventoryRecord(
            supplier_id=s,
            week=w,
            quantity=q,
            record_date=horizon.week_start(w),
        )
        for (s, w), q in sorted(capacities.items())
    )
    return PlanningInstance(
        demands=tuple(Demand(*d) for d in demands),
        suppliers=tuple(Supplier(*s) for s in suppliers),
        inventory=inventory,
        shipments=tuple(shipments),
        methods=tuple(
            ShippingMethod(n, lead, Decimal(str(c)), Decimal(str(m)))
            for n, lead, c, m in methods
        ),
        horizon=horizon,
        cost_config=CostConfig(lateness_penalty_per_week=Decimal(str(penalty))),
        now=now or horizon.week_start(num_weeks - 1),
        name=name,
    )


def tiny_instance():
    """One demand, one supplier, one method, ample stock every week."""
    return make_instance(
        demands=[("D", 5, 3, "A")],
        suppliers=[("s1", "east", "A")],
        methods=[("ground", 2, "1.0", "1.5")],
        capacities={("s1", w): 10 for w in range(6)},
    )


def random_instance(rng, *, max_demands=4, max_suppliers=3, max_methods=2, max_weeks=6):
    """Desk-scale random instance within the oracle-tractable envelope."""
    n_d = rng.randint(1, max_demands)
    n_s = rng.randint(1, max_suppliers)
    n_m = rng.randint(1, max_methods)
    n_w = rng.randint(1, max_weeks)
    geos = ("gA", "gB")
    demands = [
        (f"d{i}", rng.randint(1, 5), rng.randint(0, n_w + 1), rng.choice(geos))
        for i in range(n_d)
    ]
    suppliers = [
        (f"s{i}", rng.choice(("east", "west")), rng.choice(geos))
        for i in range(n_s)
    ]
    leads = sorted(rng.randint(0, 3) for _ in range(n_m))
    if n_m == 1:
        methods = [("ground", leads[0], rng.choice(("1", "1.5", "2.25")), rng.choice(("1", "1.5", "2")))]
    else:
        # the faster method must also carry the shorter lead time
        methods = [
            ("priority", leads[0], rng.choice(("2", "2.5")), rng.choice(("1", "1.5"))),
            ("ground", leads[1], rng.choice(("1", "1.5")), rng.choice(("1", "2"))),
        ]
    capacities = {}
    for i in range(n_s):
        for w in range(n_w):
            quantity = rng.randint(0, 8)
            if quantity:
                capacities[(f"s{i}", w)] = quantity
    return make_instance(
        demands,
        suppliers,
        methods,
        capacities,
        num_weeks=n_w,
        penalty=rng.choice(("10", "3.5")),
    )


# ---------------------------------------------------------------------------
# exhaustive-enumeration solve oracle

# oracle lines are plain tuples: (demand_id, supplier_id, method, ship_week,
# dock_week, cost_in_ten_thousandths)


def oracle_line_cost(demand, supplier, method, ship_week, cfg) -> int:
    dock = ship_week + method.lead_time_weeks
    shipping = Decimal(demand.racks) * method.cost_per_rack
    if supplier.src_geo != demand.dest_geo:
        shipping *= method.cross_geo_multiplier
    lateness = (
        Decimal(demand.racks)
        * cfg.lateness_penalty_per_week
        * abs(dock - demand.ideal_dock_week)
    )
    return int(((shipping + lateness) * 10000).to_integral_value())


def oracle_week_match(pattern, week: int, horizon: Horizon) -> bool:
    if pattern == WILDCARD:
        return True
    if isinstance(pattern, int):
        return pattern == week
    year, month = int(pattern[0:4]), int(pattern[5:7])
    start = horizon.week0_start + dt.timedelta(days=7 * week)
    return (start.year, start.month) == (year, month)


def oracle_allowed(line, constraints, horizon) -> bool:
    demand_id, supplier_id, method, ship_week, dock, _ = line

    def full_match(c):
        if c.demand_id not in (WILDCARD, demand_id):
            return False
        if c.kind == SUPPLY_PAIRING and c.supplier_id not in (WILDCARD, supplier_id):
            return False
        if c.kind == SHIPPING_METHOD and c.method not in (WILDCARD, method):
            return False
        week = dock if c.kind == DOCK_DATE else ship_week
        return oracle_week_match(c.week_or_pattern, week, horizon)

    for c in constraints:
        if c.enforce == PROHIBIT:
            if full_match(c):
                return False
            continue
        if c.demand_id not in (WILDCARD, demand_id):
            continue
        if c.kind == DOCK_DATE:
            ok = oracle_week_match(c.week_or_pattern, dock, horizon)
        elif c.kind == SUPPLY_PAIRING:
            ok = c.supplier_id in (WILDCARD, supplier_id) and oracle_week_match(
                c.week_or_pattern, ship_week, horizon
            )
        else:
            ok = c.method in (WILDCARD, method) and oracle_week_match(
                c.week_or_pattern, ship_week, horizon
            )
        if not ok:
            return False
    return True


def oracle_solve(instance, constraints=()):
    """Enumerate every complete assignment; return (best_key, best_combo).

    best_key = (total_cost_ten_thousandths, per-demand (supplier, method,
    ship_week) tuples in demand-id order) — i.e. cost then the documented
    lexicographic tie-break.  Returns (None, None) when infeasible.
    """
    horizon = instance.horizon
    demands = sorted(instance.demands, key=lambda d: d.id)
    racks = {d.id: d.racks for d in demands}
    capacity = {(r.supplier_id, r.week): r.quantity for r in instance.inventory}

    per_demand = []
    for d in demands:
        options = []
        for s in sorted(instance.suppliers, key=lambda s: s.id):
            for m in sorted(instance.methods, key=lambda m: m.name):
                for w in range(horizon.num_weeks):
                    if w + m.lead_time_weeks >= horizon.num_weeks:
                        continue  # must dock inside the horizon
                    line = (
                        d.id,
                        s.id,
                        m.name,
                        w,
                        w + m.lead_time_weeks,
                        oracle_line_cost(d, s, m, w, instance.cost_config),
                    )
                    if oracle_allowed(line, constraints, horizon):
                        options.append(line)
        per_demand.append(options)

    best_key = None
    best_combo = None
    for combo in itertools.product(*per_demand):
        used = {}
        feasible = True
        for line in combo:
            slot = (line[1], line[3])
            used[slot] = used.get(slot, 0) + racks[line[0]]
            if used[slot] > capacity.get(slot, 0):
                feasible = False
                break
        if not feasible:
            continue
        key = (
            sum(line[5] for line in combo),
            tuple((line[1], line[2], line[3]) for line in combo),
        )
        if best_key is None or key < best_key:
            best_key, best_combo = key, combo
    return best_key, best_combo


def outcome_key(outcome):
    """Project a solver outcome onto the oracle's comparison key."""
    lines = sorted(outcome.assignment, key=lambda l: l.demand_id)
    return (
        int((outcome.objective * 10000).to_integral_value()),
        tuple((l.supplier_id, l.method, l.ship_week) for l in lines),
    )


# ---------------------------------------------------------------------------
# fixtures


@pytest.fixture(scope="session")
def sample_instance():
    return load_instance(data_path("sample_instance"))


@pytest.fixture()
def hosts(sample_instance):
    return HostContext.for_instance(sample_instance)


@pytest.fixture()
def empty_shipment_instance(sample_instance):
    return PlanningInstance(
        demands=sample_instance.demands,
        suppliers=sample_instance.suppliers,
        inventory=sample_instance.inventory,
        shipments=(),
        methods=sample_instance.methods,
        horizon=sample_instance.horizon,
        cost_config=sample_instance.cost_config,
        now=sample_instance.now,
        name="empty-shipments",
    )
