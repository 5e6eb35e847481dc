"""Loading and serializing planning instances and plans.

An instance directory holds four CSV tables plus two JSON files:

    demand.csv     id,racks,ideal_dock_week,dest_geo
    supplier.csv   id,region,src_geo
    inventory.csv  supplier_id,week,quantity,record_date
    shipment.csv   date,quantity,src_geo,dest_geo,method
    methods.csv    name,lead_time_weeks,cost_per_rack,cross_geo_multiplier
    horizon.json   {"num_weeks": ..., "week0_start": "YYYY-MM-DD", "now": "YYYY-MM-DD"}
    cost_config.json  {"lateness_penalty_per_week": ...}

Dates are ISO; money fields are parsed into fixed-point Decimal.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional

from .model import (
    CostConfig,
    Demand,
    Horizon,
    InventoryRecord,
    Plan,
    PlanningInstance,
    ShipmentRecord,
    ShippingMethod,
    Supplier,
    quantize_cost,
)


class InstanceLoadError(Exception):
    """Raised for missing files, bad headers, or unparseable cells."""


_CSV_HEADERS = {
    "demand.csv": ["id", "racks", "ideal_dock_week", "dest_geo"],
    "supplier.csv": ["id", "region", "src_geo"],
    "inventory.csv": ["supplier_id", "week", "quantity", "record_date"],
    "shipment.csv": ["date", "quantity", "src_geo", "dest_geo", "method"],
    "methods.csv": ["name", "lead_time_weeks", "cost_per_rack", "cross_geo_multiplier"],
}


def _read_rows(path: Path, filename: str) -> list[dict]:
    file = path / filename
    if not file.exists():
        raise InstanceLoadError(f"{filename}: file not found in {path}")
    with open(file, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        expected = _CSV_HEADERS[filename]
        if header != expected:
            raise InstanceLoadError(
                f"{filename}: expected header {','.join(expected)}, got "
                f"{','.join(header or [])}"
            )
        return list(reader)


def _cell_int(filename: str, row: int, column: str, raw: str) -> int:
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise InstanceLoadError(
            f"{filename} row {row}: column {column!r} is not an integer: {raw!r}"
        ) from None


def _cell_decimal(filename: str, row: int, column: str, raw: str) -> Decimal:
    try:
        return quantize_cost(Decimal(raw))
    except (InvalidOperation, TypeError, ValueError):
        raise InstanceLoadError(
            f"{filename} row {row}: column {column!r} is not a number: {raw!r}"
        ) from None


def _cell_date(filename: str, row: int, column: str, raw: str) -> dt.date:
    try:
        return dt.date.fromisoformat(raw)
    except (TypeError, ValueError):
        raise InstanceLoadError(
            f"{filename} row {row}: column {column!r} is not an ISO date: {raw!r}"
        ) from None


def _read_json(path: Path, filename: str) -> dict:
    file = path / filename
    if not file.exists():
        raise InstanceLoadError(f"{filename}: file not found in {path}")
    try:
        with open(file) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InstanceLoadError(f"{filename}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise InstanceLoadError(f"{filename}: expected a JSON object")
    return data


def load_instance(path, *, now: Optional[dt.date] = None) -> PlanningInstance:
    """Load a planning instance from a directory of CSV/JSON files.

    ``now`` overrides the clock used by relative date windows; it defaults
    to the "now" key in horizon.json, falling back to week0_start.
    """
    path = Path(path)
    demands = tuple(
        Demand(
            id=row["id"],
            racks=_cell_int("demand.csv", i + 2, "racks", row["racks"]),
            ideal_dock_week=_cell_int(
                "demand.csv", i + 2, "ideal_dock_week", row["ideal_dock_week"]
            ),
            dest_geo=row["dest_geo"],
        )
        for i, row in enumerate(_read_rows(path, "demand.csv"))
    )
    suppliers = tuple(
        Supplier(id=row["id"], region=row["region"], src_geo=row["src_geo"])
        for row in _read_rows(path, "supplier.csv")
    )
    inventory = tuple(
        InventoryRecord(
            supplier_id=row["supplier_id"],
            week=_cell_int("inventory.csv", i + 2, "week", row["week"]),
            quantity=_cell_int("inventory.csv", i + 2, "quantity", row["quantity"]),
            record_date=_cell_date(
                "inventory.csv", i + 2, "record_date", row["record_date"]
            ),
        )
        for i, row in enumerate(_read_rows(path, "inventory.csv"))
    )
    shipments = tuple(
        ShipmentRecord(
            date=_cell_date("shipment.csv", i + 2, "date", row["date"]),
            quantity=_cell_int("shipment.csv", i + 2, "quantity", row["quantity"]),
            src_geo=row["src_geo"],
            dest_geo=row["dest_geo"],
            method=row["method"],
        )
        for i, row in enumerate(_read_rows(path, "shipment.csv"))
    )
    methods = tuple(
        ShippingMethod(
            name=row["name"],
            lead_time_weeks=_cell_int(
                "methods.csv", i + 2, "lead_time_weeks", row["lead_time_weeks"]
            ),
            cost_per_rack=_cell_decimal(
                "methods.csv", i + 2, "cost_per_rack", row["cost_per_rack"]
            ),
            cross_geo_multiplier=_cell_decimal(
                "methods.csv", i + 2, "cross_geo_multiplier", row["cross_geo_multiplier"]
            ),
        )
        for i, row in enumerate(_read_rows(path, "methods.csv"))
    )

    horizon_raw = _read_json(path, "horizon.json")
    for key in ("num_weeks", "week0_start"):
        if key not in horizon_raw:
            raise InstanceLoadError(f"horizon.json: missing key {key!r}")
    horizon = Horizon(
        num_weeks=_cell_int("horizon.json", 1, "num_weeks", horizon_raw["num_weeks"]),
        week0_start=_cell_date(
            "horizon.json", 1, "week0_start", horizon_raw["week0_start"]
        ),
    )
    if now is None:
        if "now" in horizon_raw:
            now = _cell_date("horizon.json", 1, "now", horizon_raw["now"])
        else:
            now = horizon.week0_start

    cost_raw = _read_json(path, "cost_config.json")
    if "lateness_penalty_per_week" not in cost_raw:
        raise InstanceLoadError(
            "cost_config.json: missing key 'lateness_penalty_per_week'"
        )
    cost_config = CostConfig(
        lateness_penalty_per_week=_cell_decimal(
            "cost_config.json",
            1,
            "lateness_penalty_per_week",
            str(cost_raw["lateness_penalty_per_week"]),
        )
    )

    return PlanningInstance(
        demands=demands,
        suppliers=suppliers,
        inventory=inventory,
        shipments=shipments,
        methods=methods,
        horizon=horizon,
        cost_config=cost_config,
        now=now,
        name=path.name,
    )


def write_instance(instance: PlanningInstance, path) -> None:
    """Write an instance back out as the CSV/JSON directory layout."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)

    def dump(filename: str, rows: list[list]) -> None:
        with open(path / filename, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADERS[filename])
            writer.writerows(rows)

    dump(
        "demand.csv",
        [[d.id, d.racks, d.ideal_dock_week, d.dest_geo] for d in instance.demands],
    )
    dump(
        "supplier.csv",
        [[s.id, s.region, s.src_geo] for s in instance.suppliers],
    )
    dump(
        "inventory.csv",
        [
            [r.supplier_id, r.week, r.quantity, r.record_date.isoformat()]
            for r in instance.inventory
        ],
    )
    dump(
        "shipment.csv",
        [
            [r.date.isoformat(), r.quantity, r.src_geo, r.dest_geo, r.method]
            for r in instance.shipments
        ],
    )
    dump(
        "methods.csv",
        [
            [m.name, m.lead_time_weeks, str(m.cost_per_rack), str(m.cross_geo_multiplier)]
            for m in instance.methods
        ],
    )
    with open(path / "horizon.json", "w") as fh:
        json.dump(
            {
                "num_weeks": instance.horizon.num_weeks,
                "week0_start": instance.horizon.week0_start.isoformat(),
                "now": instance.now.isoformat(),
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    with open(path / "cost_config.json", "w") as fh:
        json.dump(
            {
                "lateness_penalty_per_week": str(
                    instance.cost_config.lateness_penalty_per_week
                )
            },
            fh,
            indent=2,
        )
        fh.write("\n")


def plan_to_dict(plan: Plan, instance: Optional[PlanningInstance] = None) -> dict:
    """JSON-friendly plan payload; includes each demand's ideal dock week
    when the instance is supplied (lets a UI flag late docking directly)."""
    lines = []
    for line in plan.lines:
        entry = {
            "demand_id": line.demand_id,
            "supplier_id": line.supplier_id,
            "method": line.method,
            "ship_week": line.ship_week,
            "dock_week": line.dock_week,
            "line_cost": str(line.line_cost),
        }
        if instance is not None:
            entry["ideal_dock_week"] = instance.demand(line.demand_id).ideal_dock_week
        lines.append(entry)
    return {
        "version": plan.version,
        "total_cost": str(plan.total_cost),
        "lines": lines,
    }
