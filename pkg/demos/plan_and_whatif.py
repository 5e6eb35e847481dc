"""
Building a fulfillment plan and asking "what if?"
=================================================

A tour of the planning core: load the bundled sample network, solve for
the cheapest complete plan, commit it, and then price a few scenarios
without disturbing the committed plan.
"""

# The sample network ships with the package: six demands, four suppliers,
# two shipping methods (ground docks two weeks after shipping, priority
# one week), and per-week supplier capacity.
from fulfil.model import DOCK_DATE, SHIPPING_METHOD, Constraint
from fulfil.io import load_instance
from fulfil.solver import ModelState, PlanStore
from fulfil.templates import data_path

instance = load_instance(str(data_path("sample_instance")))
print(f"{len(instance.demands)} demands, {len(instance.suppliers)} suppliers,")
print(f"planning horizon of {instance.horizon.num_weeks} weeks\n")

# Solve.  The model assigns every demand one (supplier, method, ship week)
# line, subject to capacity, and minimizes total cost: shipping plus
# week-by-week earliness/lateness penalties against each demand's ideal
# dock week.
model = ModelState(instance)
outcome = model.optimize()
print(f"feasible: {outcome.feasible}, objective cost: {outcome.objective}")

# Commit the solve into the plan store; each commit bumps the version.
plans = PlanStore()
plan = plans.commit(outcome)
print(f"committed plan version {plan.version}:")
for line in plan.lines:
    print(
        f"  {line.demand_id}: {line.supplier_id} ships {line.method} "
        f"week {line.ship_week}, docks week {line.dock_week}"
    )

# What-if analysis prices a scenario and then puts everything back.
# Here: force demand D onto priority shipping.
priority_only = Constraint(
    kind=SHIPPING_METHOD, enforce="Exact Match", demand_id="D", method="priority"
)
result = model.what_if([priority_only])
print(f"\nforce priority for D: feasible={result.feasible}, "
      f"scenario cost {result.scenario_objective} "
      f"(delta {result.delta_vs_baseline:+})")

# Date constraints also take calendar-month patterns: keep demand D from
# docking anywhere in February.  Its ideal week is in February, so the
# plan eats lateness penalties to comply.
no_february = Constraint(
    kind=DOCK_DATE, enforce="Prohibit", demand_id="D", week_or_pattern="2024-02-*"
)
result = model.what_if([no_february])
print(f"keep D out of Feb:   feasible={result.feasible}, "
      f"scenario cost {result.scenario_objective} "
      f"(delta {result.delta_vs_baseline:+})")

# Scenarios stack.
result = model.what_if([priority_only, no_february])
print(f"both at once:        feasible={result.feasible}, "
      f"scenario cost {result.scenario_objective} "
      f"(delta {result.delta_vs_baseline:+})")

# The model is untouched afterwards: same baseline outcome, no leftover
# scenario constraints, and the committed plan never moved.
print(f"\nafter what-ifs: baseline cost still {model.last_outcome.objective}, "
      f"plan still at version {plans.current.version}")
