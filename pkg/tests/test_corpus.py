"""The six reference snippets, run end-to-end on feasible and broken fixtures.

Each snippet is transcribed with its uppercase placeholders filled with
concrete ids (the documented slot convention) and the one list
comprehension rewritten as a for-loop (the language keeps statements
only, see src/fulfil/data/templates/README.md).  Layout quirks of the
originals — the double space before INTERVAL, split string literals,
the two-argument log call — are preserved on purpose.
"""

from decimal import Decimal

import pytest

from fulfil.dsl import OK, RUNTIME_ERROR, parse_script, run_source
from fulfil.router import HostContext

from conftest import make_instance

SNIPPET_STDDEV = '''ans = retrieve("""SELECT STDDEV(quantity)
FROM inventory WHERE supplier_id = '{S}'
AND record_date >=
    NOW() -  INTERVAL {T} WEEK;""")
logger.log(f"The std is {{ans}}")'''

SNIPPET_CROSS_GEO = '''total = retrieve("""SELECT SUM(quantity)
    FROM shipment WHERE date >=
    NOW() - INTERVAL '{T} weeks'""")
cross = retrieve("""SELECT SUM(quantity)
    FROM shipment WHERE date >=
    NOW() - INTERVAL '{T} weeks'
    AND src_geo != dest_geo;""")
if total:
    logger.log(cross / total * 100)
else:
    logger.log("No shipments at all")'''

SNIPPET_OPTIMIZE = "model.optimize()"

SNIPPET_UPDATE = "plan.update()"

SNIPPET_DOCK = '''ideal_date = retrieve("""SELECT idd FROM
    demand WHERE id = '{D}';""")
demand.add_constraint(
    demand_id="{D}", date=ideal_date,
    enforce="Exact Match")
model.optimize()
if model.feasible:
    plan.update()
    logger.log("Plan updated with cost",
    model.objVal)
else:
    logger.log("Sorry, impossible to "
    "dock demand {D} at its ideal date.")'''

SNIPPET_REGION_WHATIF = '''supplies = retrieve("""SELECT id FROM
    supplier WHERE region = '{R}';""")
if len(supplies):
    for id in supplies:
        supply.add_constraint(
            supply_id=id, demand="*",
            date="{M}-*", enforce="Prohibit")
    model.optimize()
    logger.log(f"Cost will be {{model.objVal}}")
    model.reset()
else:
    logger.log("No supplies in {R}.")'''

ALL_SNIPPETS = (
    SNIPPET_STDDEV.format(S="S1", T="4"),
    SNIPPET_CROSS_GEO.format(T="4"),
    SNIPPET_OPTIMIZE,
    SNIPPET_UPDATE,
    SNIPPET_DOCK.format(D="D"),
    SNIPPET_REGION_WHATIF.format(R="east", M="2024-02"),
)


def fresh_env(instance, solved=False):
    hosts = HostContext.for_instance(instance)
    if solved:
        hosts.model.optimize()
    return hosts.fresh_env()


def undockable_instance():
    """The demanded dock week is unreachable: every method needs 2 weeks."""
    return make_instance(
        demands=[("D", 5, 0, "A")],
        suppliers=[("s1", "east", "A")],
        methods=[("ground", 2, "1.0", "1.5")],
        capacities={("s1", w): 10 for w in range(6)},
    )


class TestWholeCorpusParses:
    @pytest.mark.parametrize("snippet", ALL_SNIPPETS, ids=[
        "stddev", "cross-geo", "optimize", "update", "dock-demand", "region-whatif",
    ])
    def test_parses(self, snippet):
        parse_script(snippet)


class TestInventoryStddev:
    def test_four_week_window(self, sample_instance):
        result = run_source(
            SNIPPET_STDDEV.format(S="S1", T="4"), fresh_env(sample_instance)
        )
        assert result.status == OK
        assert result.logs == ("The std is 4.2426",)

    def test_six_week_window_is_exact(self, sample_instance):
        result = run_source(
            SNIPPET_STDDEV.format(S="S1", T="6"), fresh_env(sample_instance)
        )
        assert result.logs == ("The std is 6.0",)


class TestCrossGeoFraction:
    def test_fraction_on_packaged_history(self, sample_instance):
        result = run_source(SNIPPET_CROSS_GEO.format(T="4"), fresh_env(sample_instance))
        assert result.status == OK
        assert result.logs == ("24.3243",)

    def test_two_row_fixture(self, sample_instance):
        import datetime as dt

        from fulfil import ShipmentRecord

        inst = make_instance(
            demands=[("D", 5, 3, "A")],
            suppliers=[("s1", "east", "A")],
            methods=[("ground", 2, "1.0", "1.5")],
            capacities={("s1", w): 10 for w in range(6)},
            shipments=[
                ShipmentRecord(dt.date(2024, 1, 29), 4, "A", "B", "ground"),
                ShipmentRecord(dt.date(2024, 1, 31), 6, "A", "A", "ground"),
            ],
            now=dt.date(2024, 2, 1),
        )
        result = run_source(SNIPPET_CROSS_GEO.format(T="4"), fresh_env(inst))
        assert result.logs == ("40.0",)

    def test_empty_history_hits_else_branch(self, empty_shipment_instance):
        result = run_source(
            SNIPPET_CROSS_GEO.format(T="4"), fresh_env(empty_shipment_instance)
        )
        assert result.status == OK
        assert result.logs == ("No shipments at all",)


class TestPlanGeneration:
    def test_optimize_plan(self, sample_instance):
        env = fresh_env(sample_instance)
        result = run_source(SNIPPET_OPTIMIZE, env)
        assert result.status == OK
        assert result.logs == ()
        assert env.model.last_outcome.feasible
        assert env.model.last_outcome.objective == Decimal("36")

    def test_update_plan_commits_last_solve(self, sample_instance):
        env = fresh_env(sample_instance, solved=True)
        result = run_source(SNIPPET_UPDATE, env)
        assert result.status == OK
        assert env.plan_store.current.version == 1

    def test_update_plan_without_solve_fails_cleanly(self, sample_instance):
        result = run_source(SNIPPET_UPDATE, fresh_env(sample_instance))
        assert result.status == RUNTIME_ERROR


class TestDockDemand:
    def test_feasible_commits_and_reports_cost(self, sample_instance):
        env = fresh_env(sample_instance)
        result = run_source(SNIPPET_DOCK.format(D="D"), env)
        assert result.status == OK
        assert result.logs == ("Plan updated with cost 36",)
        assert env.plan_store.current.version == 1

    def test_infeasible_logs_the_exact_apology(self):
        env = fresh_env(undockable_instance())
        result = run_source(SNIPPET_DOCK.format(D="D"), env)
        assert result.status == OK
        assert result.logs == (
            "Sorry, impossible to dock demand D at its ideal date.",
        )
        assert env.plan_store.current is None


class TestRegionWhatIf:
    def test_named_region_reports_scenario_cost_and_resets(self, sample_instance):
        env = fresh_env(sample_instance)
        result = run_source(SNIPPET_REGION_WHATIF.format(R="east", M="2024-02"), env)
        assert result.status == OK
        assert result.logs == ("Cost will be 36",)
        # the reset at the end must leave no scenario constraints behind
        assert env.model.scenario_constraints == []

    def test_unknown_region_hits_else_branch(self, sample_instance):
        env = fresh_env(sample_instance)
        result = run_source(
            SNIPPET_REGION_WHATIF.format(R="north", M="2024-02"), env
        )
        assert result.status == OK
        assert result.logs == ("No supplies in north.",)
