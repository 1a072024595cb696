import random

import pytest

from fogsim.application import (
    AppEdge,
    AppValidationError,
    Application,
    application_from_dict,
    application_from_json,
)
from fogsim.scenarios import build_eeg, build_surveillance
from fogsim.topology import (
    EmissionDistribution,
    FogDevice,
    PhysicalTopology,
    SchemaError,
    Sensor,
)

from oracles import eeg_demands


def chain_app():
    """sensor FEED -> stage_one -> stage_two, one result back down."""
    app = Application("chain")
    app.add_module("stage_one")
    app.add_module("stage_two")
    app.add_edge(AppEdge("FEED", "FEED", "stage_one", 100.0, 32.0, "up",
                         from_sensor=True))
    app.add_edge(AppEdge("REFINED", "stage_one", "stage_two", 200.0, 32.0, "up"))
    app.add_edge(AppEdge("VERDICT", "stage_two", "stage_one", 50.0, 16.0, "down"))
    app.add_mapping("stage_one", "FEED", "REFINED")
    app.add_mapping("stage_two", "REFINED", "VERDICT")
    return app


def chain_topology(interval_ms=10.0):
    topo = PhysicalTopology()
    topo.add_device(FogDevice("hub", None, 1000.0, 1024, 100, 100, 100, 10, 5, 0.0))
    topo.add_device(FogDevice("node", "hub", 100.0, 256, 50, 100, 100, 10, 5, 1.0))
    topo.add_sensor(Sensor("feed1", "FEED", "node", 1.0,
                           EmissionDistribution("deterministic", interval_ms),
                           100.0, 32.0))
    return topo


class TestValidation:
    def test_clean_graph(self):
        assert chain_app().validate() == []

    def test_unknown_source_module(self):
        app = chain_app()
        app.add_edge(AppEdge("X", "ghost", "stage_one", 1.0, 1.0, "up"))
        assert any("unknown source module" in v for v in app.validate())

    def test_unknown_dest_module(self):
        app = chain_app()
        app.add_edge(AppEdge("Y", "stage_one", "ghost", 1.0, 1.0, "up"))
        assert any("unknown dest module" in v for v in app.validate())

    def test_sensor_edge_must_carry_feed_name(self):
        app = chain_app()
        app.add_edge(AppEdge("Z", "OTHER", "stage_one", 1.0, 1.0, "up",
                             from_sensor=True))
        assert any("named after their source feed" in v for v in app.validate())

    def test_mapping_output_must_originate_at_module(self):
        app = chain_app()
        app.add_mapping("stage_one", "FEED", "VERDICT")  # VERDICT starts at stage_two
        assert any("does not originate" in v for v in app.validate())

    def test_selectivity_range(self):
        app = chain_app()
        app.add_mapping("stage_one", "FEED", "REFINED", selectivity=1.5)
        assert any("selectivity" in v for v in app.validate())

    def test_period_on_non_periodic_edge(self):
        app = chain_app()
        app.edges["REFINED"].period_ms = 5.0
        assert any("period_ms set" in v for v in app.validate())

    def test_periodic_needs_period(self):
        app = chain_app()
        app.add_edge(AppEdge("TICK", "stage_two", "stage_one", 1.0, 1.0, "down",
                             periodic=True, period_ms=0.0))
        assert any("period_ms > 0" in v for v in app.validate())

    def test_upward_cycle_detected(self):
        app = Application("loopy")
        app.add_module("a")
        app.add_module("b")
        app.add_edge(AppEdge("AB", "a", "b", 1.0, 1.0, "up"))
        app.add_edge(AppEdge("BA", "b", "a", 1.0, 1.0, "up"))
        assert any("DAG" in v for v in app.validate())

    def test_downward_reply_cycle_is_fine(self):
        # up one way, reply down the other: legal
        assert chain_app().validate() == []

    def test_duplicate_edge_type(self):
        app = chain_app()
        with pytest.raises(AppValidationError):
            app.add_edge(AppEdge("FEED", "stage_one", "stage_two", 1.0, 1.0, "up"))

    def test_cross_checks_against_topology(self):
        app = chain_app()
        topo = chain_topology()
        assert app.validate(topo) == []
        topo.sensors[0].tuple_cpu_mi = 999.0
        assert any("disagrees" in v for v in app.validate(topo))


class TestLoops:
    def test_chain_resolution(self):
        app = chain_app()
        loop = app.add_loop("round_trip",
                            ["FEED", "stage_one", "stage_two", "stage_one"])
        assert app.loop_edge_types(loop) == ["FEED", "REFINED", "VERDICT"]

    def test_ambiguous_pair_disambiguated_by_trigger(self):
        # two edges client -> DISPLAY exist; the loop must pick the one the
        # concentration reply triggers, not the broadcast-driven one
        built = build_eeg(1, "A")
        chain = built.app.loop_edge_types(built.app.loops[0])
        assert chain == ["EEG", "_SENSOR", "CONCENTRATION", "SELF_STATE_UPDATE"]

    def test_surveillance_chain(self):
        built = build_surveillance(1)
        chain = built.app.loop_edge_types(built.app.loops[0])
        assert chain == ["CAMERA", "MOTION_VIDEO_STREAM", "OBJECT_LOCATION",
                         "PTZ_PARAMS"]

    def test_unresolvable_loop_reported(self):
        app = chain_app()
        app.add_loop("nope", ["FEED", "stage_two"])  # no such edge
        assert any("cannot resolve" in v for v in app.validate())


class TestRates:
    def test_linear_chain_rates(self):
        app = chain_app()
        topo = chain_topology(interval_ms=10.0)
        rates = app.propagate_rates(topo)
        # 0.1 tuples/ms: stage_one pays 100 MI each plus the 50 MI verdict,
        # stage_two pays 200 MI each
        assert rates.contributions[("stage_one", "feed1")] == pytest.approx(15.0)
        assert rates.contributions[("stage_two", "feed1")] == pytest.approx(20.0)
        assert rates.module_demand["stage_one"] == pytest.approx(15.0)
        assert rates.edge_rates["VERDICT"] == pytest.approx(0.1)

    def test_selectivity_scales_downstream(self):
        app = chain_app()
        app.mappings[0].selectivity = 0.25
        topo = chain_topology(10.0)
        rates = app.propagate_rates(topo)
        assert rates.edge_rates["REFINED"] == pytest.approx(0.025)
        assert rates.contributions[("stage_two", "feed1")] == pytest.approx(5.0)
        # stage_one still sees every FEED tuple
        assert rates.contributions[("stage_one", "feed1")] == pytest.approx(
            10.0 + 0.025 * 50.0
        )

    def test_periodic_demand_charged_separately(self):
        app = chain_app()
        app.add_edge(AppEdge("TICK", "stage_two", "stage_one", 80.0, 8.0, "down",
                             periodic=True, period_ms=20.0))
        rates = app.propagate_rates(chain_topology(10.0))
        assert rates.periodic_demand["stage_one"] == pytest.approx(4.0)
        assert rates.module_demand["stage_one"] == pytest.approx(19.0)

    def test_eeg_reference_numbers(self):
        built = build_eeg(1, "A")
        rates = built.app.propagate_rates(built.topology)
        expected = eeg_demands(10.0, 2000.0, phones=4)
        # an instance serving one phone pays that sensor's chain plus the
        # full timer-driven broadcast load
        per_phone_client = (rates.contributions[("client", "eeg_01_1")]
                            + rates.periodic_demand["client"])
        assert per_phone_client == pytest.approx(expected["client_per_phone"])
        assert rates.contributions[("concentration_calculator", "eeg_01_1")] == (
            pytest.approx(expected["calculator_per_phone"])
        )
        assert rates.contributions[("coordinator", "eeg_01_1")] == pytest.approx(
            expected["coordinator_per_phone"]
        )
        assert rates.module_demand["concentration_calculator"] == pytest.approx(
            expected["phones"] * expected["calculator_per_phone"]
        )

    def test_runaway_cycle_guard(self):
        app = Application("spin")
        app.add_module("a")
        app.add_module("b")
        app.add_edge(AppEdge("PING", "PING", "a", 1.0, 1.0, "up", from_sensor=True))
        app.add_edge(AppEdge("GO", "a", "b", 1.0, 1.0, "up"))
        app.add_edge(AppEdge("BACK", "b", "a", 1.0, 1.0, "down"))
        app.add_mapping("a", "PING", "GO")
        app.add_mapping("b", "GO", "BACK")
        app.add_mapping("a", "BACK", "GO")  # no attenuation anywhere
        topo = PhysicalTopology()
        topo.add_device(FogDevice("x", None, 10.0, 10, 10, 10, 10, 2, 1, 0.0))
        topo.add_sensor(Sensor("p", "PING", "x", 1.0,
                               EmissionDistribution("deterministic", 1.0), 1.0, 1.0))
        with pytest.raises(AppValidationError, match="diverge"):
            app.propagate_rates(topo)


class TestEmitSelectivity:
    def test_certain_mapping_skips_rng(self):
        app = chain_app()
        assert app.emit_types("stage_one", "FEED", rng=None) == ["REFINED"]

    def test_probabilistic_mapping_rate(self):
        app = chain_app()
        app.mappings[0].selectivity = 0.3
        rng = random.Random(42)
        n = 20000
        hits = sum(
            1 for _ in range(n) if app.emit_types("stage_one", "FEED", rng)
        )
        # binomial 3 sigma band around p=0.3
        sigma = (n * 0.3 * 0.7) ** 0.5
        assert abs(hits - n * 0.3) < 3 * sigma


class TestSerialization:
    def test_round_trip(self):
        built = build_eeg(2, "B")
        text = built.app.to_json()
        again = application_from_json(text)
        assert again.to_json() == text
        assert sorted(again.modules) == sorted(built.app.modules)
        assert len(again.mappings) == len(built.app.mappings)
        assert again.loops[0].nodes == built.app.loops[0].nodes

    def test_unknown_field_rejected(self):
        doc = chain_app().to_dict()
        doc["edges"][0]["priority"] = 3
        with pytest.raises(SchemaError, match="unknown fields"):
            application_from_dict(doc)

    def test_duplicate_module_rejected(self):
        doc = chain_app().to_dict()
        doc["modules"].append({"name": "stage_one", "ram_mb": 10.0})
        with pytest.raises(SchemaError, match="duplicate"):
            application_from_dict(doc)
