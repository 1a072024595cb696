import json

from fogsim.metrics import (
    LoopTracker,
    NetworkUsage,
    RunReport,
    SWEEP_COLUMNS,
    sweep_row,
)


class TestLoopTracker:
    def test_running_stats(self):
        t = LoopTracker("lat", "IN", "OUT")
        t.on_start(1, 10.0)
        t.on_start(2, 12.0)
        t.on_end(1, 14.0)   # 4 ms
        t.on_end(2, 22.0)   # 10 ms
        assert t.count == 2
        assert t.mean_ms == 7.0
        assert t.min_ms == 4.0
        assert t.max_ms == 10.0
        assert t.opened == 2
        assert t.in_flight == 0

    def test_unmatched_end_counted_not_crashed(self):
        t = LoopTracker("lat", "IN", "OUT")
        t.on_end(99, 5.0)
        assert t.count == 0
        assert t.ends_without_open == 1

    def test_in_flight_and_reopen(self):
        t = LoopTracker("lat", "IN", "OUT")
        t.on_start(1, 0.0)
        assert t.in_flight == 1
        t.on_end(1, 3.0)
        t.on_start(1, 10.0)  # lineage ids may recur across restarts
        t.on_end(1, 11.0)
        assert t.count == 2
        assert t.min_ms == 1.0

    def test_to_dict_empty_loop(self):
        d = LoopTracker("lat", "IN", "OUT").to_dict()
        assert d["count"] == 0
        assert d["mean_ms"] == 0.0
        assert d["min_ms"] is None
        assert d["max_ms"] is None

    def test_to_dict_rounding(self):
        t = LoopTracker("lat", "IN", "OUT")
        t.on_start(1, 0.0)
        t.on_end(1, 1.0000004)
        assert t.to_dict()["mean_ms"] == 1.0


class TestNetworkUsage:
    def test_headline_figure(self):
        u = NetworkUsage()
        u.record_hop("a", "b", 500.0, 2.0)   # 1000 byte-ms
        u.record_hop("b", "c", 100.0, 100.0)  # 10000 byte-ms
        u.record_hop("a", "b", 500.0, 2.0)
        assert u.byte_ms == 12000.0
        assert u.hops == 3
        # 12000 byte-ms over two seconds of simulated time
        assert u.usage(2000.0) == 6000.0
        assert u.bytes_by_link == {"a->b": 1000.0, "b->c": 100.0}

    def test_zero_duration_guard(self):
        assert NetworkUsage().usage(0.0) == 0.0

    def test_to_dict_sorted_links(self):
        u = NetworkUsage()
        u.record_hop("z", "y", 1.0, 1.0)
        u.record_hop("a", "b", 1.0, 1.0)
        assert list(u.to_dict(1000.0)["bytes_by_link"]) == ["a->b", "z->y"]


def fake_report(**overrides):
    base = dict(
        scenario="eeg_game",
        placement_policy="edgeward",
        duration_ms=60000.0,
        seed=0,
        parameters={"config": 1, "variant": "A"},
        loops=[{"name": "lat", "mean_ms": 17.105234, "count": 100,
                "min_ms": 16.0, "max_ms": 19.0, "started": 101,
                "in_flight": 1, "ends_without_open": 0}],
        network={"usage": 12345.6789, "byte_ms": 1.0, "hops": 2,
                 "undeliverable": 0, "bytes_by_link": {}},
        energy_by_device=[],
        energy_by_class={
            "cloud": 5000.125,
            "isp_gateway": 100.5,
            "wifi_gateway": 200.25,
            "edge_device": 4000.0,
        },
        counters={"events": 10},
        placement={"policy": "edgeward", "instances": []},
    )
    base.update(overrides)
    return RunReport(**base)


class TestSweepRow:
    def test_column_mapping_pools_gateway_tiers(self):
        row = sweep_row(fake_report(), config=3, variant="A", wall_ms=12.3456)
        assert list(row) == SWEEP_COLUMNS
        assert row["loop_delay_ms"] == 17.105234
        assert row["network_usage"] == 12345.6789
        assert row["energy_cloud_j"] == 5000.125
        assert row["energy_gateways_j"] == 300.75
        assert row["energy_edge_j"] == 4000.0
        assert row["config"] == 3
        assert row["wall_ms"] == 12.346

    def test_missing_classes_default_to_zero(self):
        row = sweep_row(fake_report(energy_by_class={}), 1, "-", 1.0)
        assert row["energy_cloud_j"] == 0.0
        assert row["energy_gateways_j"] == 0.0


class TestRunReport:
    def test_json_shape_and_determinism(self):
        a = fake_report().to_json()
        b = fake_report().to_json()
        assert a == b
        assert a.endswith("\n")
        doc = json.loads(a)
        assert doc["energy"]["by_class_j"]["wifi_gateway"] == 200.25
        assert doc["scenario"] == "eeg_game"
        # serialized key order is sorted, so byte equality is meaningful
        assert a == json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def test_primary_loop_mean(self):
        assert fake_report().primary_loop_mean_ms() == 17.105234
        assert fake_report(loops=[]).primary_loop_mean_ms() == 0.0
