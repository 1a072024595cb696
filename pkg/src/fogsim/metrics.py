"""Measurement side of a run: control-loop latency, network usage, energy.

Everything here keeps running aggregates, never per-sample history, so memory
stays flat over arbitrarily long runs. Report serialization is deterministic:
a run with the same inputs and seed produces byte-identical JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional


class LoopTracker:
    """End-to-end latency of one control chain.

    A chain opens when a tuple of start_type is emitted and closes when the
    matching lineage's end_type tuple reaches its destination. Only running
    statistics are kept.
    """

    __slots__ = (
        "name",
        "start_type",
        "end_type",
        "_open",
        "count",
        "total_ms",
        "min_ms",
        "max_ms",
        "opened",
        "ends_without_open",
    )

    def __init__(self, name: str, start_type: str, end_type: str):
        self.name = name
        self.start_type = start_type
        self.end_type = end_type
        self._open: Dict[int, float] = {}
        self.count = 0
        self.total_ms = 0.0
        self.min_ms = float("inf")
        self.max_ms = 0.0
        self.opened = 0
        self.ends_without_open = 0

    def on_start(self, lineage: int, now_ms: float) -> None:
        self._open[lineage] = now_ms
        self.opened += 1

    def on_end(self, lineage: int, now_ms: float) -> None:
        t0 = self._open.pop(lineage, None)
        if t0 is None:
            self.ends_without_open += 1
            return
        delay = now_ms - t0
        self.count += 1
        self.total_ms += delay
        if delay < self.min_ms:
            self.min_ms = delay
        if delay > self.max_ms:
            self.max_ms = delay

    @property
    def mean_ms(self) -> float:
        return self.total_ms / self.count if self.count else 0.0

    @property
    def in_flight(self) -> int:
        return len(self._open)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "count": self.count,
            "mean_ms": round(self.mean_ms, 6),
            "min_ms": round(self.min_ms, 6) if self.count else None,
            "max_ms": round(self.max_ms, 6) if self.count else None,
            "started": self.opened,
            "in_flight": self.in_flight,
            "ends_without_open": self.ends_without_open,
        }


class NetworkUsage:
    """Traffic accounting over every hop a tuple takes.

    The headline figure weights each hop's payload by that hop's propagation
    latency and normalizes by the simulated duration:

        usage = sum(bytes * latency_ms) / duration_s

    so slow long-haul links dominate, which is the point of comparing cloud
    and edge placements.
    """

    __slots__ = ("byte_ms", "bytes_by_link", "hops", "undeliverable")

    def __init__(self):
        self.byte_ms = 0.0
        self.bytes_by_link: Dict[str, float] = {}
        self.hops = 0
        self.undeliverable = 0

    def record_hop(self, src: str, dst: str, nw_bytes: float, latency_ms: float) -> None:
        self.hops += 1
        self.byte_ms += nw_bytes * latency_ms
        key = f"{src}->{dst}"
        self.bytes_by_link[key] = self.bytes_by_link.get(key, 0.0) + nw_bytes

    def usage(self, duration_ms: float) -> float:
        if duration_ms <= 0:
            return 0.0
        return self.byte_ms / (duration_ms / 1000.0)

    def to_dict(self, duration_ms: float) -> dict:
        return {
            "usage": round(self.usage(duration_ms), 6),
            "byte_ms": round(self.byte_ms, 6),
            "hops": self.hops,
            "undeliverable": self.undeliverable,
            "bytes_by_link": {
                k: round(v, 6) for k, v in sorted(self.bytes_by_link.items())
            },
        }


@dataclass
class DeviceEnergy:
    device: str
    device_class: str
    busy_ms: float
    energy_j: float

    def to_dict(self) -> dict:
        return {
            "device": self.device,
            "class": self.device_class,
            "busy_ms": round(self.busy_ms, 6),
            "energy_j": round(self.energy_j, 6),
        }


@dataclass
class RunReport:
    """Deterministic result payload for one simulation run."""

    scenario: str
    placement_policy: str
    duration_ms: float
    seed: Optional[int]
    parameters: Dict[str, object] = field(default_factory=dict)
    loops: List[dict] = field(default_factory=list)
    network: dict = field(default_factory=dict)
    energy_by_device: List[dict] = field(default_factory=list)
    energy_by_class: Dict[str, float] = field(default_factory=dict)
    counters: Dict[str, int] = field(default_factory=dict)
    placement: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "placement_policy": self.placement_policy,
            "duration_ms": self.duration_ms,
            "seed": self.seed,
            "parameters": self.parameters,
            "loops": self.loops,
            "network": self.network,
            "energy": {
                "by_device": self.energy_by_device,
                "by_class_j": {
                    k: round(v, 6) for k, v in sorted(self.energy_by_class.items())
                },
            },
            "counters": dict(sorted(self.counters.items())),
            "placement": self.placement,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def primary_loop_mean_ms(self) -> float:
        return self.loops[0]["mean_ms"] if self.loops else 0.0


SWEEP_COLUMNS = [
    "scenario",
    "config",
    "variant",
    "placement",
    "loop_delay_ms",
    "network_usage",
    "energy_cloud_j",
    "energy_gateways_j",
    "energy_edge_j",
    "wall_ms",
]


def sweep_row(report: RunReport, config: int, variant: str, wall_ms: float) -> dict:
    """Flatten one run into a sweep CSV row.

    energy_gateways_j pools the two mid-tier classes; wall_ms is host wall
    time and is the one column that varies between identical reruns.
    """
    by_class = report.energy_by_class
    return {
        "scenario": report.scenario,
        "config": config,
        "variant": variant,
        "placement": report.placement_policy,
        "loop_delay_ms": round(report.primary_loop_mean_ms(), 6),
        "network_usage": round(report.network.get("usage", 0.0), 6),
        "energy_cloud_j": round(by_class.get("cloud", 0.0), 6),
        "energy_gateways_j": round(
            by_class.get("isp_gateway", 0.0) + by_class.get("wifi_gateway", 0.0), 6
        ),
        "energy_edge_j": round(by_class.get("edge_device", 0.0), 6),
        "wall_ms": round(wall_ms, 3),
    }
