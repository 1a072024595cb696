"""Built-in benchmark scenarios and the orchestration glue to run them.

Two families ship with the package:

* eeg_game: a latency-sensitive multiplayer brain-game. Phones host a client
  module fed by an EEG headset; a concentration calculator scores the signal
  and answers back; a global coordinator broadcasts shared game state on a
  timer. Variants A and B differ in headset sampling rate and per-sample CPU
  cost.
* surveillance: smart-camera tracking. Cameras run motion detection on the
  raw feed; object detection and tracking refine it upstream and steer the
  camera's pan-tilt-zoom head; a user interface in the cloud receives
  detections.

Each scenario scales by config level 1..5, doubling the number of mid-tier
branches: 1, 2, 4, 8, 16 gateways (areas) with four end devices each.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

from .application import Application, AppEdge, DOWN, UP
from .placement import PlacementConstraint, run_policy, validate_placement
from .runtime import Simulation
from .metrics import RunReport, sweep_row
from .topology import (
    Actuator,
    EmissionDistribution,
    FogDevice,
    PhysicalTopology,
    Sensor,
)


class ScenarioError(ValueError):
    """Unknown scenario, config level, or variant."""


class ValidationFailure(ValueError):
    """Inputs parsed but failed semantic validation."""

    def __init__(self, violations: List[str], warnings: Optional[List[str]] = None):
        super().__init__("; ".join(violations))
        self.violations = violations
        self.warnings = warnings or []


BRANCHES_BY_CONFIG = {1: 1, 2: 2, 3: 4, 4: 8, 5: 16}
DEVICES_PER_BRANCH = 4

# Shared infrastructure figures. Bandwidth is deliberately generous so CPU
# placement, not the pipe, decides where queues form.
LINK_BW_BYTES_PER_MS = 10000.0
CLOUD_MIPS = 40000.0
GATEWAY_MIPS = 3000.0
HANDHELD_MIPS = 1600.0
SERVER_BUSY_W = 107.339
SERVER_IDLE_W = 83.433
HANDHELD_BUSY_W = 87.53
HANDHELD_IDLE_W = 82.44
WAN_LATENCY_MS = 100.0  # regional gateway to cloud datacenter


def _add_device(topo, name, parent, mips, ram_mb, storage_mb, busy_w, idle_w, latency_ms):
    topo.add_device(
        FogDevice(
            name=name,
            parent=parent,
            mips=mips,
            ram_mb=ram_mb,
            storage_mb=storage_mb,
            uplink_bw_bytes_per_ms=LINK_BW_BYTES_PER_MS,
            downlink_bw_bytes_per_ms=LINK_BW_BYTES_PER_MS,
            busy_power_w=busy_w,
            idle_power_w=idle_w,
            uplink_latency_ms=latency_ms,
        )
    )


@dataclass
class BuiltScenario:
    topology: PhysicalTopology
    app: Application
    constraints: List[PlacementConstraint]


# -- EEG beam game ------------------------------------------------------------

EEG_HEADSETS = {
    # variant: (sample interval ms, per-sample classification cost MI)
    "A": (10.0, 2000.0),
    "B": (5.0, 2500.0),
}
GGS_PERIOD_MS = 100.0


def build_eeg(config: int = 1, variant: str = "A",
              ggs_period_ms: float = GGS_PERIOD_MS) -> BuiltScenario:
    if config not in BRANCHES_BY_CONFIG:
        raise ScenarioError(f"eeg_game: config must be 1..5, got {config}")
    if variant not in EEG_HEADSETS:
        raise ScenarioError(f"eeg_game: variant must be one of {sorted(EEG_HEADSETS)}")
    interval_ms, sample_cpu_mi = EEG_HEADSETS[variant]

    topo = PhysicalTopology()
    _add_device(topo, "cloud", None, CLOUD_MIPS, 1_000_000, 1_000_000,
                SERVER_BUSY_W, SERVER_IDLE_W, 0.0)
    _add_device(topo, "isp_gw", "cloud", GATEWAY_MIPS, 8000, 100_000,
                SERVER_BUSY_W, SERVER_IDLE_W, WAN_LATENCY_MS)
    for g in range(1, BRANCHES_BY_CONFIG[config] + 1):
        gw = f"wifi_gw_{g:02d}"
        _add_device(topo, gw, "isp_gw", GATEWAY_MIPS, 4000, 100_000,
                    SERVER_BUSY_W, SERVER_IDLE_W, 4.0)
        for p in range(1, DEVICES_PER_BRANCH + 1):
            phone = f"phone_{g:02d}_{p}"
            _add_device(topo, phone, gw, HANDHELD_MIPS, 1000, 32_000,
                        HANDHELD_BUSY_W, HANDHELD_IDLE_W, 2.0)
            topo.add_sensor(Sensor(
                name=f"eeg_{g:02d}_{p}",
                tuple_type="EEG",
                gateway=phone,
                gateway_latency_ms=6.0,
                distribution=EmissionDistribution("deterministic", interval_ms),
                tuple_cpu_mi=sample_cpu_mi,
                tuple_nw_bytes=500.0,
            ))
            topo.add_actuator(Actuator(
                name=f"display_{g:02d}_{p}",
                actuator_type="DISPLAY",
                gateway=phone,
                gateway_latency_ms=1.0,
            ))

    app = Application("eeg_game")
    app.add_module("client")
    app.add_module("concentration_calculator")
    app.add_module("coordinator")
    app.add_edge(AppEdge("EEG", "EEG", "client", sample_cpu_mi, 500.0, UP,
                         from_sensor=True))
    app.add_edge(AppEdge("_SENSOR", "client", "concentration_calculator",
                         3500.0, 500.0, UP))
    app.add_edge(AppEdge("CONCENTRATION", "concentration_calculator", "client",
                         14.0, 500.0, DOWN))
    app.add_edge(AppEdge("PLAYER_GAME_STATE", "client", "coordinator",
                         1000.0, 1000.0, UP))
    app.add_edge(AppEdge("GLOBAL_GAME_STATE", "coordinator", "client",
                         1000.0, 1000.0, DOWN, periodic=True,
                         period_ms=ggs_period_ms))
    app.add_edge(AppEdge("SELF_STATE_UPDATE", "client", "DISPLAY",
                         1000.0, 500.0, DOWN, to_actuator=True))
    app.add_edge(AppEdge("GLOBAL_STATE_UPDATE", "client", "DISPLAY",
                         1000.0, 500.0, DOWN, to_actuator=True))
    app.add_mapping("client", "EEG", "_SENSOR")
    app.add_mapping("concentration_calculator", "_SENSOR", "CONCENTRATION")
    app.add_mapping("client", "CONCENTRATION", "SELF_STATE_UPDATE")
    app.add_mapping("client", "CONCENTRATION", "PLAYER_GAME_STATE")
    app.add_mapping("client", "GLOBAL_GAME_STATE", "GLOBAL_STATE_UPDATE")
    app.add_loop("concentration_reaction",
                 ["EEG", "client", "concentration_calculator", "client", "DISPLAY"])

    constraints = [
        PlacementConstraint("client", "class:edge_device", exclusive=True),
        PlacementConstraint("coordinator", "class:cloud"),
    ]
    return BuiltScenario(topo, app, constraints)


# -- camera surveillance -------------------------------------------------------

CAMERA_INTERVAL_MS = 5.0


def build_surveillance(config: int = 1, variant: str = "-") -> BuiltScenario:
    if config not in BRANCHES_BY_CONFIG:
        raise ScenarioError(f"surveillance: config must be 1..5, got {config}")
    if variant not in ("-",):
        raise ScenarioError("surveillance: no variants; use '-'")

    topo = PhysicalTopology()
    _add_device(topo, "cloud", None, CLOUD_MIPS, 1_000_000, 1_000_000,
                SERVER_BUSY_W, SERVER_IDLE_W, 0.0)
    _add_device(topo, "isp_gw", "cloud", GATEWAY_MIPS, 8000, 100_000,
                SERVER_BUSY_W, SERVER_IDLE_W, WAN_LATENCY_MS)
    for a in range(1, BRANCHES_BY_CONFIG[config] + 1):
        area = f"area_gw_{a:02d}"
        _add_device(topo, area, "isp_gw", GATEWAY_MIPS, 4000, 100_000,
                    SERVER_BUSY_W, SERVER_IDLE_W, 2.0)
        for c in range(1, DEVICES_PER_BRANCH + 1):
            cam = f"camera_{a:02d}_{c}"
            _add_device(topo, cam, area, HANDHELD_MIPS, 1000, 32_000,
                        HANDHELD_BUSY_W, HANDHELD_IDLE_W, 2.0)
            topo.add_sensor(Sensor(
                name=f"feed_{a:02d}_{c}",
                tuple_type="CAMERA",
                gateway=cam,
                gateway_latency_ms=1.0,
                distribution=EmissionDistribution("deterministic", CAMERA_INTERVAL_MS),
                tuple_cpu_mi=1000.0,
                tuple_nw_bytes=20000.0,
            ))
            topo.add_actuator(Actuator(
                name=f"ptz_{a:02d}_{c}",
                actuator_type="PTZ",
                gateway=cam,
                gateway_latency_ms=1.0,
            ))

    app = Application("surveillance")
    app.add_module("motion_detector")
    app.add_module("object_detector")
    app.add_module("object_tracker")
    app.add_module("user_interface")
    app.add_edge(AppEdge("CAMERA", "CAMERA", "motion_detector", 1000.0, 20000.0,
                         UP, from_sensor=True))
    app.add_edge(AppEdge("MOTION_VIDEO_STREAM", "motion_detector",
                         "object_detector", 2000.0, 2000.0, UP))
    app.add_edge(AppEdge("OBJECT_LOCATION", "object_detector", "object_tracker",
                         1000.0, 100.0, UP))
    app.add_edge(AppEdge("DETECTED_OBJECT", "object_detector", "user_interface",
                         500.0, 2000.0, UP))
    app.add_edge(AppEdge("PTZ_PARAMS", "object_tracker", "PTZ", 100.0, 100.0,
                         DOWN, to_actuator=True))
    app.add_mapping("motion_detector", "CAMERA", "MOTION_VIDEO_STREAM")
    app.add_mapping("object_detector", "MOTION_VIDEO_STREAM", "OBJECT_LOCATION")
    app.add_mapping("object_detector", "MOTION_VIDEO_STREAM", "DETECTED_OBJECT")
    app.add_mapping("object_tracker", "OBJECT_LOCATION", "PTZ_PARAMS")
    app.add_loop("camera_steering",
                 ["CAMERA", "motion_detector", "object_detector",
                  "object_tracker", "PTZ"])

    constraints = [
        PlacementConstraint("motion_detector", "class:edge_device", exclusive=True),
        PlacementConstraint("user_interface", "class:cloud"),
    ]
    return BuiltScenario(topo, app, constraints)


# -- catalog --------------------------------------------------------------------

@dataclass
class ScenarioSpec:
    name: str
    description: str
    configs: List[int]
    variants: List[str]
    default_duration_ms: float
    build: Callable[..., BuiltScenario]


SCENARIOS: Dict[str, ScenarioSpec] = {
    "eeg_game": ScenarioSpec(
        name="eeg_game",
        description="Latency-sensitive EEG brain game on phones; variants A/B "
                    "are headset models",
        configs=sorted(BRANCHES_BY_CONFIG),
        variants=sorted(EEG_HEADSETS),
        default_duration_ms=3 * 3600 * 1000.0,
        build=build_eeg,
    ),
    "surveillance": ScenarioSpec(
        name="surveillance",
        description="Smart camera motion tracking with PTZ control",
        configs=sorted(BRANCHES_BY_CONFIG),
        variants=["-"],
        default_duration_ms=1_000_000.0,
        build=build_surveillance,
    ),
}


def list_scenarios() -> List[dict]:
    return [
        {
            "name": spec.name,
            "description": spec.description,
            "configs": spec.configs,
            "variants": spec.variants,
            "default_duration_ms": spec.default_duration_ms,
        }
        for spec in SCENARIOS.values()
    ]


def get_scenario(name: str) -> ScenarioSpec:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ScenarioError(
            f"unknown scenario {name}; available: {sorted(SCENARIOS)}"
        ) from None


def build_scenario(name: str, config: int, variant: Optional[str] = None,
                   ggs_period_ms: Optional[float] = None) -> BuiltScenario:
    spec = get_scenario(name)
    variant = variant or spec.variants[0]
    if name == "eeg_game":
        return spec.build(config, variant,
                          ggs_period_ms if ggs_period_ms else GGS_PERIOD_MS)
    return spec.build(config, variant)


def apply_distribution(topology: PhysicalTopology, kind: str) -> None:
    """Force every sensor onto one inter-emission distribution kind."""
    for sensor in topology.sensors:
        sensor.distribution.kind = kind


def check_inputs(topology: PhysicalTopology, app: Application) -> None:
    violations = topology.validate()
    violations.extend(app.validate(topology))
    if violations:
        raise ValidationFailure(violations)


def prepare(
    topology: PhysicalTopology,
    app: Application,
    constraints: Sequence[PlacementConstraint],
    placement_policy: str,
    seed: Optional[int] = 0,
    distribution: Optional[str] = None,
    track_transfers: bool = False,
    track_executions: bool = False,
) -> Simulation:
    """Validate, place, and wire a simulation; shared by CLI and service."""
    if distribution:
        apply_distribution(topology, distribution)
    check_inputs(topology, app)
    rates = app.propagate_rates(topology)
    pmap = run_policy(placement_policy, topology, app, rates, constraints)
    violations, _warnings = validate_placement(topology, app, pmap)
    if violations:
        raise ValidationFailure(violations)
    return Simulation(
        topology, app, pmap,
        seed=seed,
        track_transfers=track_transfers,
        track_executions=track_executions,
    )


def run_scenario(
    name: str,
    config: int = 1,
    variant: Optional[str] = None,
    placement_policy: str = "edgeward",
    duration_ms: Optional[float] = None,
    seed: Optional[int] = 0,
    distribution: Optional[str] = None,
    ggs_period_ms: Optional[float] = None,
) -> RunReport:
    spec = get_scenario(name)
    variant = variant or spec.variants[0]
    built = build_scenario(name, config, variant, ggs_period_ms)
    sim = prepare(
        built.topology, built.app, built.constraints, placement_policy,
        seed=seed, distribution=distribution,
    )
    duration = duration_ms if duration_ms is not None else spec.default_duration_ms
    parameters = {
        "config": config,
        "variant": variant,
        "distribution": distribution or "per-sensor",
    }
    if name == "eeg_game":
        parameters["ggs_period_ms"] = ggs_period_ms if ggs_period_ms else GGS_PERIOD_MS
    return sim.run(duration, scenario=name, parameters=parameters)


def run_sweep_cell(
    name: str,
    config: int,
    variant: Optional[str],
    placement_policy: str,
    duration_ms: Optional[float],
    seed: Optional[int],
    distribution: Optional[str],
    ggs_period_ms: Optional[float] = None,
) -> dict:
    """One sweep grid cell as a flat CSV row; top-level so pools can pickle it."""
    t0 = time.perf_counter()
    report = run_scenario(
        name,
        config=config,
        variant=variant,
        placement_policy=placement_policy,
        duration_ms=duration_ms,
        seed=seed,
        distribution=distribution,
        ggs_period_ms=ggs_period_ms,
    )
    wall_ms = (time.perf_counter() - t0) * 1000.0
    return sweep_row(report, config, variant or "-", wall_ms)
