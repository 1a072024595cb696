"""Physical topology: a single-rooted tree of fog devices plus attached sensors
and actuators.

Devices link to their parent over one uplink; bandwidth is directional
(uplink_bw for child-to-parent, downlink_bw for parent-to-child) while the
propagation latency is symmetric. Sensors and actuators hang off a gateway
device over a latency-only attachment.

Units used throughout the model: time in milliseconds, work in million
instructions (MI), device capacity (the ``mips`` field) in MI per millisecond,
bandwidth in bytes per millisecond, power in watts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

SCHEMA_VERSION = 1

DISTRIBUTION_KINDS = ("deterministic", "exponential")

# Depth-derived device classes used for energy grouping and constraint targets.
CLASS_BY_DEPTH = {0: "cloud", 1: "isp_gateway", 2: "wifi_gateway"}
EDGE_CLASS = "edge_device"


class SchemaError(ValueError):
    """Raised when a topology document does not match the expected schema."""


@dataclass
class EmissionDistribution:
    """Inter-emission time distribution for a sensor."""

    kind: str = "deterministic"
    value_ms: float = 1.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value_ms": self.value_ms}


@dataclass
class FogDevice:
    name: str
    parent: Optional[str]
    mips: float
    ram_mb: float
    storage_mb: float
    uplink_bw_bytes_per_ms: float
    downlink_bw_bytes_per_ms: float
    busy_power_w: float
    idle_power_w: float
    uplink_latency_ms: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parent": self.parent,
            "mips": self.mips,
            "ram_mb": self.ram_mb,
            "storage_mb": self.storage_mb,
            "uplink_bw_bytes_per_ms": self.uplink_bw_bytes_per_ms,
            "downlink_bw_bytes_per_ms": self.downlink_bw_bytes_per_ms,
            "busy_power_w": self.busy_power_w,
            "idle_power_w": self.idle_power_w,
            "uplink_latency_ms": self.uplink_latency_ms,
        }


@dataclass
class Sensor:
    name: str
    tuple_type: str
    gateway: str
    gateway_latency_ms: float
    distribution: EmissionDistribution
    tuple_cpu_mi: float
    tuple_nw_bytes: float

    def mean_interval_ms(self) -> float:
        # Both supported kinds use value_ms as the mean inter-emission time.
        return self.distribution.value_ms

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "tuple_type": self.tuple_type,
            "gateway": self.gateway,
            "gateway_latency_ms": self.gateway_latency_ms,
            "distribution": self.distribution.to_dict(),
            "tuple_cpu_mi": self.tuple_cpu_mi,
            "tuple_nw_bytes": self.tuple_nw_bytes,
        }


@dataclass
class Actuator:
    name: str
    actuator_type: str
    gateway: str
    gateway_latency_ms: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "actuator_type": self.actuator_type,
            "gateway": self.gateway,
            "gateway_latency_ms": self.gateway_latency_ms,
        }


@dataclass
class PhysicalTopology:
    """Container for devices, sensors, and actuators with tree helpers."""

    devices: Dict[str, FogDevice] = field(default_factory=dict)
    sensors: List[Sensor] = field(default_factory=list)
    actuators: List[Actuator] = field(default_factory=list)

    # -- construction --------------------------------------------------

    def add_device(self, device: FogDevice) -> FogDevice:
        if device.name in self.devices:
            raise SchemaError(f"duplicate device name: {device.name}")
        self.devices[device.name] = device
        return device

    def add_sensor(self, sensor: Sensor) -> Sensor:
        self.sensors.append(sensor)
        return sensor

    def add_actuator(self, actuator: Actuator) -> Actuator:
        self.actuators.append(actuator)
        return actuator

    # -- tree helpers ---------------------------------------------------

    def root(self) -> FogDevice:
        roots = [d for d in self.devices.values() if d.parent is None]
        if len(roots) != 1:
            raise SchemaError(f"expected exactly one root device, found {len(roots)}")
        return roots[0]

    def children(self, name: str) -> List[str]:
        return [d.name for d in self.devices.values() if d.parent == name]

    def leaves(self) -> List[str]:
        have_children = {d.parent for d in self.devices.values() if d.parent}
        return sorted(n for n in self.devices if n not in have_children)

    def path_to_root(self, name: str) -> List[str]:
        """Device names from name (inclusive) up to the root (inclusive)."""
        path = []
        seen = set()
        cur: Optional[str] = name
        while cur is not None:
            if cur in seen:
                raise SchemaError(f"parent cycle through device {cur}")
            seen.add(cur)
            dev = self.devices.get(cur)
            if dev is None:
                raise SchemaError(f"unknown device in parent chain: {cur}")
            path.append(cur)
            cur = dev.parent
        return path

    def depth(self, name: str) -> int:
        return len(self.path_to_root(name)) - 1

    def device_class(self, name: str) -> str:
        """Depth-derived grouping tag used for energy reporting and pins."""
        return CLASS_BY_DEPTH.get(self.depth(name), EDGE_CLASS)

    def subtree(self, name: str) -> List[str]:
        out = [name]
        stack = [name]
        while stack:
            for child in self.children(stack.pop()):
                out.append(child)
                stack.append(child)
        return out

    # -- validation -----------------------------------------------------

    def validate(self) -> List[str]:
        """Return human-readable violations; an empty list means valid."""
        violations: List[str] = []
        roots = [d for d in self.devices.values() if d.parent is None]
        if len(roots) != 1:
            violations.append(f"topology must have exactly one root, found {len(roots)}")
        for dev in self.devices.values():
            if dev.parent is not None and dev.parent not in self.devices:
                violations.append(f"device {dev.name}: unknown parent {dev.parent}")
            if dev.mips <= 0:
                violations.append(f"device {dev.name}: mips must be positive")
            if dev.ram_mb <= 0:
                violations.append(f"device {dev.name}: ram_mb must be positive")
            if dev.storage_mb < 0:
                violations.append(f"device {dev.name}: storage_mb must be non-negative")
            if dev.uplink_bw_bytes_per_ms <= 0 or dev.downlink_bw_bytes_per_ms <= 0:
                violations.append(f"device {dev.name}: link bandwidth must be positive")
            if dev.uplink_latency_ms < 0:
                violations.append(f"device {dev.name}: uplink_latency_ms must be non-negative")
            if dev.idle_power_w < 0 or dev.busy_power_w < dev.idle_power_w:
                violations.append(
                    f"device {dev.name}: need busy_power_w >= idle_power_w >= 0"
                )
        # Cycle check: every device must reach the root.
        for name in self.devices:
            try:
                self.path_to_root(name)
            except SchemaError as exc:
                violations.append(str(exc))
        seen_attach = set()
        for s in self.sensors:
            if s.name in seen_attach:
                violations.append(f"duplicate sensor name: {s.name}")
            seen_attach.add(s.name)
            if s.gateway not in self.devices:
                violations.append(f"sensor {s.name}: unknown gateway {s.gateway}")
            if s.distribution.kind not in DISTRIBUTION_KINDS:
                violations.append(f"sensor {s.name}: unknown distribution {s.distribution.kind}")
            if s.distribution.value_ms <= 0:
                violations.append(f"sensor {s.name}: distribution value_ms must be positive")
            if s.gateway_latency_ms < 0:
                violations.append(f"sensor {s.name}: gateway_latency_ms must be non-negative")
            if s.tuple_cpu_mi <= 0:
                violations.append(f"sensor {s.name}: tuple_cpu_mi must be positive")
            if s.tuple_nw_bytes <= 0:
                violations.append(f"sensor {s.name}: tuple_nw_bytes must be positive")
        for a in self.actuators:
            if a.name in seen_attach:
                violations.append(f"duplicate actuator name: {a.name}")
            seen_attach.add(a.name)
            if a.gateway not in self.devices:
                violations.append(f"actuator {a.name}: unknown gateway {a.gateway}")
            if a.gateway_latency_ms < 0:
                violations.append(f"actuator {a.name}: gateway_latency_ms must be non-negative")
        return violations

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "devices": [d.to_dict() for d in self.devices.values()],
            "sensors": [s.to_dict() for s in self.sensors],
            "actuators": [a.to_dict() for a in self.actuators],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _require(obj: dict, keys: dict, where: str) -> list:
    """Check key set and types; return the values in declared order."""
    if not isinstance(obj, dict):
        raise SchemaError(f"{where}: expected an object")
    unknown = set(obj) - set(keys)
    if unknown:
        raise SchemaError(f"{where}: unknown fields {sorted(unknown)}")
    out = []
    for key, kinds in keys.items():
        if key not in obj:
            raise SchemaError(f"{where}: missing field {key}")
        value = obj[key]
        if kinds is not None and not isinstance(value, kinds):
            # bool is an int subclass; reject it for numeric fields
            raise SchemaError(f"{where}: field {key} has wrong type")
        if isinstance(value, bool) and kinds in ((int, float), (int, float, type(None))):
            raise SchemaError(f"{where}: field {key} has wrong type")
        out.append(value)
    return out


_NUM = (int, float)


def topology_from_dict(doc: dict) -> PhysicalTopology:
    version, devices, sensors, actuators = _require(
        doc,
        {"schema_version": (int,), "devices": (list,), "sensors": (list,), "actuators": (list,)},
        "topology",
    )
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version}")
    topo = PhysicalTopology()
    for i, entry in enumerate(devices):
        (name, parent, mips, ram, storage, up_bw, down_bw, busy, idle, lat) = _require(
            entry,
            {
                "name": (str,),
                "parent": (str, type(None)),
                "mips": _NUM,
                "ram_mb": _NUM,
                "storage_mb": _NUM,
                "uplink_bw_bytes_per_ms": _NUM,
                "downlink_bw_bytes_per_ms": _NUM,
                "busy_power_w": _NUM,
                "idle_power_w": _NUM,
                "uplink_latency_ms": _NUM,
            },
            f"devices[{i}]",
        )
        topo.add_device(
            FogDevice(name, parent, mips, ram, storage, up_bw, down_bw, busy, idle, lat)
        )
    for i, entry in enumerate(sensors):
        (name, tuple_type, gateway, lat, dist, cpu, nw) = _require(
            entry,
            {
                "name": (str,),
                "tuple_type": (str,),
                "gateway": (str,),
                "gateway_latency_ms": _NUM,
                "distribution": (dict,),
                "tuple_cpu_mi": _NUM,
                "tuple_nw_bytes": _NUM,
            },
            f"sensors[{i}]",
        )
        kind, value = _require(
            dist, {"kind": (str,), "value_ms": _NUM}, f"sensors[{i}].distribution"
        )
        topo.add_sensor(
            Sensor(name, tuple_type, gateway, lat, EmissionDistribution(kind, value), cpu, nw)
        )
    for i, entry in enumerate(actuators):
        (name, actuator_type, gateway, lat) = _require(
            entry,
            {
                "name": (str,),
                "actuator_type": (str,),
                "gateway": (str,),
                "gateway_latency_ms": _NUM,
            },
            f"actuators[{i}]",
        )
        topo.add_actuator(Actuator(name, actuator_type, gateway, lat))
    return topo


def topology_from_json(text: str) -> PhysicalTopology:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return topology_from_dict(doc)
