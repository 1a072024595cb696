"""Module placement: decide which fog device hosts each application module.

Two built-in policies:

* cloud: every unconstrained module runs on the root device. Constraint pins
  are still honored. No capacity check is made; an overloaded root is exactly
  the phenomenon this baseline exists to expose.
* edgeward: walk each leaf-to-root path and push modules as close to the
  sensors as their CPU demand allows. A module instance already placed on the
  current path is merged with the new path's demand and migrates upward until
  it fits.

Demand is expressed in MI per millisecond of device capacity and comes from
Application.propagate_rates: per-(module, sensor) contributions plus a
per-instance charge for periodic-origin traffic.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set

from .application import Application, RateReport, UP
from .topology import PhysicalTopology, _require, _NUM

CLASS_PREFIX = "class:"


class PlacementError(Exception):
    """Raised when a module cannot be assigned to any device."""


@dataclass
class PlacementConstraint:
    """Pin a module onto a device (by name) or onto every device of a class.

    exclusive additionally reserves the target devices: no algorithm-placed
    module may share them.
    """

    module: str
    target: str
    exclusive: bool = False

    def resolve(self, topology: PhysicalTopology) -> List[str]:
        if self.target.startswith(CLASS_PREFIX):
            cls = self.target[len(CLASS_PREFIX):]
            names = [n for n in topology.devices if topology.device_class(n) == cls]
            if not names:
                raise PlacementError(
                    f"constraint on {self.module}: no device of class {cls}"
                )
            return sorted(names)
        if self.target not in topology.devices:
            raise PlacementError(
                f"constraint on {self.module}: unknown device {self.target}"
            )
        return [self.target]

    def to_dict(self) -> dict:
        return {"module": self.module, "target": self.target, "exclusive": self.exclusive}


def constraint_from_dict(doc: dict) -> PlacementConstraint:
    module, target, exclusive = _require(
        doc,
        {"module": (str,), "target": (str,), "exclusive": (bool,)},
        "constraint",
    )
    return PlacementConstraint(module, target, exclusive)


@dataclass
class ModuleInstance:
    module: str
    device: str
    share_mi_per_ms: float = 0.0
    served_sensors: Set[str] = field(default_factory=set)
    pinned: bool = False

    def to_dict(self) -> dict:
        return {
            "module": self.module,
            "device": self.device,
            "demand_mi_per_ms": round(self.share_mi_per_ms, 9),
            "serves": sorted(self.served_sensors),
            "pinned": self.pinned,
        }


class PlacementMap:
    """Where module instances live; at most one instance per (module, device)."""

    def __init__(self, policy: str):
        self.policy = policy
        self._instances: Dict[tuple, ModuleInstance] = {}

    def add(self, inst: ModuleInstance) -> ModuleInstance:
        key = (inst.module, inst.device)
        if key in self._instances:
            raise PlacementError(f"{inst.module} already placed on {inst.device}")
        self._instances[key] = inst
        return inst

    def move(self, inst: ModuleInstance, new_device: str) -> None:
        del self._instances[(inst.module, inst.device)]
        inst.device = new_device
        self._instances[(inst.module, inst.device)] = inst

    def get(self, module: str, device: str) -> Optional[ModuleInstance]:
        return self._instances.get((module, device))

    def instances(self) -> List[ModuleInstance]:
        return sorted(self._instances.values(), key=lambda i: (i.module, i.device))

    def devices_for(self, module: str) -> List[str]:
        return sorted(d for (m, d) in self._instances if m == module)

    def modules_on(self, device: str) -> List[str]:
        return sorted(m for (m, d) in self._instances if d == device)

    def has_instance(self, module: str, device: str) -> bool:
        return (module, device) in self._instances

    def placed_modules(self) -> Set[str]:
        return {m for (m, _d) in self._instances}

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "instances": [i.to_dict() for i in self.instances()],
        }


def _module_topo_order(app: Application) -> List[str]:
    """Modules ordered so upward-DAG predecessors come first; name-stable."""
    preds: Dict[str, Set[str]] = {m: set() for m in app.modules}
    succs: Dict[str, List[str]] = {m: [] for m in app.modules}
    for e in app.edges.values():
        if e.direction == UP and not e.from_sensor and not e.to_actuator:
            if e.dest not in preds[e.dest] and e.source != e.dest:
                preds[e.dest].add(e.source)
                succs[e.source].append(e.dest)
    ready = sorted(m for m, p in preds.items() if not p)
    heapq.heapify(ready)
    order: List[str] = []
    while ready:
        m = heapq.heappop(ready)
        order.append(m)
        for nxt in succs[m]:
            preds[nxt].discard(m)
            if not preds[nxt]:
                heapq.heappush(ready, nxt)
    if len(order) != len(app.modules):
        raise PlacementError("upward edges between modules contain a cycle")
    return order


def _up_predecessors(app: Application) -> Dict[str, Set[str]]:
    preds: Dict[str, Set[str]] = {m: set() for m in app.modules}
    for e in app.edges.values():
        if e.direction == UP and not e.from_sensor and not e.to_actuator and e.source != e.dest:
            preds[e.dest].add(e.source)
    return preds


def _sensors_by_gateway(topology: PhysicalTopology) -> Dict[str, List[str]]:
    by_gw: Dict[str, List[str]] = {}
    for s in topology.sensors:
        by_gw.setdefault(s.gateway, []).append(s.name)
    for names in by_gw.values():
        names.sort()
    return by_gw


def _pin_modules(
    topology: PhysicalTopology,
    app: Application,
    rates: RateReport,
    constraints: Sequence[PlacementConstraint],
    pmap: PlacementMap,
    avail: Dict[str, float],
) -> Set[str]:
    """Place pinned modules and charge their demand; return blocked devices."""
    by_gw = _sensors_by_gateway(topology)
    blocked: Set[str] = set()
    for c in constraints:
        if c.module not in app.modules:
            raise PlacementError(f"constraint on unknown module {c.module}")
        for device in c.resolve(topology):
            served = set()
            share = rates.periodic_demand.get(c.module, 0.0)
            for dev in topology.subtree(device):
                for sensor in by_gw.get(dev, ()):  # only sensors under this pin
                    mi = rates.contributions.get((c.module, sensor), 0.0)
                    if mi > 0.0:
                        served.add(sensor)
                        share += mi
            pmap.add(ModuleInstance(c.module, device, share, served, pinned=True))
            avail[device] -= share
            if c.exclusive:
                blocked.add(device)
    return blocked


def place_cloud_only(
    topology: PhysicalTopology,
    app: Application,
    rates: RateReport,
    constraints: Sequence[PlacementConstraint] = (),
) -> PlacementMap:
    pmap = PlacementMap("cloud")
    avail = {name: dev.mips for name, dev in topology.devices.items()}
    pinned = _pin_modules(topology, app, rates, constraints, pmap, avail)
    del pinned  # exclusivity is moot when everything else goes to the root
    root = topology.root().name
    pinned_modules = {c.module for c in constraints}
    for module in _module_topo_order(app):
        if module in pinned_modules:
            continue
        served = {s for (m, s) in rates.contributions if m == module}
        share = sum(
            mi for (m, _s), mi in rates.contributions.items() if m == module
        ) + rates.periodic_demand.get(module, 0.0)
        pmap.add(ModuleInstance(module, root, share, served))
        avail[root] -= share
    return pmap


def place_edge_ward(
    topology: PhysicalTopology,
    app: Application,
    rates: RateReport,
    constraints: Sequence[PlacementConstraint] = (),
) -> PlacementMap:
    pmap = PlacementMap("edgeward")
    avail = {name: dev.mips for name, dev in topology.devices.items()}
    blocked = _pin_modules(topology, app, rates, constraints, pmap, avail)
    pinned_modules = {c.module for c in constraints}
    topo_order = _module_topo_order(app)
    preds = _up_predecessors(app)
    by_gw = _sensors_by_gateway(topology)

    def path_share(module: str, leaf_sensors: List[str]) -> tuple:
        served = set()
        share = rates.periodic_demand.get(module, 0.0)
        for sensor in leaf_sensors:
            mi = rates.contributions.get((module, sensor), 0.0)
            if mi > 0.0:
                served.add(sensor)
                share += mi
        return share, served

    for leaf in topology.leaves():
        leaf_sensors = by_gw.get(leaf, [])
        if not leaf_sensors:
            continue  # nothing enters the fabric here; the path serves no one
        path = topology.path_to_root(leaf)
        candidates: List[str] = []
        considered: Set[str] = set()

        def refresh_candidates():
            placed = pmap.placed_modules()
            for module in topo_order:
                if module in considered or module in pinned_modules:
                    continue
                if all(p in placed or p in pinned_modules for p in preds[module]):
                    considered.add(module)
                    candidates.append(module)

        for device in path:
            while True:
                refresh_candidates()
                progressed = False
                for module in list(candidates):
                    host = next(
                        (d for d in path if pmap.has_instance(module, d)), None
                    )
                    if host is not None:
                        inst = pmap.get(module, host)
                        new_sensors = set()
                        extra = 0.0  # periodic charge already sits in the instance
                        for sensor in leaf_sensors:
                            if sensor in inst.served_sensors:
                                continue
                            mi = rates.contributions.get((module, sensor), 0.0)
                            if mi > 0.0:
                                new_sensors.add(sensor)
                                extra += mi
                        avail[host] += inst.share_mi_per_ms
                        merged = inst.share_mi_per_ms + extra
                        target = host
                        while merged > avail[target] or target in blocked:
                            parent = topology.devices[target].parent
                            if parent is None:
                                raise PlacementError(
                                    f"module {module}: merged demand {merged:.3f} "
                                    f"MI/ms exceeds every device up to the root"
                                )
                            target = parent
                        if target != host:
                            pmap.move(inst, target)
                        inst.share_mi_per_ms = merged
                        inst.served_sensors |= new_sensors
                        avail[target] -= merged
                        candidates.remove(module)
                        progressed = True
                        continue
                    if device in blocked:
                        continue  # reserved for a pinned module; try higher up
                    share, served = path_share(module, leaf_sensors)
                    if share <= avail[device]:
                        pmap.add(ModuleInstance(module, device, share, served))
                        avail[device] -= share
                        candidates.remove(module)
                        progressed = True
                if not progressed:
                    break
        if candidates:
            raise PlacementError(
                f"modules {sorted(candidates)} do not fit on the path from "
                f"{leaf} to the root"
            )

    missing = set(app.modules) - pmap.placed_modules()
    if missing:
        raise PlacementError(f"modules never placed: {sorted(missing)}")
    return pmap


POLICIES = {
    "cloud": place_cloud_only,
    "edgeward": place_edge_ward,
}


def run_policy(
    policy: str,
    topology: PhysicalTopology,
    app: Application,
    rates: RateReport,
    constraints: Sequence[PlacementConstraint] = (),
) -> PlacementMap:
    try:
        fn = POLICIES[policy]
    except KeyError:
        raise PlacementError(f"unknown placement policy {policy}") from None
    return fn(topology, app, rates, constraints)


def validate_placement(
    topology: PhysicalTopology,
    app: Application,
    pmap: PlacementMap,
) -> tuple:
    """Return (violations, warnings). RAM overcommit is hard; CPU is advisory."""
    violations: List[str] = []
    warnings: List[str] = []
    missing = set(app.modules) - pmap.placed_modules()
    if missing:
        violations.append(f"unplaced modules: {sorted(missing)}")
    ram_used: Dict[str, float] = {}
    cpu_used: Dict[str, float] = {}
    for inst in pmap.instances():
        if inst.device not in topology.devices:
            violations.append(f"{inst.module}: placed on unknown device {inst.device}")
            continue
        ram_used[inst.device] = ram_used.get(inst.device, 0.0) + app.modules[inst.module].ram_mb
        cpu_used[inst.device] = cpu_used.get(inst.device, 0.0) + inst.share_mi_per_ms
    for device, used in sorted(ram_used.items()):
        cap = topology.devices[device].ram_mb
        if used > cap:
            violations.append(f"device {device}: RAM overcommitted ({used} > {cap} MB)")
    for device, used in sorted(cpu_used.items()):
        cap = topology.devices[device].mips
        if used > cap:
            warnings.append(
                f"device {device}: CPU demand {used:.1f} MI/ms exceeds capacity "
                f"{cap:.1f}; queues will grow"
            )
    return violations, warnings
