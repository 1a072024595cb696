"""Application model: a DAG of processing modules connected by typed tuple
streams.

Edges carry tuples of one type between modules (or from a sensor feed into the
DAG, or out of the DAG to an actuator type). Each edge declares the CPU cost
(MI) to process one tuple at the destination and the payload size (bytes) on
the wire. Modules react to an incoming tuple type by emitting other edges'
tuples according to mapping rules with a selectivity in (0, 1]. Edges may also
be periodic: every placed instance of the source module emits on a fixed
timer, independent of any input.

Control loops name a chain through the graph; the simulator reports the
end-to-end latency from the chain's first emission to its final delivery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple as Pair

from .topology import PhysicalTopology, SchemaError, _require, _NUM

APP_SCHEMA_VERSION = 1

UP = "up"
DOWN = "down"


class AppValidationError(ValueError):
    """Raised when an application graph is structurally unusable."""


@dataclass
class AppModule:
    name: str
    ram_mb: float = 10.0

    def to_dict(self) -> dict:
        return {"name": self.name, "ram_mb": self.ram_mb}


@dataclass
class AppEdge:
    """One typed tuple stream.

    source is a module name, or the sensor tuple type itself when
    from_sensor is set (sensor edges carry the type they are named after).
    dest is a module name, or an actuator type when to_actuator is set.
    """

    tuple_type: str
    source: str
    dest: str
    cpu_mi: float
    nw_bytes: float
    direction: str
    from_sensor: bool = False
    to_actuator: bool = False
    periodic: bool = False
    period_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "tuple_type": self.tuple_type,
            "source": self.source,
            "dest": self.dest,
            "cpu_mi": self.cpu_mi,
            "nw_bytes": self.nw_bytes,
            "direction": self.direction,
            "from_sensor": self.from_sensor,
            "to_actuator": self.to_actuator,
            "periodic": self.periodic,
            "period_ms": self.period_ms,
        }


@dataclass
class TupleMapping:
    """Emission rule: when module sees in_type, emit out_type w.p. selectivity."""

    module: str
    in_type: str
    out_type: str
    selectivity: float = 1.0

    def to_dict(self) -> dict:
        return {
            "module": self.module,
            "in_type": self.in_type,
            "out_type": self.out_type,
            "selectivity": self.selectivity,
        }


@dataclass
class AppLoop:
    """Chain of nodes (sensor tuple type, modules..., actuator type or module)."""

    name: str
    nodes: List[str]

    def to_dict(self) -> dict:
        return {"name": self.name, "nodes": list(self.nodes)}


class TupleInstance:
    """A tuple in flight. lineage ties derived tuples to the emission that
    started the chain; origin_device is where that chain entered the fabric."""

    __slots__ = (
        "tuple_type",
        "cpu_mi",
        "nw_bytes",
        "direction",
        "dest",
        "to_actuator",
        "lineage",
        "origin_device",
    )

    def __init__(self, tuple_type, cpu_mi, nw_bytes, direction, dest, to_actuator,
                 lineage, origin_device):
        self.tuple_type = tuple_type
        self.cpu_mi = cpu_mi
        self.nw_bytes = nw_bytes
        self.direction = direction
        self.dest = dest
        self.to_actuator = to_actuator
        self.lineage = lineage
        self.origin_device = origin_device


@dataclass
class RateReport:
    """Steady-state tuple rates and CPU demand derived from sensor rates.

    contributions: (module, sensor name) -> MI/ms that sensor's chains induce
    at the module. periodic_demand: module -> MI/ms induced by periodic-origin
    chains; charged in full to every placed instance of the module.
    """

    contributions: Dict[Pair[str, str], float] = field(default_factory=dict)
    periodic_demand: Dict[str, float] = field(default_factory=dict)
    module_demand: Dict[str, float] = field(default_factory=dict)
    edge_rates: Dict[str, float] = field(default_factory=dict)


class Application:
    def __init__(self, name: str):
        self.name = name
        self.modules: Dict[str, AppModule] = {}
        self.edges: Dict[str, AppEdge] = {}
        self.mappings: List[TupleMapping] = []
        self.loops: List[AppLoop] = []
        # (module, in_type) -> mappings, rebuilt lazily
        self._mapping_index: Optional[Dict[Pair[str, str], List[TupleMapping]]] = None

    # -- construction --------------------------------------------------

    def add_module(self, name: str, ram_mb: float = 10.0) -> AppModule:
        if name in self.modules:
            raise AppValidationError(f"duplicate module name: {name}")
        mod = AppModule(name, ram_mb)
        self.modules[name] = mod
        return mod

    def add_edge(self, edge: AppEdge) -> AppEdge:
        if edge.tuple_type in self.edges:
            raise AppValidationError(f"duplicate edge tuple type: {edge.tuple_type}")
        self.edges[edge.tuple_type] = edge
        self._mapping_index = None
        return edge

    def add_mapping(self, module: str, in_type: str, out_type: str,
                    selectivity: float = 1.0) -> TupleMapping:
        m = TupleMapping(module, in_type, out_type, selectivity)
        self.mappings.append(m)
        self._mapping_index = None
        return m

    def add_loop(self, name: str, nodes: Sequence[str]) -> AppLoop:
        loop = AppLoop(name, list(nodes))
        self.loops.append(loop)
        return loop

    # -- lookups ----------------------------------------------------------

    def mappings_for(self, module: str, in_type: str) -> List[TupleMapping]:
        if self._mapping_index is None:
            idx: Dict[Pair[str, str], List[TupleMapping]] = {}
            for m in self.mappings:
                idx.setdefault((m.module, m.in_type), []).append(m)
            self._mapping_index = idx
        return self._mapping_index.get((module, in_type), [])

    def sensor_edge(self, tuple_type: str) -> AppEdge:
        edge = self.edges.get(tuple_type)
        if edge is None or not edge.from_sensor:
            raise AppValidationError(f"no sensor-fed edge of type {tuple_type}")
        return edge

    def periodic_edges(self) -> List[AppEdge]:
        return [e for e in self.edges.values() if e.periodic]

    def emit_types(self, module: str, in_type: str, rng=None) -> List[str]:
        """Edge types module emits after processing one in_type tuple.

        With an rng, each mapping fires with its selectivity; without one,
        mappings are treated as certain (used for deterministic runs where
        every selectivity is 1.0).
        """
        out = []
        for m in self.mappings_for(module, in_type):
            if m.selectivity >= 1.0:
                out.append(m.out_type)
            elif rng is not None and rng.random() < m.selectivity:
                out.append(m.out_type)
        return out

    # -- loop resolution ---------------------------------------------------

    def loop_edge_types(self, loop: AppLoop) -> List[str]:
        """Resolve a loop's node chain to the edge types traversed.

        Consecutive node pairs are matched against edges; where several edges
        connect a pair, the one whose mapping is triggered by the previous
        edge in the chain wins.
        """
        if len(loop.nodes) < 2:
            raise AppValidationError(f"loop {loop.name}: needs at least two nodes")
        chain: List[str] = []
        prev_type: Optional[str] = None
        for a, b in zip(loop.nodes, loop.nodes[1:]):
            candidates = [
                e for e in self.edges.values()
                if e.source == a and e.dest == b
                and (not e.from_sensor or prev_type is None)
            ]
            if prev_type is not None and len(candidates) > 1:
                candidates = [
                    e for e in candidates
                    if e.periodic
                    or any(m.out_type == e.tuple_type
                           for m in self.mappings_for(a, prev_type))
                ]
            if len(candidates) != 1:
                raise AppValidationError(
                    f"loop {loop.name}: cannot resolve a unique edge {a} -> {b}"
                )
            chain.append(candidates[0].tuple_type)
            prev_type = candidates[0].tuple_type
        return chain

    # -- validation ---------------------------------------------------------

    def validate(self, topology: Optional[PhysicalTopology] = None) -> List[str]:
        violations: List[str] = []
        for edge in self.edges.values():
            where = f"edge {edge.tuple_type}"
            if edge.direction not in (UP, DOWN):
                violations.append(f"{where}: direction must be up or down")
            if edge.cpu_mi < 0 or edge.nw_bytes <= 0:
                violations.append(f"{where}: cpu_mi must be >= 0 and nw_bytes > 0")
            if edge.from_sensor:
                if edge.source != edge.tuple_type:
                    violations.append(f"{where}: sensor edges must be named after their source feed")
                if edge.periodic:
                    violations.append(f"{where}: sensor edges cannot be periodic")
                if edge.direction != UP:
                    violations.append(f"{where}: sensor edges must flow up")
            elif edge.source not in self.modules:
                violations.append(f"{where}: unknown source module {edge.source}")
            if edge.to_actuator:
                if edge.direction != DOWN:
                    violations.append(f"{where}: actuator edges must flow down")
            elif edge.dest not in self.modules:
                violations.append(f"{where}: unknown dest module {edge.dest}")
            if edge.periodic and edge.period_ms <= 0:
                violations.append(f"{where}: periodic edges need period_ms > 0")
            if not edge.periodic and edge.period_ms:
                violations.append(f"{where}: period_ms set on a non-periodic edge")
        for m in self.mappings:
            where = f"mapping {m.module}[{m.in_type} -> {m.out_type}]"
            if m.module not in self.modules:
                violations.append(f"{where}: unknown module")
            if m.in_type not in self.edges:
                violations.append(f"{where}: unknown input type")
            out = self.edges.get(m.out_type)
            if out is None:
                violations.append(f"{where}: unknown output type")
            elif out.source != m.module:
                violations.append(f"{where}: output edge does not originate at {m.module}")
            elif out.periodic:
                violations.append(f"{where}: periodic edges are timer-driven, not mapped")
            if not (0.0 < m.selectivity <= 1.0):
                violations.append(f"{where}: selectivity must be in (0, 1]")
        if self._upward_cycle():
            violations.append("upward edges between modules must form a DAG")
        for loop in self.loops:
            try:
                self.loop_edge_types(loop)
            except AppValidationError as exc:
                violations.append(str(exc))
        if topology is not None:
            violations.extend(self._validate_against(topology))
        return violations

    def _upward_cycle(self) -> bool:
        adj: Dict[str, List[str]] = {m: [] for m in self.modules}
        indeg = {m: 0 for m in self.modules}
        for e in self.edges.values():
            if e.direction == UP and not e.from_sensor and not e.to_actuator:
                # endpoints outside the module set are reported elsewhere
                if e.source not in adj or e.dest not in indeg:
                    continue
                adj[e.source].append(e.dest)
                indeg[e.dest] += 1
        queue = [m for m, d in indeg.items() if d == 0]
        seen = 0
        while queue:
            seen += 1
            for nxt in adj[queue.pop()]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    queue.append(nxt)
        return seen != len(self.modules)

    def _validate_against(self, topology: PhysicalTopology) -> List[str]:
        violations = []
        for s in topology.sensors:
            edge = self.edges.get(s.tuple_type)
            if edge is None or not edge.from_sensor:
                violations.append(f"sensor {s.name}: no sensor-fed edge of type {s.tuple_type}")
                continue
            if edge.cpu_mi != s.tuple_cpu_mi or edge.nw_bytes != s.tuple_nw_bytes:
                violations.append(
                    f"sensor {s.name}: tuple cost disagrees with edge {s.tuple_type}"
                )
        actuator_types = {a.actuator_type for a in topology.actuators}
        for e in self.edges.values():
            if e.to_actuator and e.dest not in actuator_types:
                violations.append(f"edge {e.tuple_type}: no actuator of type {e.dest}")
        return violations

    # -- steady-state rates ---------------------------------------------------

    def propagate_rates(self, topology: PhysicalTopology) -> RateReport:
        """Push sensor and timer emission rates through the mapping graph.

        Selectivities scale rates multiplicatively. The traversal budget guards
        against mapping cycles whose selectivity product does not decay.
        """
        report = RateReport()
        budget = 10 * max(1, len(self.edges))

        def walk(start_type: str, rate: float, charge_key, is_periodic: bool):
            pops = 0
            stack = [(start_type, rate)]
            while stack:
                pops += 1
                if pops > budget:
                    raise AppValidationError(
                        "mapping cycle does not attenuate; rates diverge"
                    )
                tuple_type, r = stack.pop()
                edge = self.edges[tuple_type]
                report.edge_rates[tuple_type] = report.edge_rates.get(tuple_type, 0.0) + r
                if edge.to_actuator:
                    continue
                dest = edge.dest
                cost = r * edge.cpu_mi
                if is_periodic:
                    report.periodic_demand[dest] = (
                        report.periodic_demand.get(dest, 0.0) + cost
                    )
                else:
                    key = (dest, charge_key)
                    report.contributions[key] = report.contributions.get(key, 0.0) + cost
                for m in self.mappings_for(dest, tuple_type):
                    stack.append((m.out_type, r * m.selectivity))

        for s in sorted(topology.sensors, key=lambda s: s.name):
            walk(s.tuple_type, 1.0 / s.mean_interval_ms(), s.name, False)
        for edge in sorted(self.periodic_edges(), key=lambda e: e.tuple_type):
            walk(edge.tuple_type, 1.0 / edge.period_ms, None, True)

        for (module, _sensor), mi in report.contributions.items():
            report.module_demand[module] = report.module_demand.get(module, 0.0) + mi
        for module, mi in report.periodic_demand.items():
            report.module_demand[module] = report.module_demand.get(module, 0.0) + mi
        return report

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": APP_SCHEMA_VERSION,
            "name": self.name,
            "modules": [m.to_dict() for m in self.modules.values()],
            "edges": [e.to_dict() for e in self.edges.values()],
            "mappings": [m.to_dict() for m in self.mappings],
            "loops": [l.to_dict() for l in self.loops],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def application_from_dict(doc: dict) -> Application:
    version, name, modules, edges, mappings, loops = _require(
        doc,
        {
            "schema_version": (int,),
            "name": (str,),
            "modules": (list,),
            "edges": (list,),
            "mappings": (list,),
            "loops": (list,),
        },
        "application",
    )
    if version != APP_SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version}")
    app = Application(name)
    for i, entry in enumerate(modules):
        mod_name, ram = _require(
            entry, {"name": (str,), "ram_mb": _NUM}, f"modules[{i}]"
        )
        try:
            app.add_module(mod_name, ram)
        except AppValidationError as exc:
            raise SchemaError(str(exc)) from exc
    for i, entry in enumerate(edges):
        (tuple_type, source, dest, cpu, nw, direction, from_sensor, to_actuator,
         periodic, period) = _require(
            entry,
            {
                "tuple_type": (str,),
                "source": (str,),
                "dest": (str,),
                "cpu_mi": _NUM,
                "nw_bytes": _NUM,
                "direction": (str,),
                "from_sensor": (bool,),
                "to_actuator": (bool,),
                "periodic": (bool,),
                "period_ms": _NUM,
            },
            f"edges[{i}]",
        )
        try:
            app.add_edge(
                AppEdge(tuple_type, source, dest, cpu, nw, direction,
                        from_sensor, to_actuator, periodic, period)
            )
        except AppValidationError as exc:
            raise SchemaError(str(exc)) from exc
    for i, entry in enumerate(mappings):
        module, in_type, out_type, selectivity = _require(
            entry,
            {
                "module": (str,),
                "in_type": (str,),
                "out_type": (str,),
                "selectivity": _NUM,
            },
            f"mappings[{i}]",
        )
        app.add_mapping(module, in_type, out_type, selectivity)
    for i, entry in enumerate(loops):
        loop_name, nodes = _require(
            entry, {"name": (str,), "nodes": (list,)}, f"loops[{i}]"
        )
        if not all(isinstance(n, str) for n in nodes):
            raise SchemaError(f"loops[{i}]: nodes must be strings")
        app.add_loop(loop_name, nodes)
    return app


def application_from_json(text: str) -> Application:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    return application_from_dict(doc)
