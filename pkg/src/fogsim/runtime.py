"""Discrete-event execution of a placed application on a physical topology.

Mechanics:

* Device CPUs run processor sharing: the n resident jobs each receive
  capacity/n. Implemented in virtual time so each job costs O(log n) heap work
  regardless of how often the share changes. One pending wake-up event per
  device; a version counter invalidates stale ones.
* Parent-child links are FIFO per direction. A payload departs when the link
  frees up, occupies it for bytes/bandwidth, and lands after the propagation
  latency. Sensor and actuator attachments are latency-only.
* Upward tuples climb toward the root until a device hosts the destination
  module. Downward tuples either retrace the path to the device where their
  lineage entered the fabric (replies) or, when they have no lineage origin
  (timer-driven), fan out to every subtree holding a destination instance.

The event clock is integer microseconds; capacities are MI per millisecond,
so a device executes mips/1000 MI per clock tick.
"""

from __future__ import annotations

import heapq
import math
import random
from typing import Dict, List, Optional, Set, Tuple as Pair

from .application import Application, AppEdge, TupleInstance, DOWN, UP
from .kernel import EventKernel, ms_to_us, us_to_ms
from .metrics import LoopTracker, NetworkUsage, DeviceEnergy, RunReport
from .placement import PlacementMap
from .topology import PhysicalTopology, Sensor


class _Job:
    __slots__ = ("tup", "module", "submitted_us")

    def __init__(self, tup: TupleInstance, module: str, submitted_us: int):
        self.tup = tup
        self.module = module
        self.submitted_us = submitted_us


class _Cpu:
    """Virtual-time processor sharing state for one device."""

    __slots__ = (
        "name",
        "cap_us",
        "heap",
        "n",
        "virtual",
        "last_update_us",
        "version",
        "busy_us",
        "busy_since_us",
    )

    def __init__(self, name: str, mips: float):
        self.name = name
        self.cap_us = mips / 1000.0  # MI executed per microsecond at full share
        self.heap: list = []
        self.n = 0
        self.virtual = 0.0
        self.last_update_us = 0
        self.version = 0
        self.busy_us = 0
        self.busy_since_us = 0

    def advance(self, now_us: int) -> None:
        if self.n > 0 and now_us > self.last_update_us:
            self.virtual += (now_us - self.last_update_us) * self.cap_us / self.n
        self.last_update_us = now_us

    def finish_slack(self) -> float:
        # forgive sub-quantum float residue when deciding a job is done
        return max(self.cap_us * 1e-3, self.virtual * 1e-12)


class _Link:
    __slots__ = ("busy_until_us",)

    def __init__(self):
        self.busy_until_us = 0


class Simulation:
    """One run: wires a topology, application, and placement to the kernel."""

    def __init__(
        self,
        topology: PhysicalTopology,
        app: Application,
        placement: PlacementMap,
        seed: Optional[int] = 0,
        track_transfers: bool = False,
        track_executions: bool = False,
    ):
        self.topology = topology
        self.app = app
        self.placement = placement
        self.kernel = EventKernel()
        self.rng = random.Random(seed)
        self.seed = seed
        self.usage = NetworkUsage()
        self.transfer_log: Optional[List[dict]] = [] if track_transfers else None
        self.exec_log: Optional[List[dict]] = [] if track_executions else None
        self.counters: Dict[str, int] = {
            "sensor_emissions": 0,
            "module_executions": 0,
            "actuator_deliveries": 0,
            "link_transfers": 0,
            "attach_transfers": 0,
            "broadcast_copies": 0,
            "undeliverable": 0,
            "events": 0,
        }
        self._lineage = 0
        self._job_seq = 0
        self._finalized = False

        self._cpus: Dict[str, _Cpu] = {
            name: _Cpu(name, dev.mips) for name, dev in topology.devices.items()
        }
        self._links: Dict[Pair[str, str], _Link] = {}
        for name, dev in topology.devices.items():
            if dev.parent is not None:
                self._links[(name, "up")] = _Link()
                self._links[(name, "down")] = _Link()

        # placement lookups
        self._modules_on: Dict[str, Set[str]] = {}
        for inst in placement.instances():
            self._modules_on.setdefault(inst.device, set()).add(inst.module)

        # routing helpers
        self._paths: Dict[str, List[str]] = {
            name: topology.path_to_root(name) for name in topology.devices
        }
        self._children: Dict[str, List[str]] = {
            name: sorted(topology.children(name)) for name in topology.devices
        }
        self._subtree_modules: Dict[str, Set[str]] = {}
        self._subtree_actuators: Dict[str, Set[str]] = {}
        self._fill_subtree_presence()

        self._actuators_at: Dict[Pair[str, str], list] = {}
        for act in topology.actuators:
            self._actuators_at.setdefault((act.gateway, act.actuator_type), []).append(act)
        for acts in self._actuators_at.values():
            acts.sort(key=lambda a: a.name)

        # loop trackers, indexed by the edge types that open and close them
        self.loop_trackers: List[LoopTracker] = []
        self._loop_starts: Dict[str, List[LoopTracker]] = {}
        self._loop_ends: Dict[str, List[LoopTracker]] = {}
        for loop in app.loops:
            chain = app.loop_edge_types(loop)
            tracker = LoopTracker(loop.name, chain[0], chain[-1])
            self.loop_trackers.append(tracker)
            self._loop_starts.setdefault(chain[0], []).append(tracker)
            self._loop_ends.setdefault(chain[-1], []).append(tracker)

        k = self.kernel
        k.register("sensor", self._on_sensor)
        k.register("arrive", self._on_arrive)
        k.register("complete", self._on_complete)
        k.register("periodic", self._on_periodic)
        k.register("actuate", self._on_actuate)
        k.register("exec", self._on_exec)

        self._sensors: List[Sensor] = sorted(topology.sensors, key=lambda s: s.name)
        for idx, sensor in enumerate(self._sensors):
            k.schedule(self._draw_interval(sensor), "sensor", idx)
        for edge in sorted(app.periodic_edges(), key=lambda e: e.tuple_type):
            for device in placement.devices_for(edge.source):
                k.schedule(edge.period_ms, "periodic", (edge.tuple_type, device))

    # -- setup helpers ---------------------------------------------------

    def _fill_subtree_presence(self) -> None:
        order = sorted(
            self.topology.devices, key=lambda n: len(self._paths[n]), reverse=True
        )
        act_gw: Dict[str, Set[str]] = {}
        for act in self.topology.actuators:
            act_gw.setdefault(act.gateway, set()).add(act.actuator_type)
        for name in order:
            mods = set(self._modules_on.get(name, ()))
            acts = set(act_gw.get(name, ()))
            for child in self._children[name]:
                mods |= self._subtree_modules[child]
                acts |= self._subtree_actuators[child]
            self._subtree_modules[name] = mods
            self._subtree_actuators[name] = acts

    def _draw_interval(self, sensor: Sensor) -> float:
        if sensor.distribution.kind == "exponential":
            return self.rng.expovariate(1.0 / sensor.distribution.value_ms)
        return sensor.distribution.value_ms

    def _hosts(self, device: str, module: str) -> bool:
        return module in self._modules_on.get(device, ())

    def _next_lineage(self) -> int:
        self._lineage += 1
        return self._lineage

    def _child_toward(self, device: str, origin: str) -> Optional[str]:
        path = self._paths.get(origin)
        if not path:
            return None
        try:
            idx = path.index(device)
        except ValueError:
            return None
        return path[idx - 1] if idx > 0 else None

    # -- event handlers ----------------------------------------------------

    def _on_sensor(self, idx: int) -> None:
        sensor = self._sensors[idx]
        edge = self.app.edges[sensor.tuple_type]
        tup = TupleInstance(
            edge.tuple_type,
            edge.cpu_mi,
            edge.nw_bytes,
            edge.direction,
            edge.dest,
            edge.to_actuator,
            self._next_lineage(),
            sensor.gateway,
        )
        self.counters["sensor_emissions"] += 1
        now = self.kernel.now()
        for tracker in self._loop_starts.get(edge.tuple_type, ()):
            tracker.on_start(tup.lineage, now)
        self._attach_send(sensor.name, sensor.gateway, sensor.gateway_latency_ms, tup)
        self.kernel.schedule(self._draw_interval(sensor), "sensor", idx)

    def _on_arrive(self, payload) -> None:
        device, tup = payload
        self._handle_at_device(device, tup)

    def _on_periodic(self, payload) -> None:
        tuple_type, device = payload
        edge = self.app.edges[tuple_type]
        self._emit_from_module(device, edge, parent=None)
        self.kernel.schedule(edge.period_ms, "periodic", payload)

    def _on_actuate(self, payload) -> None:
        tup = payload
        self.counters["actuator_deliveries"] += 1
        now = self.kernel.now()
        for tracker in self._loop_ends.get(tup.tuple_type, ()):
            tracker.on_end(tup.lineage, now)

    def _on_exec(self, payload) -> None:
        device, module, cpu_mi = payload
        tup = TupleInstance(
            "__exec__", cpu_mi, 0.0, UP, module, False, self._next_lineage(), device
        )
        self._submit(device, module, tup)

    # -- CPU ------------------------------------------------------------------

    def _submit(self, device: str, module: str, tup: TupleInstance) -> None:
        cpu = self._cpus[device]
        now_us = self.kernel.now_us
        cpu.advance(now_us)
        if cpu.n == 0:
            # fresh busy period: restart virtual time to keep floats small
            cpu.virtual = 0.0
            cpu.busy_since_us = now_us
        self._job_seq += 1
        job = _Job(tup, module, now_us)
        heapq.heappush(cpu.heap, (cpu.virtual + tup.cpu_mi, self._job_seq, job))
        cpu.n += 1
        self._reschedule_completion(cpu)

    def _reschedule_completion(self, cpu: _Cpu) -> None:
        cpu.version += 1
        if cpu.n == 0:
            return
        finish_v = cpu.heap[0][0]
        remaining = max(0.0, finish_v - cpu.virtual)
        dt_us = math.ceil(remaining * cpu.n / cpu.cap_us)
        self.kernel.schedule_at_us(
            self.kernel.now_us + dt_us, "complete", (cpu.name, cpu.version)
        )

    def _on_complete(self, payload) -> None:
        device, version = payload
        cpu = self._cpus[device]
        if version != cpu.version:
            return  # superseded by a later submit or completion
        now_us = self.kernel.now_us
        cpu.advance(now_us)
        slack = cpu.finish_slack()
        finished: List[_Job] = []
        while cpu.heap and cpu.heap[0][0] <= cpu.virtual + slack:
            _fv, _seq, job = heapq.heappop(cpu.heap)
            cpu.n -= 1
            finished.append(job)
        if cpu.n == 0:
            cpu.busy_us += now_us - cpu.busy_since_us
        self._reschedule_completion(cpu)
        for job in finished:
            self._finish_job(device, job)

    def _finish_job(self, device: str, job: _Job) -> None:
        self.counters["module_executions"] += 1
        now = self.kernel.now()
        tup = job.tup
        if self.exec_log is not None:
            self.exec_log.append(
                {
                    "device": device,
                    "module": job.module,
                    "tuple_type": tup.tuple_type,
                    "cpu_mi": tup.cpu_mi,
                    "submitted_ms": us_to_ms(job.submitted_us),
                    "completed_ms": now,
                }
            )
        for tracker in self._loop_ends.get(tup.tuple_type, ()):
            if not self.app.edges[tup.tuple_type].to_actuator:
                tracker.on_end(tup.lineage, now)
        for out_type in self.app.emit_types(job.module, tup.tuple_type, self.rng):
            self._emit_from_module(device, self.app.edges[out_type], parent=tup)

    # -- emission and routing ----------------------------------------------------

    def _emit_from_module(
        self, device: str, edge: AppEdge, parent: Optional[TupleInstance]
    ) -> None:
        if parent is not None:
            lineage = parent.lineage
            origin = parent.origin_device or device
        else:
            lineage = self._next_lineage()
            origin = None if edge.direction == DOWN else device
        tup = TupleInstance(
            edge.tuple_type,
            edge.cpu_mi,
            edge.nw_bytes,
            edge.direction,
            edge.dest,
            edge.to_actuator,
            lineage,
            origin,
        )
        for tracker in self._loop_starts.get(edge.tuple_type, ()):
            tracker.on_start(lineage, self.kernel.now())
        self._handle_at_device(device, tup)

    def _handle_at_device(self, device: str, tup: TupleInstance) -> None:
        if tup.direction == DOWN and tup.origin_device is None:
            self._broadcast_step(device, tup)
            return
        if not tup.to_actuator and self._hosts(device, tup.dest):
            self._submit(device, tup.dest, tup)
            return
        if tup.direction == UP:
            parent = self.topology.devices[device].parent
            if parent is None:
                self.counters["undeliverable"] += 1
                self.usage.undeliverable += 1
                return
            self._link_send(device, "up", tup)
            return
        # downward with a concrete origin: retrace the path it came up on
        if tup.to_actuator and device == tup.origin_device:
            self._deliver_actuator(device, tup)
            return
        if device == tup.origin_device:
            self.counters["undeliverable"] += 1
            self.usage.undeliverable += 1
            return
        child = self._child_toward(device, tup.origin_device)
        if child is None:
            self.counters["undeliverable"] += 1
            self.usage.undeliverable += 1
            return
        self._link_send(child, "down", tup)

    def _broadcast_step(self, device: str, tup: TupleInstance) -> None:
        if tup.to_actuator:
            if (device, tup.dest) in self._actuators_at:
                self._deliver_actuator(device, tup)
        elif self._hosts(device, tup.dest):
            self._submit(device, tup.dest, tup)
        for child in self._children[device]:
            present = (
                self._subtree_actuators[child]
                if tup.to_actuator
                else self._subtree_modules[child]
            )
            if tup.dest in present:
                self.counters["broadcast_copies"] += 1
                self._link_send(child, "down", tup)

    def _deliver_actuator(self, device: str, tup: TupleInstance) -> None:
        acts = self._actuators_at.get((device, tup.dest))
        if not acts:
            self.counters["undeliverable"] += 1
            self.usage.undeliverable += 1
            return
        for act in acts:
            self._attach_send(device, act.name, act.gateway_latency_ms, tup, actuate=True)

    # -- transport ------------------------------------------------------------------

    def _attach_send(
        self, src: str, dst: str, latency_ms: float, tup: TupleInstance,
        actuate: bool = False,
    ) -> None:
        """Latency-only hop between a device and an attached sensor/actuator."""
        now_us = self.kernel.now_us
        arrive_us = now_us + ms_to_us(latency_ms)
        self.counters["attach_transfers"] += 1
        self.usage.record_hop(src, dst, tup.nw_bytes, latency_ms)
        if self.transfer_log is not None:
            self.transfer_log.append(
                {
                    "kind": "attach",
                    "src": src,
                    "dst": dst,
                    "tuple_type": tup.tuple_type,
                    "nw_bytes": tup.nw_bytes,
                    "sent_ms": us_to_ms(now_us),
                    "depart_ms": us_to_ms(now_us),
                    "arrive_ms": us_to_ms(arrive_us),
                }
            )
        if actuate:
            self.kernel.schedule_at_us(arrive_us, "actuate", tup)
        else:
            self.kernel.schedule_at_us(arrive_us, "arrive", (dst, tup))

    def _link_send(self, child: str, direction: str, tup: TupleInstance) -> None:
        """FIFO transfer on the parent link of `child` in the given direction."""
        dev = self.topology.devices[child]
        if direction == "up":
            src, dst = child, dev.parent
            bw = dev.uplink_bw_bytes_per_ms
        else:
            src, dst = dev.parent, child
            bw = dev.downlink_bw_bytes_per_ms
        link = self._links[(child, direction)]
        now_us = self.kernel.now_us
        depart_us = max(now_us, link.busy_until_us)
        ser_us = math.ceil(tup.nw_bytes / bw * 1000.0)
        link.busy_until_us = depart_us + ser_us
        arrive_us = depart_us + ser_us + ms_to_us(dev.uplink_latency_ms)
        self.counters["link_transfers"] += 1
        self.usage.record_hop(src, dst, tup.nw_bytes, dev.uplink_latency_ms)
        if self.transfer_log is not None:
            self.transfer_log.append(
                {
                    "kind": "link",
                    "src": src,
                    "dst": dst,
                    "tuple_type": tup.tuple_type,
                    "nw_bytes": tup.nw_bytes,
                    "sent_ms": us_to_ms(now_us),
                    "depart_ms": us_to_ms(depart_us),
                    "arrive_ms": us_to_ms(arrive_us),
                }
            )
        self.kernel.schedule_at_us(arrive_us, "arrive", (dst, tup))

    # -- test hook --------------------------------------------------------------------

    def schedule_execution(
        self, device: str, module: str, cpu_mi: float, at_ms: float
    ) -> None:
        """Inject a bare job, bypassing the application graph. Test use."""
        self.kernel.schedule(at_ms - self.kernel.now(), "exec", (device, module, cpu_mi))

    # -- run loop ----------------------------------------------------------------------

    def advance(self, to_ms: float):
        stats = self.kernel.run_until(to_ms)
        self.counters["events"] += stats.events_processed
        return stats

    def finalize(
        self,
        scenario: str = "custom",
        parameters: Optional[dict] = None,
    ) -> RunReport:
        if self._finalized:
            raise RuntimeError("finalize() may only be called once")
        self._finalized = True
        end_us = self.kernel.now_us
        duration_ms = us_to_ms(end_us)
        by_device: List[DeviceEnergy] = []
        by_class: Dict[str, float] = {}
        for name in sorted(self.topology.devices):
            cpu = self._cpus[name]
            busy_us = cpu.busy_us
            if cpu.n > 0:
                busy_us += end_us - cpu.busy_since_us
            dev = self.topology.devices[name]
            busy_s = busy_us / 1e6
            total_s = end_us / 1e6
            energy = dev.idle_power_w * total_s + (dev.busy_power_w - dev.idle_power_w) * busy_s
            cls = self.topology.device_class(name)
            by_device.append(DeviceEnergy(name, cls, busy_us / 1000.0, energy))
            by_class[cls] = by_class.get(cls, 0.0) + energy
        report = RunReport(
            scenario=scenario,
            placement_policy=self.placement.policy,
            duration_ms=duration_ms,
            seed=self.seed,
            parameters=parameters or {},
            loops=[t.to_dict() for t in self.loop_trackers],
            network=self.usage.to_dict(duration_ms),
            energy_by_device=[e.to_dict() for e in by_device],
            energy_by_class=by_class,
            counters=dict(self.counters),
            placement=self.placement.to_dict(),
        )
        return report

    def run(
        self,
        duration_ms: float,
        scenario: str = "custom",
        parameters: Optional[dict] = None,
    ) -> RunReport:
        self.advance(duration_ms)
        return self.finalize(scenario, parameters)
