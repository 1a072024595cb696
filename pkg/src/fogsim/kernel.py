"""Deterministic discrete-event kernel.

The clock is an integer count of microseconds so that event ordering never
depends on floating-point rounding. Public APIs speak milliseconds; the
integer clock is exposed for hot paths that want to avoid conversions.
Events that share a fire time dispatch in insertion order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

US_PER_MS = 1000


class KernelError(Exception):
    """Base class for kernel misuse."""


class ArgumentError(KernelError):
    """Raised for out-of-range arguments such as negative delays."""


class ConfigurationError(KernelError):
    """Raised when an event targets an entity that was never registered."""


def ms_to_us(ms: float) -> int:
    """Convert milliseconds to the integer microsecond clock."""
    return round(ms * US_PER_MS)


def us_to_ms(us: int) -> float:
    return us / US_PER_MS


@dataclass
class RunStats:
    """Outcome of one run_until call."""

    events_processed: int
    final_time_ms: float


class EventKernel:
    """Priority-queue scheduler with FIFO ordering for simultaneous events."""

    def __init__(self) -> None:
        self._heap: list = []
        self._seq = 0
        self._now_us = 0
        self._handlers: dict = {}

    def register(self, target, handler) -> None:
        """Attach the callable invoked with the payload of events for target."""
        self._handlers[target] = handler

    def now(self) -> float:
        """Current simulation time in milliseconds."""
        return self._now_us / US_PER_MS

    @property
    def now_us(self) -> int:
        return self._now_us

    def schedule(self, delay_ms: float, target, payload=None) -> int:
        """Schedule an event delay_ms from now. Returns the event's sequence id."""
        if delay_ms < 0:
            raise ArgumentError(f"negative delay: {delay_ms}")
        return self.schedule_at_us(self._now_us + ms_to_us(delay_ms), target, payload)

    def schedule_at_us(self, fire_us: int, target, payload=None) -> int:
        if fire_us < self._now_us:
            raise ArgumentError("cannot schedule into the past")
        if target not in self._handlers:
            raise ConfigurationError(f"unknown target: {target!r}")
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._heap, (fire_us, seq, target, payload))
        return seq

    def run_until(self, t_end_ms: float) -> RunStats:
        """Dispatch every event with fire time <= t_end in (time, seq) order.

        The clock always lands exactly on t_end, even when the queue drains
        early. Events scheduled during the run are honored when they fall
        inside the horizon; later ones stay queued for the next call.
        """
        t_end_us = ms_to_us(t_end_ms)
        if t_end_us < self._now_us:
            raise ArgumentError("t_end precedes the current clock")
        heap = self._heap
        handlers = self._handlers
        pop = heapq.heappop
        count = 0
        while heap and heap[0][0] <= t_end_us:
            fire_us, _seq, target, payload = pop(heap)
            self._now_us = fire_us
            handlers[target](payload)
            count += 1
        self._now_us = t_end_us
        return RunStats(events_processed=count, final_time_ms=t_end_us / US_PER_MS)

    def pending(self) -> int:
        """Number of events still queued (including ones beyond any horizon)."""
        return len(self._heap)
