"""Deterministic discrete-event kernel.

Events are ordered by ``(fire_at, seq)`` where ``seq`` is a global insertion
counter, so events scheduled for the same picosecond fire in FIFO order.
"""

from __future__ import annotations

import hashlib
import heapq
from array import array
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable, NamedTuple


class EventKind(IntEnum):
    PACKET_ARRIVAL = 0
    ARBITRATE = 1
    LASER_READY = 2
    STAGE_TRIGGER = 3
    FLOW_INJECTION = 4
    DRAIN_COMPLETE = 5
    TIMER = 6


class Event(NamedTuple):
    fire_at: int
    seq: int
    kind: EventKind
    callback: Callable[..., Any]
    args: tuple = ()


class CausalityError(RuntimeError):
    """An event was scheduled before the current clock (a model bug)."""


class EventQueue:
    """Binary heap keyed on ``(fire_at, seq)``."""

    def __init__(self) -> None:
        self._heap: list[Event] = []
        self._seq = 0

    def push(self, fire_at: int, kind: EventKind, callback, args: tuple = ()) -> Event:
        event = Event(fire_at, self._seq, kind, callback, args)
        self._seq += 1
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def peek_time(self) -> int | None:
        return self._heap[0].fire_at if self._heap else None

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class SimulationSummary:
    events_processed: int
    final_clock: int
    events_by_kind: dict[str, int] = field(default_factory=dict)
    trace_hash: str | None = None


class Simulator:
    """Clock plus event queue plus run loop.

    When ``trace`` is true every dispatched ``(fire_at, seq, kind)`` triple is
    folded into a digest so two runs can be compared for bit-identity.
    """

    def __init__(self, trace: bool = False) -> None:
        self.now = 0
        self.queue = EventQueue()
        self.events_processed = 0
        self._kind_counts = [0] * len(EventKind)
        self._trace = array("q") if trace else None
        self._digest = hashlib.blake2b(digest_size=16) if trace else None

    def schedule(self, fire_at: int, kind: EventKind, callback, *args) -> Event:
        if fire_at < self.now:
            raise CausalityError(
                f"event {kind.name} scheduled at {fire_at} ps but clock is {self.now} ps"
            )
        return self.queue.push(fire_at, kind, callback, args)

    def schedule_in(self, delay: int, kind: EventKind, callback, *args) -> Event:
        return self.schedule(self.now + delay, kind, callback, *args)

    def run_until(self, t_end: int) -> SimulationSummary:
        heap = self.queue._heap
        pop = heapq.heappop
        counts = self._kind_counts
        trace = self._trace
        processed = 0
        while heap and heap[0].fire_at <= t_end:
            event = pop(heap)
            self.now = event.fire_at
            counts[event.kind] += 1
            if trace is not None:
                trace.append(event.fire_at)
                trace.append(event.seq)
                trace.append(event.kind)
                if len(trace) >= 3 * 65536:
                    self._flush_trace()
            event.callback(*event.args)
            processed += 1
        self.events_processed += processed
        if t_end > self.now:
            self.now = t_end
        return self.summary()

    def _flush_trace(self) -> None:
        self._digest.update(self._trace.tobytes())
        del self._trace[:]

    def trace_hash(self) -> str | None:
        if self._digest is None:
            return None
        self._flush_trace()
        return self._digest.copy().hexdigest()

    def summary(self) -> SimulationSummary:
        return SimulationSummary(
            events_processed=self.events_processed,
            final_clock=self.now,
            events_by_kind={k.name: self._kind_counts[k] for k in EventKind},
            trace_hash=self.trace_hash(),
        )
