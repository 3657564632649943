"""Deterministic event loop.

Events are ordered by ``(time, seq)`` where ``seq`` is a global insertion
counter, so two events at the same instant fire in the order they were
scheduled. A single seeded random source is shared by every actor and is
consumed in dispatch order.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Protocol

SimTime = float

TIMER = "timer"
MESSAGE = "message"
SENSOR_TICK = "sensor-tick"
TARGET_MOTION = "target-motion"
EVENT_KINDS = (TIMER, MESSAGE, SENSOR_TICK, TARGET_MOTION)


class PastEvent(ValueError):
    """Raised when an event is scheduled before the current clock."""


class UnknownEventKind(RuntimeError):
    """A handler received a payload it has no transition for."""


@dataclass(frozen=True)
class Event:
    time: SimTime
    seq: int
    actor: str
    kind: str
    data: Mapping[str, Any] = field(default_factory=dict)

    @property
    def key(self):
        return (self.time, self.seq)


@dataclass(frozen=True)
class TraceRecord:
    """One dispatched event plus whatever the handler chose to report."""

    time: SimTime
    seq: int
    actor: str
    kind: str
    details: Dict[str, str]


class RandomSource:
    """Seeded generator; identical seeds give identical draw sequences."""

    def __init__(self, seed: int):
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._rng = random.Random(seed)

    def gauss(self, sigma: float) -> float:
        if sigma == 0:
            return 0.0
        return self._rng.gauss(0.0, sigma)

    def uniform(self, lo: float, hi: float) -> float:
        return self._rng.uniform(lo, hi)

    def random(self) -> float:
        return self._rng.random()


class EventQueue:
    def __init__(self, clock: SimTime = 0.0):
        self.clock = clock
        self._heap: List[tuple] = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, time: SimTime, actor: str, kind: str,
                 data: Optional[Mapping[str, Any]] = None) -> Event:
        if time < self.clock:
            raise PastEvent(f"event at t={time} precedes clock t={self.clock}")
        event = Event(float(time), self._seq, actor, kind, dict(data or {}))
        self._seq += 1
        heapq.heappush(self._heap, (event.time, event.seq, event))
        return event

    def peek_time(self) -> Optional[SimTime]:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> Event:
        _, _, event = heapq.heappop(self._heap)
        self.clock = event.time
        return event


class Actor(Protocol):
    def handle(self, event: Event, sim: "Simulator") -> Optional[Dict[str, str]]:
        ...


class Simulator:
    """Owns the clock, the queue, the random source and the actor table."""

    def __init__(self, seed: int, clock: SimTime = 0.0):
        self.queue = EventQueue(clock)
        self.rng = RandomSource(seed)
        self.actors: Dict[str, Actor] = {}
        self.trace: List[TraceRecord] = []
        self.on_dispatch: List[Callable[[TraceRecord], None]] = []

    @property
    def now(self) -> SimTime:
        return self.queue.clock

    def add_actor(self, actor_id: str, actor: Actor) -> None:
        if actor_id in self.actors:
            raise ValueError(f"duplicate actor {actor_id}")
        self.actors[actor_id] = actor

    def schedule(self, time: SimTime, actor: str, kind: str,
                 data: Optional[Mapping[str, Any]] = None) -> Event:
        return self.queue.schedule(time, actor, kind, data)

    def run_until(self, t_end: SimTime) -> List[TraceRecord]:
        """Dispatch every event with ``time <= t_end``; returns the new trace records."""
        if t_end < self.now:
            raise PastEvent(f"t_end={t_end} precedes clock t={self.now}")
        start = len(self.trace)
        while self.queue.peek_time() is not None and self.queue.peek_time() <= t_end:
            before = self.now
            event = self.queue.pop()
            assert event.time >= before, "clock regression"
            if event.kind not in EVENT_KINDS:
                raise UnknownEventKind(event.kind)
            details = self.actors[event.actor].handle(event, self) or {}
            record = TraceRecord(event.time, event.seq, event.actor, event.kind, dict(details))
            self.trace.append(record)
            for hook in self.on_dispatch:
                hook(record)
        self.queue.clock = float(t_end)
        return self.trace[start:]
