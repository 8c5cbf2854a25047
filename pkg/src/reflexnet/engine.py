"""Deterministic discrete-event scheduler.

Every agent behavior runs as the dispatch of an :class:`Event`. Events are
ordered by ``(due, seq)`` where ``seq`` is a per-engine counter assigned at
scheduling time, so simultaneous events dispatch in scheduling order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(frozen=True)
class SpikeDelivery:
    pre: str
    post: str


@dataclass(frozen=True)
class StimulusPulse:
    afferent: str


@dataclass(frozen=True)
class FeedbackDelivery:
    feedback: Any


@dataclass(frozen=True)
class ActionTick:
    action: "ScheduledAction"


@dataclass(frozen=True, order=True)
class Event:
    due: float
    seq: int
    target: str = field(compare=False)
    payload: Any = field(compare=False)


@dataclass
class ScheduledAction:
    """A unit of agent behavior, run once or repeated every ``interval`` ms."""

    owner: str
    callback: Callable[[float], None]
    interval: float | None = None
    cancelled: bool = False
    runs: int = 0

    @property
    def kind(self) -> str:
        return "one-shot" if self.interval is None else "periodic"

    def cancel(self) -> None:
        self.cancelled = True


Handler = Callable[[Event], None]


class Engine:
    """Single-threaded event loop with one seeded random generator.

    Events whose target has no registered handler are dropped on dispatch
    (e.g. deliveries to an agent deleted while they were in flight).
    """

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self._queue: list[Event] = []
        self._seq = 0
        self._now = 0.0
        self._handlers: dict[str, Handler] = {}
        self.dispatched = 0

    def now(self) -> float:
        return self._now

    def __len__(self) -> int:
        return len(self._queue)

    def peek(self) -> Event | None:
        return self._queue[0] if self._queue else None

    def register(self, agent_id: str, handler: Handler) -> None:
        self._handlers[agent_id] = handler

    def unregister(self, agent_id: str) -> None:
        self._handlers.pop(agent_id, None)

    def schedule(self, due: float, target: str, payload: Any) -> Event:
        if due < self._now:
            raise SchedulingError(
                f"cannot schedule {type(payload).__name__} for {target!r} at "
                f"t={due} before now={self._now}"
            )
        event = Event(float(due), self._seq, target, payload)
        self._seq += 1
        heapq.heappush(self._queue, event)
        return event

    def once(self, due: float, owner: str, callback: Callable[[float], None]) -> ScheduledAction:
        action = ScheduledAction(owner, callback)
        self.schedule(due, owner, ActionTick(action))
        return action

    def every(
        self, interval: float, owner: str, callback: Callable[[float], None], first_due: float
    ) -> ScheduledAction:
        if interval <= 0:
            raise SchedulingError(f"periodic interval must be > 0, got {interval}")
        action = ScheduledAction(owner, callback, interval=float(interval))
        self.schedule(first_due, owner, ActionTick(action))
        return action

    def step(self) -> Event | None:
        if not self._queue:
            return None
        event = heapq.heappop(self._queue)
        self._now = event.due
        self.dispatched += 1
        payload = event.payload
        if isinstance(payload, ActionTick):
            self._run_action(event, payload.action)
        else:
            handler = self._handlers.get(event.target)
            if handler is not None:
                handler(event)
        return event

    def _run_action(self, event: Event, action: ScheduledAction) -> None:
        if action.cancelled:
            return
        action.runs += 1
        action.callback(event.due)
        # re-enqueue after the callback so anything it scheduled at the same
        # instant dispatches before the next tick
        if action.interval is not None and not action.cancelled:
            self.schedule(event.due + action.interval, event.target, event.payload)

    def run_until(self, t_end: float) -> int:
        if t_end < self._now:
            raise SchedulingError(f"run_until({t_end}) is before now={self._now}")
        count = 0
        while self._queue and self._queue[0].due <= t_end:
            self.step()
            count += 1
        self._now = float(t_end)
        return count
