"""Bounded one-dimensional adaptive value tracker.

The tracker holds a value inside ``[lo, hi]`` and moves it in response to
directional feedback. Consistent feedback doubles the step, a reversal
divides it by three and a ``GOOD`` feedback halves it. The step is adapted
first and then applied, so a reversal immediately takes a finer step back.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"
    GOOD = "good"


GROW = 2.0
SHRINK_ON_REVERSE = 3.0
SHRINK_ON_GOOD = 2.0


@dataclass(frozen=True)
class TrackerState:
    value: float
    lo: float
    hi: float
    delta: float
    delta_min: float
    delta_max: float
    last_direction: Direction | None = None

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"tracker interval must satisfy lo < hi, got [{self.lo}, {self.hi}]")
        if not self.lo <= self.value <= self.hi:
            raise ValueError(f"value {self.value} outside [{self.lo}, {self.hi}]")
        if not 0 < self.delta_min <= self.delta <= self.delta_max:
            raise ValueError(
                f"step sizes must satisfy 0 < delta_min <= delta <= delta_max, got "
                f"{self.delta_min}, {self.delta}, {self.delta_max}"
            )


def make_tracker(value: float, lo: float, hi: float) -> TrackerState:
    """Tracker with the default step schedule derived from the interval width."""
    span = hi - lo
    return TrackerState(
        value=min(hi, max(lo, float(value))),
        lo=float(lo),
        hi=float(hi),
        delta=span / 8,
        delta_min=span / 1e4,
        delta_max=span / 2,
    )


def apply_feedback(tracker: TrackerState, direction: Direction) -> TrackerState:
    direction = Direction(direction)
    if direction is Direction.GOOD:
        delta = max(tracker.delta_min, tracker.delta / SHRINK_ON_GOOD)
        return replace(tracker, delta=delta, last_direction=None)

    if tracker.last_direction is None:
        delta = tracker.delta
    elif direction is tracker.last_direction:
        delta = min(tracker.delta_max, tracker.delta * GROW)
    else:
        delta = max(tracker.delta_min, tracker.delta / SHRINK_ON_REVERSE)

    if direction is Direction.UP:
        value = min(tracker.hi, tracker.value + delta)
    else:
        value = max(tracker.lo, tracker.value - delta)
    return replace(tracker, value=value, delta=delta, last_direction=direction)


def at_limit(tracker: TrackerState, direction: Direction) -> bool:
    """True when moving in ``direction`` cannot change the value."""
    direction = Direction(direction)
    if direction is Direction.UP:
        return tracker.value >= tracker.hi
    if direction is Direction.DOWN:
        return tracker.value <= tracker.lo
    return True


def stalled(tracker: TrackerState, direction: Direction) -> bool:
    """True when the step is at its floor and ``direction`` would undo the last move.

    The tracker has then bracketed a discontinuity at its finest resolution;
    further moves only oscillate across it.
    """
    direction = Direction(direction)
    return (
        tracker.delta <= tracker.delta_min
        and tracker.last_direction is not None
        and direction is not Direction.GOOD
        and direction is not tracker.last_direction
    )
