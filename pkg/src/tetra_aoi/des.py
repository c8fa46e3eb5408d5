"""Single-queue discrete-event scheduler with cancellable handles."""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Optional


class SchedulingError(RuntimeError):
    """Attempt to schedule an event in the past."""


class StarvationError(RuntimeError):
    """Event queue drained before the stop condition held."""


class EventBudgetExceeded(RuntimeError):
    """The run hit its event budget before the stop condition held."""


@dataclass(order=True)
class Event:
    time: Any
    priority: int
    seq: int
    target: Any = field(compare=False)
    kind: str = field(compare=False)
    data: Any = field(compare=False, default=None)
    action: Optional[Callable] = field(compare=False, default=None, repr=False)
    cancelled: bool = field(compare=False, default=False)


class Handle:
    __slots__ = ("_event",)

    def __init__(self, event: Event):
        self._event = event

    @property
    def time(self):
        return self._event.time

    @property
    def active(self) -> bool:
        return not self._event.cancelled

    def cancel(self):
        self._event.cancelled = True


@dataclass
class RunStats:
    events: int = 0
    cancelled_skipped: int = 0
    start_time: Any = 0
    end_time: Any = 0


class Engine:
    """Events dequeue in (time, priority, seq) order; ``seq`` is assigned at scheduling.

    One engine uses one time domain: integer slots for protocol runs, float
    seconds for the abstract queue. ``trace`` receives one line per executed
    event (``time target kind``).
    """

    def __init__(self, start=0, trace=None):
        self.now = start
        self._queue: list[Event] = []
        self._seq = itertools.count()
        self.trace = trace
        self.stats = RunStats(start_time=start, end_time=start)

    def __len__(self):
        return len(self._queue)

    def schedule(self, time, action, target=None, kind="", data=None, priority: int = 0) -> Handle:
        """Lower ``priority`` runs first among events at the same time."""
        if time < self.now:
            raise SchedulingError(f"event {kind!r} at {time} is before now={self.now}")
        ev = Event(time, priority, next(self._seq), target, kind, data, action)
        heapq.heappush(self._queue, ev)
        return Handle(ev)

    def after(self, delay, action, target=None, kind="", data=None, priority: int = 0) -> Handle:
        return self.schedule(self.now + delay, action, target, kind, data, priority)

    def pending(self) -> int:
        return sum(1 for e in self._queue if not e.cancelled)

    def peek_time(self):
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)
            self.stats.cancelled_skipped += 1
        return self._queue[0].time if self._queue else None

    def step(self) -> bool:
        """Execute the next live event; False if none remain."""
        while self._queue:
            ev = heapq.heappop(self._queue)
            if ev.cancelled:
                self.stats.cancelled_skipped += 1
                continue
            self.now = ev.time
            self.stats.events += 1
            if self.trace is not None:
                self.trace.write(f"{ev.time} {ev.target} {ev.kind}\n")
            ev.cancelled = True  # fired handles become inert
            if ev.action is not None:
                ev.action(ev)
            return True
        return False

    def run_until(self, condition: Callable[[], bool] | None = None, *,
                  until=None, max_events: int | None = None) -> RunStats:
        """Run until ``condition()`` holds, the clock reaches ``until``, or the budget ends.

        With ``until`` set, every event strictly before ``until`` executes and
        the clock is left at ``until``.
        """
        n = 0
        while True:
            if condition is not None and condition():
                break
            if until is not None:
                t = self.peek_time()
                if t is None or t >= until:
                    self.now = max(self.now, until)
                    break
            if max_events is not None and n >= max_events:
                raise EventBudgetExceeded(f"event budget {max_events} exhausted at t={self.now}")
            if not self.step():
                raise StarvationError(f"no pending events at t={self.now}")
            n += 1
        self.stats.end_time = self.now
        return self.stats
