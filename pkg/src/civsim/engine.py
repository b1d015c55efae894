"""Discrete-event core: a deterministic time-ordered queue and the run clock.

Time is kept in integer microseconds so that durations measured as
differences of timestamps add up exactly.
"""

from __future__ import annotations

import heapq
import json
import random
from typing import Callable


def ms_to_us(ms: float) -> int:
    return int(round(ms * 1000.0))


def us_to_ms(us: int) -> float:
    return us / 1000.0


class ClockError(RuntimeError):
    pass


class EventQueue:
    """Min-heap keyed on (time, insertion order)."""

    def __init__(self):
        self._heap: list = []
        self._seq = 0
        self.clock = 0

    def __len__(self):
        return len(self._heap)

    def push(self, time_us: int, fn: Callable, args: tuple = ()):
        if time_us < self.clock:
            raise ClockError(f"event at {time_us}us scheduled before clock {self.clock}us")
        heapq.heappush(self._heap, (time_us, self._seq, fn, args))
        self._seq += 1

    def pop(self):
        time_us, _, fn, args = heapq.heappop(self._heap)
        if time_us < self.clock:
            raise ClockError("clock would run backwards")
        self.clock = time_us
        return time_us, fn, args


class Simulator:
    """One logical timeline with a single injectable random source.

    ``trace`` collects (time_us, endpoint, event, payload) tuples when enabled.
    """

    def __init__(self, seed: int = 0, trace: bool = True):
        self.queue = EventQueue()
        self.rng = random.Random(seed)
        self.trace: list | None = [] if trace else None
        self.events_run = 0

    @property
    def now(self) -> int:
        return self.queue.clock

    @property
    def now_ms(self) -> float:
        return self.queue.clock / 1000.0

    def schedule(self, delay_ms: float, fn: Callable, *args):
        q = self.queue
        # delays are never negative, so only the push counter needs care here
        if delay_ms < 0:
            raise ClockError(f"negative delay {delay_ms} ms")
        heapq.heappush(q._heap, (q.clock + int(round(delay_ms * 1000.0)), q._seq, fn, args))
        q._seq += 1

    def schedule_us(self, delay_us: int, fn: Callable, *args):
        self.queue.push(self.queue.clock + delay_us, fn, args)

    def log(self, endpoint: str, event: str, payload: str = ""):
        if self.trace is not None:
            self.trace.append((self.queue.clock, endpoint, event, payload))

    def run(self, until_us: int | None = None):
        q = self.queue
        heap = q._heap
        pop = heapq.heappop
        n = 0
        while heap:
            if until_us is not None and heap[0][0] > until_us:
                break
            t, _, fn, args = pop(heap)
            q.clock = t
            n += 1
            fn(*args)
        self.events_run += n

    def noise_rng(self):
        import numpy as np

        return np.random.default_rng(self.rng.getrandbits(64))


def trace_lines(trace) -> list[str]:
    """Line-delimited records: timestamp (ms), endpoint, event, payload."""
    return [
        json.dumps({"t_ms": round(t / 1000.0, 3), "endpoint": ep, "event": ev, "payload": payload}, sort_keys=True)
        for t, ep, ev, payload in trace
    ]
