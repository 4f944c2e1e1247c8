"""Logical millisecond clock; every timestamp in the system comes from here."""

from __future__ import annotations


class LogicalClock:
    """Monotonic counter advanced explicitly. No wall-clock reads anywhere,
    so repeated runs of the same scenario see identical timestamps."""

    def __init__(self, start_ms: int = 0) -> None:
        self._now = start_ms

    @property
    def now_ms(self) -> int:
        return self._now

    def advance(self, delta_ms: int) -> int:
        if delta_ms < 0:
            raise ValueError("clock cannot move backwards")
        self._now += delta_ms
        return self._now

    def advance_to(self, t_ms: int) -> int:
        # No-op when t_ms is in the past; the clock never rewinds.
        if t_ms > self._now:
            self._now = t_ms
        return self._now
