"""Injectable time sources.

Correctness paths (token expiry, consent deadlines, ledger timestamps)
take a clock argument so simulations are deterministic; only the
overhead benchmark reads real time.
"""

import time


class Clock:
    """Time source protocol: integer seconds."""

    def now(self) -> int:
        raise NotImplementedError


class SystemClock(Clock):
    def now(self) -> int:
        return int(time.time())


class LogicalClock(Clock):
    """Manually advanced clock for deterministic simulation."""

    def __init__(self, start: int = 1000):
        self._now = int(start)

    def now(self) -> int:
        return self._now

    def advance(self, seconds: int = 1) -> int:
        if seconds < 0:
            raise ValueError("logical clock cannot move backwards")
        self._now += int(seconds)
        return self._now
