from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class TokenBucket:
    """Per-key token bucket driven by an explicit clock.

    Defaults allow a burst of 10 submissions and refill 10 per minute.
    """

    capacity: float = 10.0
    refill_per_second: float = 10.0 / 60.0
    _levels: dict = field(default_factory=dict, repr=False)

    def allow(self, key, now: float) -> bool:
        level, last = self._levels.get(key, (self.capacity, now))
        level = min(self.capacity, level + max(0.0, now - last) * self.refill_per_second)
        if level >= 1.0:
            self._levels[key] = (level - 1.0, now)
            return True
        self._levels[key] = (level, now)
        return False
