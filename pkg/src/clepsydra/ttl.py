"""Per-entry TTL bookkeeping and the global decay-event scheduler."""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass, field

from .config import TtlConfig


def draw_ttl(rng: random.Random, cfg: TtlConfig) -> int:
    """Uniform integer TTL in ``[cfg.ttl_min, cfg.ttl_max]``."""
    # scaling random() is much cheaper than randint on the per-access path
    return cfg.ttl_min + int(rng.random() * (cfg.ttl_max - cfg.ttl_min + 1))


class TtlTable:
    """TTL counters for a set of slots, decremented together by :meth:`tick`.

    Instead of touching every counter on each decay event, a slot stores the
    epoch at which its counter reaches zero.  ``remaining(slot)`` is the value
    an explicit per-entry counter would hold.
    """

    def __init__(self):
        self.epoch = 0
        self._expiry: dict[int, int] = {}
        self._buckets: dict[int, list[int]] = defaultdict(list)
        self._pending: list[int] = []

    def __len__(self):
        return len(self._expiry)

    def __contains__(self, slot: int) -> bool:
        return slot in self._expiry

    def set(self, slot: int, ttl: int) -> None:
        if ttl < 1:
            raise ValueError("ttl must be positive")
        when = self.epoch + ttl
        self._expiry[slot] = when
        self._buckets[when].append(slot)

    def clear(self, slot: int) -> None:
        self._expiry.pop(slot, None)

    def remaining(self, slot: int) -> int:
        when = self._expiry.get(slot)
        return 0 if when is None else when - self.epoch

    def tick(self) -> None:
        """Decrement every live counter by one; expired slots become pending."""
        self.epoch += 1
        for slot in self._buckets.pop(self.epoch, ()):
            if self._expiry.get(slot) == self.epoch:
                del self._expiry[slot]
                self._pending.append(slot)

    def take_expired(self) -> list[int]:
        out, self._pending = self._pending, []
        return out


@dataclass
class TtlSchedulerState:
    current_period: float
    next_event_at: float
    events_fired: int = 0
    conflicts_seen: int = 0
    # (time, period after the update, caused_by_conflict)
    history: list[tuple[float, float, bool]] = field(default_factory=list)


class TtlScheduler:
    """Decay-event timing: additive period growth, division on conflict.

    ``cache`` arguments must provide ``decay(now)``, which ticks the TTL table
    and invalidates whatever expired.
    """

    def __init__(self, cfg: TtlConfig, start: float = 0.0, record: bool = True):
        self.cfg = cfg
        self.record = record
        self.state = TtlSchedulerState(cfg.period_base, start + cfg.period_base)
        if record:
            self.state.history.append((start, cfg.period_base, False))

    @property
    def current_period(self) -> float:
        return self.state.current_period

    def _log(self, now: float, conflict: bool) -> None:
        if self.record:
            self.state.history.append((now, self.state.current_period, conflict))

    def on_decay_event(self, cache, now: float) -> float:
        """Regular, scheduled event at ``now``; returns the next event time."""
        st = self.state
        if now < st.next_event_at:
            raise ValueError(f"decay event at {now} precedes its schedule {st.next_event_at}")
        cache.decay(now)
        st.events_fired += 1
        st.current_period = min(st.current_period + self.cfg.period_increment, self.cfg.period_max)
        st.next_event_at = now + st.current_period
        self._log(now, False)
        return st.next_event_at

    def on_conflict(self, cache, now: float) -> None:
        st = self.state
        cache.decay(now)
        st.events_fired += 1
        st.conflicts_seen += 1
        st.current_period = max(st.current_period / self.cfg.conflict_divisor, self.cfg.period_min)
        st.next_event_at = now + st.current_period
        self._log(now, True)

    def run_until(self, cache, now: float) -> None:
        """Fire every scheduled event with timestamp <= ``now``, in order."""
        while self.state.next_event_at <= now:
            self.on_decay_event(cache, self.state.next_event_at)


def check_shark_fin(history: list[tuple[float, float, bool]], period_min: float) -> list[str]:
    """Violations of the period shape: growth between conflicts, drops at conflicts."""
    problems = []
    for (t0, p0, _), (t1, p1, conflict) in zip(history, history[1:]):
        if t1 < t0:
            problems.append(f"time went backwards at {t1}")
        if conflict:
            if not (p1 < p0 or p0 == p1 == period_min):
                problems.append(f"period did not drop at conflict t={t1}: {p0} -> {p1}")
        elif p1 < p0:
            problems.append(f"period shrank without conflict t={t1}: {p0} -> {p1}")
    return problems
