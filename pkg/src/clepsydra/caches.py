"""Cache organizations behind one ``access`` interface.

* :class:`ClassicCache` -- set-associative, plain index bits, LRU.
* :class:`RandomizedCache` -- per-way randomized index (ScatterCache-like);
  a miss replaces the mapped slot of a uniformly random way.
* :class:`ClepsydraCache` -- randomized index plus TTL decay; a miss fills an
  empty slot of the dynamic set when there is one and only evicts when the
  whole dynamic set is live.

Only tags are simulated, no data.  Randomized models keep the installing
address next to each slot for statistics, but writeback addresses are always
recomputed by inverting the index function and checked against it.
"""

from __future__ import annotations

import enum
import random
from collections import OrderedDict
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import CacheGeometry, Latencies, SimConfig, TtlConfig
from .randomizer import MASK64, AddressMapper, MappedIndex, PrinceMapper, RandKey
from .ttl import TtlScheduler, TtlTable, draw_ttl


class UsageError(RuntimeError):
    """An operation was called on a model that does not support it."""


class Kind(str, enum.Enum):
    HIT = "hit"
    MISS = "miss"


class Eviction(str, enum.Enum):
    NONE = "none"
    CONFLICT = "conflict"
    # only appears in eviction/writeback records; accesses never cause it
    TIME = "time"


@dataclass(frozen=True)
class AccessOutcome:
    kind: Kind
    eviction: Eviction = Eviction.NONE
    victim_addr: int | None = None
    writeback: bool = False
    latency_ns: float = 0.0

    @property
    def hit(self) -> bool:
        return self.kind is Kind.HIT


class WritebackRecord(NamedTuple):
    addr: int
    time_ns: float
    cause: Eviction


class DynamicSet(NamedTuple):
    indices: tuple[tuple[int, int], ...]


class Cache:
    """State and accounting shared by all models."""

    kind = "abstract"

    def __init__(self, geometry: CacheGeometry, latencies: Latencies | None = None,
                 seed: int = 0, track_lifetimes: bool = True):
        self.geometry = geometry
        self.lat = latencies or Latencies()
        self.rng = random.Random(seed)
        self.track_lifetimes = track_lifetimes
        self.now = 0.0
        self._line_mask = MASK64 & ~(geometry.line_size - 1)
        self.accesses = 0
        self.hits = 0
        self.misses = 0
        self.installs = 0
        self.conflict_evictions = 0
        self.time_evictions = 0
        self.miss_latency_total = 0.0
        self.writebacks: list[WritebackRecord] = []
        self.lifetimes: list[tuple[float, Eviction]] = []
        self.conflict_times: list[float] = []
        # outcomes are immutable, so the common ones are shared
        self._hit_out = AccessOutcome(Kind.HIT, latency_ns=self.lat.t_hit)
        self._miss_out = AccessOutcome(Kind.MISS, latency_ns=self.lat.t_miss)

    # -- ground truth, not visible to timing-only attackers ----------------
    def contains(self, addr: int) -> bool:
        raise NotImplementedError

    def resident(self) -> list[int]:
        raise NotImplementedError

    def occupancy(self) -> int:
        return len(self.resident())

    def line(self, addr: int) -> int:
        return addr & self._line_mask

    # -- public interface --------------------------------------------------
    def access(self, addr: int, op: str = "R", now: float | None = None) -> AccessOutcome:
        if op not in ("R", "W"):
            raise ValueError(f"op must be 'R' or 'W', got {op!r}")
        if now is None:
            now = self.now
        elif now > self.now:
            self.advance_to(now)
        elif now < self.now:
            raise ValueError(f"time went backwards: {now} < {self.now}")
        out = self._access(addr & self._line_mask, op == "W", now)
        self.accesses += 1
        if out.hit:
            self.hits += 1
        else:
            self.misses += 1
            self.miss_latency_total += out.latency_ns
        return out

    def advance_to(self, now: float) -> None:
        self.now = max(self.now, now)

    def lookup_dynamic_set(self, addr: int) -> DynamicSet:
        raise UsageError(f"{self.kind} cache has no dynamic sets")

    def flush_expired(self, now: float) -> list[WritebackRecord]:
        raise UsageError(f"{self.kind} cache has no TTL decay")

    def drain(self, now: float | None = None) -> list[WritebackRecord]:
        """Write back every remaining dirty line (end of run)."""
        raise NotImplementedError

    def invalidate(self, addr: int) -> bool:
        """Drop ``addr`` without counting an eviction (harness reset hook)."""
        raise NotImplementedError

    def warm(self, addrs) -> None:
        """Precompute index mappings; a no-op for models without randomization."""

    def _record_eviction(self, since: float, now: float, cause: Eviction) -> None:
        if self.track_lifetimes:
            self.lifetimes.append((now - since, cause))

    def _writeback(self, addr: int, now: float, cause: Eviction) -> WritebackRecord:
        rec = WritebackRecord(addr, now, cause)
        self.writebacks.append(rec)
        return rec

    def _miss(self, eviction=Eviction.NONE, victim=None, dirty_victim=False) -> AccessOutcome:
        if eviction is Eviction.NONE and not dirty_victim:
            return self._miss_out
        lat = self.lat.t_miss + (self.lat.writeback_penalty if dirty_victim else 0.0)
        return AccessOutcome(Kind.MISS, eviction, victim, dirty_victim, lat)


class ClassicCache(Cache):
    kind = "classic"

    def __init__(self, geometry: CacheGeometry, latencies: Latencies | None = None,
                 seed: int = 0, track_lifetimes: bool = True):
        super().__init__(geometry, latencies, seed, track_lifetimes)
        # per set: tag -> [dirty, since]; insertion order is LRU order
        self.sets: list[OrderedDict[int, list]] = [OrderedDict() for _ in range(geometry.lines_per_way)]

    def split(self, addr: int) -> tuple[int, int]:
        line = addr >> self.geometry.offset_bits
        return line >> self.geometry.index_bits, line & (self.geometry.lines_per_way - 1)

    def join(self, tag: int, index: int) -> int:
        return ((tag << self.geometry.index_bits) | index) << self.geometry.offset_bits

    def _access(self, addr: int, write: bool, now: float) -> AccessOutcome:
        tag, idx = self.split(addr)
        s = self.sets[idx]
        entry = s.get(tag)
        if entry is not None:
            s.move_to_end(tag)
            entry[0] |= write
            entry[1] = now
            return self._hit_out
        out = self._miss()
        if len(s) >= self.geometry.ways:
            vtag, (vdirty, vsince) = s.popitem(last=False)
            victim = self.join(vtag, idx)
            self.conflict_evictions += 1
            self.conflict_times.append(now)
            self._record_eviction(vsince, now, Eviction.CONFLICT)
            if vdirty:
                self._writeback(victim, now, Eviction.CONFLICT)
            out = self._miss(Eviction.CONFLICT, victim, vdirty)
        s[tag] = [write, now]
        self.installs += 1
        return out

    def contains(self, addr: int) -> bool:
        tag, idx = self.split(self.line(addr))
        return tag in self.sets[idx]

    def resident(self) -> list[int]:
        return [self.join(t, i) for i, s in enumerate(self.sets) for t in s]

    def invalidate(self, addr: int) -> bool:
        tag, idx = self.split(self.line(addr))
        return self.sets[idx].pop(tag, None) is not None

    def set_index(self, addr: int) -> int:
        return self.split(self.line(addr))[1]

    def drain(self, now: float | None = None) -> list[WritebackRecord]:
        now = self.now if now is None else now
        out = []
        for i, s in enumerate(self.sets):
            for t, entry in s.items():
                if entry[0]:
                    out.append(self._writeback(self.join(t, i), now, Eviction.NONE))
                    entry[0] = False
        return out


class _SlotCache(Cache):
    """Slot storage for the randomized models; slot id = way * lines + index."""

    def __init__(self, geometry: CacheGeometry, latencies: Latencies | None = None,
                 seed: int = 0, mapper: AddressMapper | None = None, rounds: int = 3,
                 track_lifetimes: bool = True, memo_size: int = 1 << 20):
        super().__init__(geometry, latencies, seed, track_lifetimes)
        if mapper is None:
            # key chosen once at construction, never rotated
            mapper = PrinceMapper(RandKey.generate(self.rng, geometry.ways), geometry, rounds)
        self.mapper = mapper
        n = geometry.entries
        self.tag: list[int | None] = [None] * n
        self.owner: list[int | None] = [None] * n
        self.dirty = [False] * n
        self.since = [0.0] * n
        self.where: dict[int, int] = {}
        # addr -> ((slot, out_tag), ...); the mapping is pure, so memoizing is safe
        self._memo: dict[int, tuple[tuple[int, int], ...]] = {}
        self._memo_size = memo_size

    def _dset(self, addr: int) -> tuple[tuple[int, int], ...]:
        d = self._memo.get(addr)
        if d is None:
            lines = self.geometry.lines_per_way
            out = []
            for w in range(self.geometry.ways):
                mi = self.mapper.map_address(addr, w)
                out.append((w * lines + mi.index, mi.out_tag))
            d = tuple(out)
            if len(self._memo) >= self._memo_size:
                self._memo.clear()
            self._memo[addr] = d
        return d

    def warm(self, addrs) -> None:
        """Precompute dynamic sets for many addresses with the vectorized cipher."""
        mapper = self.mapper
        if not isinstance(mapper, PrinceMapper):
            return
        todo = sorted({self.line(int(a)) for a in addrs} - self._memo.keys())
        if not todo:
            return
        arr = np.array(todo, dtype=np.uint64)
        lines = self.geometry.lines_per_way
        cols = []
        for w in range(self.geometry.ways):
            c = mapper.encrypt(arr, w)
            idx = mapper._gather(c)
            tag = c & np.uint64(MASK64 ^ mapper.index_mask)
            cols.append((idx.tolist(), tag.tolist(), w * lines))
        if len(self._memo) + len(todo) > self._memo_size:
            self._memo.clear()
        for n, addr in enumerate(todo):
            self._memo[addr] = tuple((base + idx[n], tag[n]) for idx, tag, base in cols)

    def lookup_dynamic_set(self, addr: int) -> DynamicSet:
        lines = self.geometry.lines_per_way
        return DynamicSet(tuple(divmod(slot, lines) for slot, _ in self._dset(self.line(addr))))

    def slots_of(self, addr: int) -> list[int]:
        return [slot for slot, _ in self._dset(self.line(addr))]

    def _find(self, addr: int, dset) -> int | None:
        """Slot holding ``addr``, or None.

        Equivalent to comparing the stored tag in each way; the address index
        only saves the scan, and the tag of the slot it names is still checked.
        """
        slot = self.where.get(addr)
        if slot is None:
            return None
        lines = self.geometry.lines_per_way
        if self.tag[slot] != dset[slot // lines][1]:
            raise AssertionError(f"slot {slot} holds a different tag than {addr:#x} maps to")
        return slot

    def _scan(self, dset) -> int | None:
        """Tag comparison across all ways, as the hardware does it."""
        tag = self.tag
        for slot, t in dset:
            if tag[slot] == t:
                return slot
        return None

    def _reconstruct(self, slot: int) -> int:
        way, idx = divmod(slot, self.geometry.lines_per_way)
        addr = self.mapper.unmap_address(MappedIndex(way, idx, self.tag[slot]))
        if addr != self.owner[slot]:
            raise AssertionError(
                f"inverse mapping gave {addr:#x}, slot {slot} holds {self.owner[slot]:#x}")
        return addr

    def _evict(self, slot: int, now: float, cause: Eviction) -> tuple[int, bool]:
        dirty = self.dirty[slot]
        if dirty:
            # the writeback address comes from the inverse mapping, as in hardware
            addr = self._reconstruct(slot)
            self._writeback(addr, now, cause)
        else:
            addr = self.owner[slot]
        self._record_eviction(self.since[slot], now, cause)
        del self.where[addr]
        self.tag[slot] = None
        self.owner[slot] = None
        self.dirty[slot] = False
        if cause is Eviction.CONFLICT:
            self.conflict_evictions += 1
            self.conflict_times.append(now)
        elif cause is Eviction.TIME:
            self.time_evictions += 1
        return addr, dirty

    def _install(self, slot: int, addr: int, tag: int, write: bool, now: float) -> None:
        self.tag[slot] = tag
        self.owner[slot] = addr
        self.dirty[slot] = write
        self.since[slot] = now
        self.where[addr] = slot
        self.installs += 1

    def contains(self, addr: int) -> bool:
        return self.line(addr) in self.where

    def resident(self) -> list[int]:
        return list(self.where)

    def occupancy(self) -> int:
        return len(self.where)

    def invalidate(self, addr: int) -> bool:
        slot = self.where.pop(self.line(addr), None)
        if slot is None:
            return False
        self.tag[slot] = None
        self.owner[slot] = None
        self.dirty[slot] = False
        self._cleared(slot)
        return True

    def _cleared(self, slot: int) -> None:
        pass

    def drain(self, now: float | None = None) -> list[WritebackRecord]:
        now = self.now if now is None else now
        out = []
        for addr, slot in self.where.items():
            if self.dirty[slot]:
                out.append(self._writeback(self._reconstruct(slot), now, Eviction.NONE))
                self.dirty[slot] = False
        return out


class RandomizedCache(_SlotCache):
    kind = "randomized"

    def _access(self, addr: int, write: bool, now: float) -> AccessOutcome:
        dset = self._dset(addr)
        slot = self._find(addr, dset)
        if slot is not None:
            self.dirty[slot] |= write
            self.since[slot] = now
            return self._hit_out
        slot, tag = dset[self.rng.randrange(len(dset))]
        out = self._miss()
        if self.tag[slot] is not None:
            victim, vdirty = self._evict(slot, now, Eviction.CONFLICT)
            out = self._miss(Eviction.CONFLICT, victim, vdirty)
        self._install(slot, addr, tag, write, now)
        return out


class ClepsydraCache(_SlotCache):
    kind = "clepsydra"

    def __init__(self, geometry: CacheGeometry, latencies: Latencies | None = None,
                 ttl: TtlConfig | None = None, seed: int = 0, mapper: AddressMapper | None = None,
                 rounds: int = 3, track_lifetimes: bool = True, record_periods: bool = True):
        super().__init__(geometry, latencies, seed, mapper, rounds, track_lifetimes)
        self.ttl_cfg = ttl or TtlConfig()
        self.ttls = TtlTable()
        self.scheduler = TtlScheduler(self.ttl_cfg, 0.0, record=record_periods)

    def advance_to(self, now: float) -> None:
        if now >= self.scheduler.state.next_event_at:
            self.scheduler.run_until(self, now)
        if now > self.now:
            self.now = now

    def decay(self, now: float) -> list[WritebackRecord]:
        self.ttls.tick()
        return self.flush_expired(now)

    def flush_expired(self, now: float) -> list[WritebackRecord]:
        before = len(self.writebacks)
        for slot in self.ttls.take_expired():
            self._evict(slot, now, Eviction.TIME)
        return self.writebacks[before:]

    def remaining_ttl(self, addr: int) -> int:
        slot = self.where.get(self.line(addr))
        return 0 if slot is None else self.ttls.remaining(slot)

    def _cleared(self, slot: int) -> None:
        self.ttls.clear(slot)

    def _evict(self, slot, now, cause):
        self.ttls.clear(slot)
        return super()._evict(slot, now, cause)

    def _access(self, addr: int, write: bool, now: float) -> AccessOutcome:
        dset = self._dset(addr)
        slot = self._find(addr, dset)
        if slot is not None:
            self.dirty[slot] |= write
            self.since[slot] = now
            self.ttls.set(slot, draw_ttl(self.rng, self.ttl_cfg))
            return self._hit_out
        free = [(s, t) for s, t in dset if self.tag[s] is None]
        if free:
            slot, tag = free[self.rng.randrange(len(free))] if len(free) > 1 else free[0]
            out = self._miss()
        else:
            slot, tag = dset[self.rng.randrange(len(dset))]
            victim, vdirty = self._evict(slot, now, Eviction.CONFLICT)
            out = self._miss(Eviction.CONFLICT, victim, vdirty)
            self.scheduler.on_conflict(self, now)
        self._install(slot, addr, tag, write, now)
        self.ttls.set(slot, draw_ttl(self.rng, self.ttl_cfg))
        return out


def make_cache(cfg: SimConfig, seed: int | None = None, **kw) -> Cache:
    seed = cfg.seed if seed is None else seed
    if cfg.model == "classic":
        return ClassicCache(cfg.geometry, cfg.latencies, seed, **kw)
    if cfg.model == "randomized":
        return RandomizedCache(cfg.geometry, cfg.latencies, seed, rounds=cfg.prince_rounds, **kw)
    return ClepsydraCache(cfg.geometry, cfg.latencies, cfg.ttl, seed, rounds=cfg.prince_rounds, **kw)
