import random
from collections import OrderedDict

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clepsydra.caches import (ClassicCache, ClepsydraCache, Eviction, RandomizedCache, UsageError, make_cache)
from clepsydra.config import CacheGeometry, Latencies, SimConfig, TtlConfig

from conftest import FROZEN_TTL

GEO = CacheGeometry(4, 64)


def fresh_lines(n, seed=0):
    r = random.Random(seed)
    return [r.getrandbits(40) << 6 for _ in range(n)]


def test_latencies_and_counters():
    for c in (ClassicCache(GEO), RandomizedCache(GEO), ClepsydraCache(GEO)):
        a = 0x1000
        miss = c.access(a)
        hit = c.access(a + 8)  # same line
        assert not miss.hit and miss.latency_ns == 20
        assert hit.hit and hit.latency_ns == 10
        assert (c.accesses, c.hits, c.misses, c.installs) == (2, 1, 1, 1)


def test_bad_op_and_backwards_time():
    c = ClassicCache(GEO)
    with pytest.raises(ValueError):
        c.access(0, "X")
    c.access(0, now=100)
    with pytest.raises(ValueError):
        c.access(0, now=50)


def test_classic_has_no_dynamic_sets_or_decay():
    c = ClassicCache(GEO)
    with pytest.raises(UsageError):
        c.lookup_dynamic_set(0)
    with pytest.raises(UsageError):
        c.flush_expired(0)
    with pytest.raises(UsageError):
        RandomizedCache(GEO).flush_expired(0)


class LruOracle:
    def __init__(self, geo):
        self.geo = geo
        self.sets = [OrderedDict() for _ in range(geo.lines_per_way)]

    def access(self, addr):
        line = addr >> 6
        s = self.sets[line % self.geo.lines_per_way]
        if line in s:
            s.move_to_end(line)
            return True, None
        victim = None
        if len(s) == self.geo.ways:
            victim = s.popitem(last=False)[0] << 6
        s[line] = True
        return False, victim


@settings(max_examples=50)
@given(st.lists(st.integers(0, 4095), min_size=1, max_size=400))
def test_classic_matches_lru_oracle(lines):
    geo = CacheGeometry(2, 8)
    c = ClassicCache(geo)
    ref = LruOracle(geo)
    for ln in lines:
        out = c.access(ln << 6)
        hit, victim = ref.access(ln << 6)
        assert out.hit == hit
        assert out.victim_addr == victim


def test_classic_writeback_address_and_drain():
    c = ClassicCache(CacheGeometry(1, 4))
    c.access(0x100, "W")
    c.access(0x140)  # another set
    out = c.access(0x100 + 4 * 64 * 7)  # same set, different tag
    assert out.eviction is Eviction.CONFLICT and out.writeback and out.victim_addr == 0x100
    assert out.latency_ns == 40
    c.access(0x180, "W")
    assert [w.addr for w in c.drain()] == [0x180]
    assert c.drain() == []


def test_randomized_fills_every_way():
    geo = CacheGeometry(4, 16)
    c = RandomizedCache(geo, seed=1)
    for a in fresh_lines(2000, 1):
        c.access(a)
    assert c.occupancy() == geo.entries


def test_randomized_install_way_uniform():
    geo = CacheGeometry(4, 16)
    c = RandomizedCache(geo, seed=2)
    for a in fresh_lines(200, 3):
        c.access(a)
    target = fresh_lines(1, 99)[0]
    ways = [0] * 4
    for _ in range(4000):
        c.invalidate(target)
        c.access(target)
        ways[c.where[target] // 16] += 1
    for n in ways:
        assert abs(n / 4000 - 0.25) < 0.03


def test_clepsydra_victim_uniform_over_full_dynamic_set():
    geo = CacheGeometry(4, 16)
    c = ClepsydraCache(geo, ttl=FROZEN_TTL, seed=5)
    addrs = fresh_lines(5000, 5)
    for a in addrs:
        c.access(a)
    assert c.occupancy() == geo.entries
    target = fresh_lines(1, 77)[0]
    counts = [0] * 4
    trials = 4000
    slots = c.slots_of(target)
    for _ in range(trials):
        out = c.access(target)
        assert out.eviction is Eviction.CONFLICT
        counts[slots.index(c.where[target])] += 1
        c.invalidate(target)
        # the freed slot is the only free one, so the victim goes straight back
        assert c.access(out.victim_addr).eviction is Eviction.NONE
    for n in counts:
        assert abs(n / trials - 0.25) < 0.02


def test_clepsydra_never_conflicts_with_free_slot():
    geo = CacheGeometry(4, 64)
    c = ClepsydraCache(geo, ttl=FROZEN_TTL, seed=2)
    for a in fresh_lines(20_000, 2):
        full = all(c.tag[s] is not None for s in c.slots_of(a))
        resident = c.contains(a)
        out = c.access(a)
        if not resident:
            assert (out.eviction is Eviction.CONFLICT) == full


def test_hit_resets_ttl():
    c = ClepsydraCache(GEO, ttl=TtlConfig(ttl_min=1, ttl_max=256), seed=0)
    c.access(0x40)
    seen = set()
    for _ in range(50):
        c.access(0x40)
        seen.add(c.remaining_ttl(0x40))
    assert len(seen) > 10


def test_ttl_expiry_evicts_and_writes_back_once():
    ttl = TtlConfig(ttl_min=2, ttl_max=2, period_base=1000, period_min=1000, period_max=1000)
    c = ClepsydraCache(GEO, ttl=ttl)
    c.access(0x40, "W")
    c.access(0x80)
    c.advance_to(1999)
    assert c.contains(0x40)
    c.advance_to(2000)
    assert not c.contains(0x40) and not c.contains(0x80)
    assert [(w.addr, w.cause) for w in c.writebacks] == [(0x40, Eviction.TIME)]
    assert c.time_evictions == 2
    c.advance_to(10_000)
    assert len(c.writebacks) == 1
    assert c.drain() == []


@pytest.mark.parametrize("model", ["randomized", "clepsydra"])
def test_every_dirty_line_written_back_exactly_once(model):
    cfg = SimConfig(model=model, geometry=CacheGeometry(4, 32),
                    ttl=TtlConfig(ttl_min=1, ttl_max=8, period_base=500, period_min=100, period_max=500,
                                  period_increment=50))
    c = make_cache(cfg, seed=4)
    r = random.Random(4)
    pool = fresh_lines(400, 4)
    written = {}  # addr -> number of dirtying episodes
    t = 0.0
    for _ in range(20_000):
        a = r.choice(pool)
        op = "W" if r.random() < 0.3 else "R"
        t += r.choice([0, 0, 10, 300])
        c.advance_to(t)  # expiries due by now happen before the access
        was_dirty = c.contains(a) and c.dirty[c.where[a]]
        c.access(a, op, now=t)
        if op == "W" and not was_dirty:
            written[a] = written.get(a, 0) + 1
    c.drain(t)
    wb = {}
    for rec in c.writebacks:
        wb[rec.addr] = wb.get(rec.addr, 0) + 1
    assert wb == written


def test_reconstruct_matches_owner():
    c = RandomizedCache(CacheGeometry(8, 64), seed=3)
    for a in fresh_lines(2000, 6):
        c.access(a, "W")
    for addr, slot in list(c.where.items())[:300]:
        assert c._reconstruct(slot) == addr


def test_find_agrees_with_tag_scan():
    c = ClepsydraCache(GEO, ttl=FROZEN_TTL, seed=8)
    pool = fresh_lines(600, 8)
    for a in pool:
        c.access(a)
    for a in pool:
        d = c._dset(a)
        assert c._find(a, d) == c._scan(d)


def test_accounting_identities():
    c = ClepsydraCache(GEO, ttl=TtlConfig(period_base=2000, period_min=100, period_max=2000), seed=1)
    r = random.Random(1)
    pool = fresh_lines(1000, 1)
    for i in range(30_000):
        c.access(r.choice(pool), now=i * 5.0)
    assert c.hits + c.misses == c.accesses
    assert c.installs == c.misses
    assert c.installs - c.conflict_evictions - c.time_evictions == c.occupancy()
    assert len(c.lifetimes) == c.conflict_evictions + c.time_evictions


def test_single_way_clepsydra_degenerates():
    c = ClepsydraCache(CacheGeometry(1, 16), ttl=FROZEN_TTL)
    for a in fresh_lines(200, 2):
        out = c.access(a)
        assert c.contains(a)
        assert len(c.slots_of(a)) == 1
        if out.eviction is Eviction.CONFLICT:
            assert not c.contains(out.victim_addr)


def test_dynamic_set_overlap_rate():
    geo = CacheGeometry(4, 16)
    c = RandomizedCache(geo, seed=0)
    a = fresh_lines(3000, 10)
    b = fresh_lines(3000, 11)
    c.warm(a + b)
    overlap = sum(bool(set(c.slots_of(x)) & set(c.slots_of(y))) for x, y in zip(a, b))
    p = 1 - (1 - 1 / 16) ** 4
    assert abs(overlap / 3000 - p) < 4 * (p * (1 - p) / 3000) ** 0.5


def test_warm_matches_scalar_mapping():
    c = RandomizedCache(GEO, seed=12)
    pool = fresh_lines(100, 12)
    c.warm(pool)
    warmed = {a: c._memo[a] for a in pool}
    c._memo.clear()
    assert all(c._dset(a) == warmed[a] for a in pool)


def test_invalidate_does_not_count_eviction():
    for c in (ClassicCache(GEO), ClepsydraCache(GEO)):
        c.access(0x40)
        assert c.invalidate(0x40) and not c.invalidate(0x40)
        assert c.conflict_evictions == 0 and not c.contains(0x40)


def test_lookup_dynamic_set_shape():
    c = ClepsydraCache(GEO)
    ds = c.lookup_dynamic_set(0x1234)
    assert [w for w, _ in ds.indices] == [0, 1, 2, 3]
    assert all(0 <= i < 64 for _, i in ds.indices)


def test_custom_latencies_from_config():
    cfg = SimConfig(model="classic", geometry=GEO, latencies=Latencies(1, 5, 0))
    c = make_cache(cfg)
    assert c.access(0).latency_ns == 5
