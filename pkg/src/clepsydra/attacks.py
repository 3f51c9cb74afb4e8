"""Attacker procedures run against any cache model.

Attackers talk to the cache only through a :class:`Port`.  A port returns
the latency of each access, plus a conflict flag when the attacker model is
``conflict-aware`` (the idealized attacker that knows when a conflict
happened).  Everything named ``true_*`` or ``ground_truth`` is computed by
the harness from cache internals and never fed back into attacker decisions.
"""

from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import stats as sps

from .analytics import SecurityParams, min_set_size_for
from .caches import Cache, ClassicCache, ClepsydraCache, Eviction
from .simkit import TraceRecord

ORACLES = ("conflict-aware", "timing-only")
# attacker lines live above this bit, victim lines below it
ATTACKER_REGION = 1 << 45


class BudgetExceeded(RuntimeError):
    """The attacker ran out of virtual time; ``result`` holds partial progress."""

    def __init__(self, msg: str, result=None):
        super().__init__(msg)
        self.result = result


@dataclass(frozen=True)
class AttackerModel:
    oracle: str = "conflict-aware"
    t_threshold: float = 15.0

    def __post_init__(self):
        if self.oracle not in ORACLES:
            raise ValueError(f"oracle must be one of {ORACLES}, got {self.oracle!r}")

    @property
    def sees_conflicts(self) -> bool:
        return self.oracle == "conflict-aware"


class Observation(NamedTuple):
    latency_ns: float
    # None when the attacker cannot see conflicts
    conflict: bool | None


class Port:
    """The attacker's view of a cache: latencies, a clock, and a budget."""

    def __init__(self, cache: Cache, attacker: AttackerModel, budget_ns: float | None = None):
        self._cache = cache
        self.attacker = attacker
        self.start = cache.now
        self.now = cache.now
        self.budget_ns = budget_ns
        self.accesses = 0

    @property
    def elapsed(self) -> float:
        return self.now - self.start

    def _charge(self, dt: float) -> None:
        self.now += dt
        if self.budget_ns is not None and self.elapsed > self.budget_ns:
            raise BudgetExceeded(f"virtual time budget of {self.budget_ns:g} ns exhausted")

    def load(self, addr: int, op: str = "R") -> Observation:
        out = self._cache.access(addr, op, self.now)
        self.accesses += 1
        conflict = out.eviction is Eviction.CONFLICT if self.attacker.sees_conflicts else None
        self._charge(out.latency_ns)
        return Observation(out.latency_ns, conflict)

    def missed(self, obs: Observation) -> bool:
        return obs.latency_ns > self.attacker.t_threshold

    def victim(self, addr: int, op: str = "R") -> bool | None:
        """Let the victim touch ``addr``; returns the conflict flag if visible."""
        out = self._cache.access(addr, op, self.now)
        self._charge(out.latency_ns)
        return out.eviction is Eviction.CONFLICT if self.attacker.sees_conflicts else None

    def idle(self, dt: float) -> None:
        self._charge(dt)

    def prepare(self, addrs: Iterable[int]) -> None:
        # simulator speed-up only: batch the index computations
        self._cache.warm(addrs)


class AddressPool:
    """Fresh, never repeated line addresses from the attacker's own region."""

    def __init__(self, seed: int = 0, line_size: int = 64, region: int = ATTACKER_REGION,
                 port: Port | None = None, batch: int = 4096):
        self.rng = np.random.default_rng(seed)
        self.line_size = line_size
        self.region = region
        self.port = port
        self.batch = batch
        self.used: set[int] = set()
        self._queue: list[int] = []

    def _refill(self) -> None:
        lines = self.rng.integers(0, self.region // self.line_size, size=self.batch)
        new = []
        for x in lines.tolist():
            a = self.region + x * self.line_size
            if a not in self.used:
                self.used.add(a)
                new.append(a)
        if self.port is not None:
            self.port.prepare(new)
        self._queue.extend(reversed(new))

    def fresh(self) -> int:
        if not self._queue:
            self._refill()
        return self._queue.pop()

    def take(self, n: int) -> list[int]:
        return [self.fresh() for _ in range(n)]


# -- ground truth --------------------------------------------------------------

def collides(cache: Cache, a: int, b: int) -> bool:
    """True when ``a`` and ``b`` can occupy a common cache entry."""
    if isinstance(cache, ClassicCache):
        return cache.set_index(a) == cache.set_index(b)
    return bool(set(cache.slots_of(a)) & set(cache.slots_of(b)))


def colliding_addresses(cache: Cache, target: int, count: int, seed: int = 0,
                        region: int = ATTACKER_REGION) -> list[int]:
    """Addresses colliding with ``target`` in exactly one way, ways taken round robin.

    Harness helper that uses the secret mapping; attackers never call it.
    """
    if count <= 0:
        return []
    rng = np.random.default_rng(seed)
    ls = cache.geometry.line_size
    if isinstance(cache, ClassicCache):
        idx = cache.set_index(target)
        lines = cache.geometry.lines_per_way
        tags = rng.choice(1 << 20, size=count, replace=False)
        return [region + ((int(t) * lines + idx) * ls) for t in tags]
    ways = cache.geometry.ways
    want = [count // ways + (1 if v < count % ways else 0) for v in range(ways)]
    tslots = cache.slots_of(target)
    found: list[list[int]] = [[] for _ in range(ways)]
    seen: set[int] = set()
    while any(len(f) < n for f, n in zip(found, want)):
        cand = region + rng.integers(0, region // ls, size=1 << 14) * ls
        cache.warm(cand.tolist())
        for a in cand.tolist():
            if a in seen:
                continue
            seen.add(a)
            hits = [v for v, s in enumerate(cache.slots_of(a)) if s == tslots[v]]
            if len(hits) == 1 and len(found[hits[0]]) < want[hits[0]]:
                found[hits[0]].append(a)
    order = []
    for i in range(max(want)):
        order.extend(f[i] for f in found if i < len(f))
    return order


# -- profiling -------------------------------------------------------------------

@dataclass
class ProfilingResult:
    k: list[int] = field(default_factory=list)
    k_prime: list[int] = field(default_factory=list)
    G: list[int] = field(default_factory=list)
    accesses_made: int = 0
    virtual_time_spent: float = 0.0
    conflicts_caught: int = 0
    rounds: int = 0
    G_goal: int = 0
    true_positives: int = 0
    false_positives: int = 0
    budget_exhausted: bool = False

    def summary(self) -> dict:
        return {
            "k": len(self.k), "k_prime": len(self.k_prime), "G": len(self.G),
            "G_goal": self.G_goal, "true_positives": self.true_positives,
            "false_positives": self.false_positives, "rounds": self.rounds,
            "accesses_made": self.accesses_made, "virtual_time_ns": self.virtual_time_spent,
            "conflicts_caught": self.conflicts_caught, "budget_exhausted": self.budget_exhausted,
        }


class _Profiler:
    def __init__(self, port: Port, pool: AddressPool, res: ProfilingResult,
                 reprobe_every: int = 64, max_passes: int = 64, settle: bool = True):
        self.settle = settle
        self.port = port
        self.pool = pool
        self.res = res
        self.reprobe_every = max(1, reprobe_every)
        self.max_passes = max_passes

    def _pass(self, addrs: Sequence[int]) -> tuple[int, list[int]]:
        """Access every address once; returns (#conflicts seen, missed addresses)."""
        conflicts, missed = 0, []
        for a in addrs:
            obs = self.port.load(a)
            if obs.conflict:
                conflicts += 1
            if self.port.missed(obs):
                missed.append(a)
        return conflicts, missed

    def _settle(self, k: list[int]) -> None:
        """Re-access all of k once after a conflict so the decay rate can recover."""
        c, _ = self._pass(k)
        self.res.conflicts_caught += c

    def grow(self, target_size: int) -> None:
        k = self.res.k
        oracle = self.port.attacker.sees_conflicts
        since = 0
        while len(k) < target_size:
            a = self.pool.fresh()
            obs = self.port.load(a)
            k.append(a)
            if oracle:
                if obs.conflict:
                    self.res.conflicts_caught += 1
                    if self.settle:
                        self._settle(k)
            else:
                since += 1
                if since >= self.reprobe_every:
                    since = 0
                    _, missed = self._pass(k)
                    if missed:
                        self.res.conflicts_caught += 1
                        if self.settle:
                            self._pass(k)

    def prune(self) -> None:
        """Drop addresses that keep missing until one pass is all hits."""
        cand = list(self.res.k)
        for _ in range(self.max_passes):
            c, missed = self._pass(cand)
            self.res.conflicts_caught += c
            if not missed:
                break
            gone = set(missed)
            cand = [a for a in cand if a not in gone]
        self.res.k_prime = cand

    def sync(self) -> None:
        self.res.accesses_made = self.port.accesses
        self.res.virtual_time_spent = self.port.elapsed


def prime_prune(cache: Cache, target_size: int, attacker: AttackerModel, seed: int = 0,
                budget_ns: float | None = None, reprobe_every: int = 64) -> ProfilingResult:
    """Incrementally prime ``target_size`` fresh addresses, then prune to k'."""
    if target_size < 0:
        raise ValueError("target_size must be non-negative")
    res = ProfilingResult()
    if target_size == 0:
        return res
    port = Port(cache, attacker, budget_ns)
    prof = _Profiler(port, AddressPool(seed, cache.geometry.line_size, port=port), res, reprobe_every)
    try:
        prof.grow(target_size)
        prof.prune()
    except BudgetExceeded as exc:
        prof.sync()
        res.budget_exhausted = True
        exc.result = res
        raise
    prof.sync()
    return res


def evict_law_for(cache: Cache) -> str:
    return "clepsydra-evict" if isinstance(cache, ClepsydraCache) else "scattercache-evict"


def build_ppp_eviction_set(cache: Cache, target_addr: int, p_e_goal: float, attacker: AttackerModel,
                           budget_ns: float | None = None, k_size: int | None = None,
                           seed: int = 0, policy: str = "auto", max_rounds: int | None = None,
                           reprobe_every: int = 64) -> ProfilingResult:
    """Prime+Prune+Probe profiling of a generalized eviction set for ``target_addr``.

    Each round primes and prunes a fresh k, lets the victim touch the target and
    probes k'.  ``policy`` decides which missing addresses join G: ``first``
    keeps only the first miss, ``all`` keeps every miss because a decaying
    cache also loses entries by expiry.  ``auto`` picks ``all`` for Clepsydra.

    Raises :class:`BudgetExceeded` (with the partial result) when the virtual
    time budget runs out before G reaches its target size.
    """
    if not 0 <= p_e_goal < 1:
        raise ValueError("p_e_goal must lie in [0, 1)")
    if policy == "auto":
        policy = "all" if isinstance(cache, ClepsydraCache) else "first"
    if policy not in ("first", "all"):
        raise ValueError(f"unknown policy {policy!r}")
    geo = cache.geometry
    res = ProfilingResult()
    if p_e_goal > 0:
        res.G_goal = min_set_size_for(p_e_goal, evict_law_for(cache), SecurityParams(geo.entries, geo.ways))
    if res.G_goal == 0:
        return res
    if k_size is None:
        k_size = max(geo.ways, geo.entries // 4)
    port = Port(cache, attacker, budget_ns)
    pool = AddressPool(seed, geo.line_size, port=port)
    # re-accessing after each conflict lets a decaying cache recover; a
    # randomized cache has nothing to recover, so profiling skips it
    prof = _Profiler(port, pool, res, reprobe_every, settle=isinstance(cache, ClepsydraCache))
    in_g: set[int] = set()
    try:
        while len(res.G) < res.G_goal:
            if max_rounds is not None and res.rounds >= max_rounds:
                break
            res.rounds += 1
            res.k = []  # every round primes a fresh k
            prof.grow(k_size)
            prof.prune()
            cache.invalidate(target_addr)  # harness: the target starts uncached each round
            seen = port.victim(target_addr)
            if seen is False:
                continue  # the oracle says nothing was displaced
            _, missed = prof._pass(res.k_prime)
            if not missed:
                continue
            new = missed[:1] if policy == "first" else missed
            for a in new:
                if a not in in_g:
                    in_g.add(a)
                    res.G.append(a)
    except BudgetExceeded as exc:
        prof.sync()
        res.budget_exhausted = True
        _score(cache, target_addr, res)
        exc.result = res
        raise
    prof.sync()
    _score(cache, target_addr, res)
    return res


def _score(cache: Cache, target: int, res: ProfilingResult) -> None:
    tp = sum(1 for g in res.G if collides(cache, g, target))
    res.true_positives = tp
    res.false_positives = len(res.G) - tp


# -- using an eviction set -------------------------------------------------------------

@dataclass
class DetectionStats:
    trials: int
    accessed_trials: int
    detections_when_accessed: int
    detections_when_idle: int

    @property
    def true_positive_rate(self) -> float:
        return self.detections_when_accessed / self.accessed_trials if self.accessed_trials else 0.0

    @property
    def false_positive_rate(self) -> float:
        idle = self.trials - self.accessed_trials
        return self.detections_when_idle / idle if idle else 0.0

    detection_rate = true_positive_rate

    def summary(self) -> dict:
        return {"trials": self.trials, "accessed_trials": self.accessed_trials,
                "true_positive_rate": self.true_positive_rate,
                "false_positive_rate": self.false_positive_rate}


def _reset(cache: Cache, addrs: Iterable[int]) -> None:
    for a in addrs:
        cache.invalidate(a)


def _prime_clean(port: Port, G: Sequence[int], max_passes: int = 16) -> None:
    for _ in range(max_passes):
        if not any(port.missed(port.load(a)) for a in G):
            return


def attack_phase(cache: Cache, G: Sequence[int], target: int, attacker: AttackerModel | None = None,
                 victim_accesses: Sequence[TraceRecord] | None = None, trials: int = 1000,
                 seed: int = 0, access_prob: float = 0.5, settle_ns: float = 0.0,
                 records: list | None = None) -> DetectionStats:
    """Prime with G, run the victim, probe G; scored against what the victim did.

    In a trial where the victim "accesses x" it replays ``victim_accesses``
    (default: one read of ``target``); otherwise it stays idle.  G and the
    target are reset before each trial so trials are independent.  Per-trial
    dicts are appended to ``records`` when it is given.
    """
    attacker = attacker or AttackerModel("timing-only")
    if victim_accesses is None:
        victim_accesses = [TraceRecord("R", target)]
    rng = random.Random(seed)
    port = Port(cache, attacker)
    cache.warm(list(G) + [target])
    accessed_n = det_acc = det_idle = 0
    for trial in range(trials):
        accessed = rng.random() < access_prob
        _reset(cache, list(G) + [target])
        _prime_clean(port, G)
        if accessed:
            accessed_n += 1
            for op, addr in victim_accesses:
                port.victim(addr, op)
        if settle_ns:
            port.idle(settle_ns)
        detected = any([port.missed(port.load(a)) for a in G])
        if records is not None:
            records.append({"trial": trial, "accessed": accessed, "detected": detected})
        if accessed:
            det_acc += detected
        else:
            det_idle += detected
    return DetectionStats(trials, accessed_n, det_acc, det_idle)


def measure_eviction_rate(cache: Cache, G: Sequence[int], target: int, trials: int = 1000) -> float:
    """Ground-truth rate at which one pass over G evicts a freshly cached target."""
    evicted = 0
    cache.warm(list(G) + [target])
    for _ in range(trials):
        _reset(cache, list(G) + [target])
        cache.access(target, "R", cache.now)
        for a in G:
            cache.access(a, "R", cache.now)
        evicted += not cache.contains(target)
    return evicted / trials if trials else 0.0


def measure_catch_rate(make, k_prime: int, trials: int = 1000, seed: int = 0) -> float:
    """Fraction of trials where a fresh access conflicts once k' lines are cached.

    ``make(seed)`` must return an empty cache; each trial uses a new one.
    """
    caught = 0
    for t in range(trials):
        cache = make(seed * 1_000_003 + t)
        pool = AddressPool(seed * 7919 + t, cache.geometry.line_size, batch=k_prime + 64)
        pool.port = Port(cache, AttackerModel())
        while cache.occupancy() < k_prime:
            cache.access(pool.fresh(), "R", cache.now)
        out = cache.access(pool.fresh(), "R", cache.now)
        caught += out.eviction is Eviction.CONFLICT
    return caught / trials if trials else 0.0


# -- decay-rate estimation ------------------------------------------------------

@dataclass
class RttlEstimate:
    round_times: list[float]
    miss_counts: list[int]
    threshold: int
    baseline_rate: float
    estimated_conflict_times: list[float]
    true_conflict_times: list[float]
    precision: float
    recall: float
    degenerate: bool

    def summary(self) -> dict:
        return {"rounds": len(self.round_times), "threshold": self.threshold,
                "baseline_rate": self.baseline_rate,
                "estimated_conflicts": len(self.estimated_conflict_times),
                "true_conflicts": len(self.true_conflict_times),
                "precision": self.precision, "recall": self.recall, "degenerate": self.degenerate}


def _poisson_threshold(rate: float, alpha: float) -> int:
    """Smallest m >= 1 with P(X >= m) < alpha for X ~ Poisson(rate)."""
    m = 1
    while sps.poisson.sf(m - 1, rate) >= alpha:
        m += 1
    return m


def estimate_rttl(cache: Cache, attacker: AttackerModel, probe_set: Sequence[int], duration_ns: float,
                  interval_ns: float = 10_000.0, calibration_rounds: int = 5, alpha: float = 1e-3,
                  noise: Sequence[tuple[float, int]] = (), min_burst: int = 2) -> RttlEstimate:
    """Re-probe ``probe_set`` every ``interval_ns`` and flag miss bursts as conflicts.

    The first ``calibration_rounds`` rounds set a Poisson baseline for misses
    from ordinary expiry; a later round is flagged when its miss count is
    improbable under that baseline.  ``noise`` is a time-sorted list of
    ``(time_ns, addr)`` accesses by other programs, replayed as time passes.
    A flagged round also needs at least ``min_burst`` misses, since a single
    miss is just as likely an ordinary expiry.
    """
    port = Port(cache, attacker)
    cache.warm(list(probe_set) + [a for _, a in noise])
    start = port.now
    conflicts_before = len(cache.conflict_times)
    noise = sorted(noise)
    ni = 0
    times, counts = [], []

    def replay_noise(upto: float) -> None:
        nonlocal ni
        while ni < len(noise) and noise[ni][0] <= upto:
            t, a = noise[ni]
            cache.access(a, "R", max(t, cache.now))
            ni += 1

    for a in probe_set:  # initial prime
        port.load(a)
    next_round = port.now + interval_ns
    while port.now - start < duration_ns:
        replay_noise(next_round)
        port.now = max(port.now, next_round, cache.now)
        misses = sum(port.missed(port.load(a)) for a in probe_set)
        times.append(port.now)
        counts.append(misses)
        next_round = port.now + interval_ns

    base = counts[:calibration_rounds]
    rate = sum(base) / len(base) if base else 0.0
    thr = max(min_burst, _poisson_threshold(rate, alpha))
    flagged = [i for i in range(calibration_rounds, len(counts)) if counts[i] >= thr]
    est = [times[i] for i in flagged]
    true = list(cache.conflict_times[conflicts_before:])

    # round i covers (times[i-1], times[i]]; a conflict may surface one round late
    def window(t: float) -> int:
        lo, hi = 0, len(times)
        while lo < hi:
            mid = (lo + hi) // 2
            if times[mid] < t:
                lo = mid + 1
            else:
                hi = mid
        return lo

    eval_true = [t for t in true if times and t > times[min(calibration_rounds, len(times)) - 1]] if times else []
    true_windows = {window(t) for t in eval_true}
    tp = sum(1 for i in flagged if i in true_windows or (i - 1) in true_windows)
    precision = tp / len(flagged) if flagged else 1.0
    hit_windows = sum(1 for w in true_windows if w in flagged or (w + 1) in flagged)
    recall = hit_windows / len(true_windows) if true_windows else 1.0
    degenerate = len(counts) > 1 and all(c == len(probe_set) for c in counts[1:])
    return RttlEstimate(times, counts, thr, rate, est, eval_true, precision, recall, degenerate)


# -- Evict+Time ------------------------------------------------------------------

@dataclass
class EvictTimeResult:
    evict_runtimes: list[float]
    control_runtimes: list[float]
    statistic: float
    p_value: float

    def summary(self) -> dict:
        return {"samples": len(self.evict_runtimes),
                "mean_evict": float(np.mean(self.evict_runtimes)) if self.evict_runtimes else 0.0,
                "mean_control": float(np.mean(self.control_runtimes)) if self.control_runtimes else 0.0,
                "statistic": self.statistic, "p_value": self.p_value}


def distinguish(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Difference of means over pooled std, and the Welch t-test p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        return 0.0, 1.0
    diff = float(a.mean() - b.mean())
    pooled = math.sqrt((a.var(ddof=1) + b.var(ddof=1)) / 2)
    if pooled == 0.0:
        if diff == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, diff), 0.0
    p = float(sps.ttest_ind(a, b, equal_var=False).pvalue)
    return diff / pooled, 1.0 if math.isnan(p) else p


def victim_program(secret_bit: int, lines: int = 8, base: int = 0x4000_0000,
                   line_size: int = 64) -> list[TraceRecord]:
    """Synthetic victim: touches set A when the secret is 1, set B otherwise.

    A and B are runs of consecutive lines, so each line has its own set in
    any cache with at least ``2 * lines`` sets.
    """
    a = [TraceRecord("R", base + i * line_size) for i in range(lines)]
    b = [TraceRecord("R", base + (lines + i) * line_size) for i in range(lines)]
    return a if secret_bit else b


def evict_time_experiment(cache: Cache, secret_bit: int, samples: int = 200,
                          victim: Sequence[TraceRecord] | None = None, gap_ns: float = 10e6,
                          seed: int = 0) -> EvictTimeResult:
    """Victim runtime after an attacker evicts the set of A's first line vs. idling.

    The attacker uses conventional set-index congruence (plain address bits);
    it has no access to a randomized mapping.  ``gap_ns`` separates the warm
    run from the timed run.
    """
    if victim is None:
        victim = victim_program(secret_bit)
    geo = cache.geometry
    probe = victim_program(1)[0].addr
    # same plain set index as ``probe``, distinct tags
    ev = [ATTACKER_REGION + ((t + 1) * geo.lines_per_way * geo.line_size) + (probe % (geo.lines_per_way * geo.line_size))
          for t in range(geo.ways)]
    cache.warm([r.addr for r in victim] + ev)
    rng = random.Random(seed)
    port = Port(cache, AttackerModel("timing-only"))
    block = geo.ways * (cache.lat.t_miss + cache.lat.writeback_penalty)
    evict, control = [], []
    conds = [True] * samples + [False] * samples
    rng.shuffle(conds)
    for do_evict in conds:
        for op, addr in victim:
            port.victim(addr, op)
        port.idle(gap_ns)
        # both branches take the same virtual time, so only cache state differs
        t0 = port.now
        if do_evict:
            for a in ev:
                port.load(a)
        port.idle(max(0.0, t0 + block - port.now))
        t0 = port.now
        for op, addr in victim:
            port.victim(addr, op)
        (evict if do_evict else control).append(port.now - t0)
    stat, p = distinguish(evict, control)
    return EvictTimeResult(evict, control, stat, p)


# -- denial of service -----------------------------------------------------------------

@dataclass
class DosStats:
    flood_rate: float
    benign_accesses: int
    baseline_miss_rate: float
    flood_miss_rate: float
    flood_accesses: int
    final_period: float | None
    min_period: float | None
    mean_period: float | None

    def summary(self) -> dict:
        return dict(self.__dict__)


def _benign_run(cache: Cache, benign: Sequence[TraceRecord], flood_rate: float,
                pool: AddressPool) -> tuple[float, int, float | None, float | None]:
    misses = flooded = 0
    debt = 0.0
    now = cache.now
    t0 = now
    periods = []
    for op, addr in benign:
        debt += flood_rate
        while debt >= 1.0:
            debt -= 1.0
            out = cache.access(pool.fresh(), "R", now)
            now += out.latency_ns
            flooded += 1
        out = cache.access(addr, op, now)
        now += out.latency_ns
        misses += not out.hit
        if isinstance(cache, ClepsydraCache):
            periods.append((now, cache.scheduler.current_period))
    mean_p = min_p = None
    if periods:
        span = periods[-1][0] - t0
        acc, prev = 0.0, t0
        for t, p in periods:
            acc += p * (t - prev)
            prev = t
        mean_p = acc / span if span else periods[-1][1]
        min_p = min(p for _, p in periods)
    return misses / len(benign), flooded, mean_p, min_p


def dos_scenario(cache: Cache, flood_rate: float, benign_trace: Sequence[TraceRecord],
                 seed: int = 0) -> DosStats:
    """Benign miss rate with and without an interleaved stream of fresh addresses.

    ``flood_rate`` is the number of flooding accesses per benign access.  The
    baseline runs on a copy of ``cache`` taken before anything happens.
    """
    if flood_rate < 0:
        raise ValueError("flood_rate must be non-negative")
    if not benign_trace:
        raise ValueError("benign trace is empty")
    baseline_cache = copy.deepcopy(cache)
    base_rate, _, _, _ = _benign_run(baseline_cache, benign_trace, 0.0, AddressPool(seed))
    pool = AddressPool(seed, cache.geometry.line_size, batch=1 << 14)
    pool.port = Port(cache, AttackerModel())
    cache.warm(r.addr for r in benign_trace)
    rate, flooded, mean_p, min_p = _benign_run(cache, benign_trace, flood_rate, pool)
    final = cache.scheduler.current_period if isinstance(cache, ClepsydraCache) else None
    return DosStats(flood_rate, len(benign_trace), base_rate, rate, flooded, final, min_p, mean_p)
