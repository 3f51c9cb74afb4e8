"""Trace format, synthetic workloads, the replay loop and run statistics.

Trace files are plain text with one access per line::

    # comment
    R 0x00ab40
    W 0x00ab80

Virtual time is in nanoseconds; ``total_cycles`` converts it with the
configured clock period.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .caches import Cache, Eviction, make_cache
from .config import SimConfig

RUNSTATS_SCHEMA = "clepsydra.runstats/1"
LIFETIME_SCHEMA = "clepsydra.lifetimes/1"


class TraceError(ValueError):
    """Malformed trace input; ``lineno`` is 1-based."""

    def __init__(self, msg: str, lineno: int | None = None):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {msg}" if lineno is not None else msg)


class TraceRecord(NamedTuple):
    op: str
    addr: int

    def __str__(self) -> str:
        return f"{self.op} {self.addr:#010x}"


def parse_trace(lines: Iterable[str]) -> list[TraceRecord]:
    out = []
    for n, raw in enumerate(lines, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 2:
            raise TraceError(f"expected '<R|W> <hex addr>', got {raw.strip()!r}", n)
        op, addr = parts
        op = op.upper()
        if op not in ("R", "W"):
            raise TraceError(f"unknown op {parts[0]!r}", n)
        try:
            value = int(addr, 16)
        except ValueError:
            raise TraceError(f"address {addr!r} is not hex", n) from None
        if not 0 <= value < 1 << 64:
            raise TraceError(f"address {addr!r} does not fit in 64 bits", n)
        out.append(TraceRecord(op, value))
    return out


def read_trace(path: str | os.PathLike) -> list[TraceRecord]:
    with open(path) as fh:
        return parse_trace(fh)


def format_trace(trace: Iterable[TraceRecord]) -> str:
    return "".join(f"{rec}\n" for rec in trace)


def write_trace(trace: Iterable[TraceRecord], path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(format_trace(trace))


# -- synthetic workloads -------------------------------------------------------

WORKLOAD_KINDS = ("loop", "random", "zipf", "dos-flood", "mixed")

_DEFAULTS = {
    "loop": {"addrs": 64, "iterations": 4},
    "random": {"length": 10_000, "footprint": 65_536},
    "zipf": {"length": 10_000, "items": 1_000, "s": 1.0},
    "dos-flood": {"length": 10_000},
    "mixed": {"length": 200_000, "hot": 4_096, "warm": 12_288, "stream": 131_072,
              "phase": 2_000},
}
_COMMON = {"base": 0x1000_0000, "line_size": 64, "write_fraction": 0.0}


def _ops(rng: np.random.Generator, n: int, write_fraction: float) -> list[str]:
    if write_fraction <= 0:
        return ["R"] * n
    return ["W" if w else "R" for w in rng.random(n) < write_fraction]


def _zipf_ranks(rng: np.random.Generator, n: int, items: int, s: float) -> np.ndarray:
    weights = np.arange(1, items + 1, dtype=np.float64) ** -s
    return rng.choice(items, size=n, p=weights / weights.sum())


def gen_workload(kind: str, params: dict | None = None, seed: int = 0) -> list[TraceRecord]:
    """Deterministic synthetic trace for ``(kind, params, seed)``.

    Addresses are line aligned; ``base`` shifts the whole footprint and
    ``write_fraction`` turns that share of accesses into writes.
    """
    if kind not in WORKLOAD_KINDS:
        raise ValueError(f"unknown workload kind {kind!r}; expected one of {WORKLOAD_KINDS}")
    p = {**_COMMON, **_DEFAULTS[kind], **(params or {})}
    unknown = set(p) - set(_COMMON) - set(_DEFAULTS[kind])
    if unknown:
        raise ValueError(f"unknown parameters for {kind}: {sorted(unknown)}")
    rng = np.random.default_rng(seed)
    base, ls = int(p["base"]), int(p["line_size"])

    if kind == "loop":
        n, it = int(p["addrs"]), int(p["iterations"])
        if n < 1 or it < 0:
            raise ValueError("loop needs addrs >= 1 and iterations >= 0")
        lines = np.tile(np.arange(n), it)
    elif kind == "random":
        lines = rng.integers(0, int(p["footprint"]), size=int(p["length"]))
    elif kind == "zipf":
        # rank r is scattered to a random line so hot items do not share sets
        perm = rng.permutation(int(p["items"]))
        lines = perm[_zipf_ranks(rng, int(p["length"]), int(p["items"]), float(p["s"]))]
    elif kind == "dos-flood":
        # never repeats a line; random 40-bit line numbers make collisions negligible
        n = int(p["length"])
        lines = np.unique(rng.integers(0, 1 << 40, size=2 * n + 16))
        lines = rng.permutation(lines)[:n]
    else:
        lines = _mixed_lines(rng, p)
    ops = _ops(rng, len(lines), float(p["write_fraction"]))
    return [TraceRecord(op, base + int(x) * ls) for op, x in zip(ops, lines)]


def _mixed_lines(rng: np.random.Generator, p: dict) -> np.ndarray:
    """Alternating phases: hot loop, zipf-skewed warm set, streaming scan.

    The hot set and part of the warm set fit in a 1 MiB cache; the stream does
    not, so a set-associative cache keeps evicting reusable lines.
    """
    length, phase = int(p["length"]), int(p["phase"])
    hot, warm, stream = int(p["hot"]), int(p["warm"]), int(p["stream"])
    out, pos, scan, which = [], 0, 0, 0
    while pos < length:
        n = min(phase, length - pos)
        if which == 0:
            start = int(rng.integers(0, hot))
            seg = (start + np.arange(n)) % hot
        elif which == 1:
            seg = hot + _zipf_ranks(rng, n, warm, 0.9)
        else:
            seg = hot + warm + (scan + np.arange(n)) % stream
            scan = (scan + n) % stream
        out.append(seg)
        pos += n
        which = (which + 1) % 3
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


# -- statistics ----------------------------------------------------------------

# lifetime buckets: [0, 10 ns), then one bucket per power of ten up to 10 s
LIFETIME_EDGES = (0.0,) + tuple(10.0 ** e for e in range(1, 11)) + (math.inf,)


def lifetime_histogram(lifetimes: Iterable[float]) -> list[int]:
    counts = [0] * (len(LIFETIME_EDGES) - 1)
    for t in lifetimes:
        counts[bisect.bisect_right(LIFETIME_EDGES, t) - 1] += 1
    return counts


@dataclass
class RunStats:
    model: str
    seed: int
    accesses: int
    hits: int
    misses: int
    installs: int
    conflict_evictions: int
    time_evictions: int
    writebacks: int
    drain_writebacks: int
    virtual_time_ns: float
    total_cycles: float
    avg_miss_latency_ns: float
    miss_rate: float
    writebacks_per_cycle: float
    resident_at_end: int
    max_lifetime_ns: float
    lifetime_histogram: list[int] = field(default_factory=list)

    def check(self) -> None:
        """Raise AssertionError if the accounting identities do not hold."""
        assert self.hits + self.misses == self.accesses, "hits + misses != accesses"
        assert self.conflict_evictions + self.time_evictions <= self.installs, "more evictions than installs"
        assert self.installs - self.conflict_evictions - self.time_evictions == self.resident_at_end, \
            "installs - evictions != resident lines"

    def row(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "lifetime_histogram"}
        for i, c in enumerate(self.lifetime_histogram):
            d[f"life_{_bucket_label(i)}"] = c
        return d


def _bucket_label(i: int) -> str:
    lo = LIFETIME_EDGES[i]
    return "lt10ns" if i == 0 else f"ge1e{int(round(math.log10(lo)))}ns"


def collect_stats(cache: Cache, seed: int, now: float, clock_period_ns: float,
                  drained: int = 0) -> RunStats:
    cycles = now / clock_period_ns
    evict_wb = sum(1 for w in cache.writebacks if w.cause is not Eviction.NONE)
    lifetimes = [t for t, _ in cache.lifetimes]
    return RunStats(
        model=cache.kind,
        seed=seed,
        accesses=cache.accesses,
        hits=cache.hits,
        misses=cache.misses,
        installs=cache.installs,
        conflict_evictions=cache.conflict_evictions,
        time_evictions=cache.time_evictions,
        writebacks=evict_wb,
        drain_writebacks=drained,
        virtual_time_ns=now,
        total_cycles=cycles,
        avg_miss_latency_ns=cache.miss_latency_total / cache.misses if cache.misses else 0.0,
        miss_rate=cache.misses / cache.accesses if cache.accesses else 0.0,
        writebacks_per_cycle=evict_wb / cycles if cycles else 0.0,
        resident_at_end=cache.occupancy(),
        max_lifetime_ns=max(lifetimes, default=0.0),
        lifetime_histogram=lifetime_histogram(lifetimes),
    )


def run_trace(cache: Cache, trace: Sequence[TraceRecord], gap_ns: float = 0.0,
              clock_period_ns: float = 0.5, seed: int = 0, drain: bool = True) -> RunStats:
    """Replay ``trace``; each access advances time by its latency plus ``gap_ns``."""
    if not trace:
        raise TraceError("empty trace")
    if gap_ns < 0:
        raise ValueError("gap_ns must be non-negative")
    cache.warm(rec.addr for rec in trace)
    now = cache.now
    for op, addr in trace:
        out = cache.access(addr, op, now)
        now += out.latency_ns + gap_ns
    cache.advance_to(now)
    drained = len(cache.drain(now)) if drain else 0
    stats = collect_stats(cache, seed, now, clock_period_ns, drained)
    stats.check()
    return stats


def simulate(cfg: SimConfig, trace: Sequence[TraceRecord]) -> RunStats:
    cache = make_cache(cfg)
    return run_trace(cache, trace, cfg.gap_ns, cfg.clock_period_ns, cfg.seed)


def _simulate_job(args) -> RunStats:
    cfg_dict, trace = args
    return simulate(SimConfig.from_dict(cfg_dict), trace)


def run_matrix(configs: Sequence[SimConfig], trace: Sequence[TraceRecord], jobs: int = 1) -> list[RunStats]:
    """Run one simulation per config; results keep the input order."""
    work = [(c.to_dict(), list(trace)) for c in configs]
    if jobs <= 1 or len(work) <= 1:
        return [_simulate_job(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_simulate_job, work))


# -- CSV / text output -----------------------------------------------------------

def csv_text(schema: str, header: list[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {schema}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def runstats_csv(stats: Sequence[RunStats]) -> str:
    if not stats:
        raise ValueError("no runs to write")
    rows = [s.row() for s in stats]
    header = list(rows[0])
    return csv_text(RUNSTATS_SCHEMA, header, ([r[h] for h in header] for r in rows))


def runstats_text(stats: RunStats) -> str:
    row = stats.row()
    width = max(map(len, row))
    return "".join(f"{k:<{width}}  {v}\n" for k, v in row.items())


class LifetimeBoundError(AssertionError):
    """An entry outlived the longest lifetime the TTL schedule allows."""


def lifetime_report(cache: Cache, bound_ns: float | None = None) -> str:
    """Histogram CSV of per-eviction lifetimes split by eviction cause.

    Lines still resident are not lifetimes yet; their count is reported as
    ``unevicted``.  For decaying caches the longest observed lifetime is
    checked against ``ttl_max * period_max`` (or ``bound_ns``).
    """
    if not cache.track_lifetimes:
        raise ValueError("lifetime tracking was disabled for this cache")
    if bound_ns is None and hasattr(cache, "ttl_cfg"):
        bound_ns = cache.ttl_cfg.max_lifetime_ns
    longest = max((t for t, _ in cache.lifetimes), default=0.0)
    if bound_ns is not None and longest > bound_ns:
        raise LifetimeBoundError(f"lifetime {longest} ns exceeds bound {bound_ns} ns")
    by_cause = {c: lifetime_histogram(t for t, cc in cache.lifetimes if cc is c)
                for c in (Eviction.CONFLICT, Eviction.TIME)}
    rows = []
    for i in range(len(LIFETIME_EDGES) - 1):
        rows.append((LIFETIME_EDGES[i], LIFETIME_EDGES[i + 1],
                     by_cause[Eviction.CONFLICT][i], by_cause[Eviction.TIME][i]))
    text = csv_text(LIFETIME_SCHEMA, ["lo_ns", "hi_ns", "conflict", "time"], rows)
    return text + f"# unevicted: {cache.occupancy()}\n# max_lifetime_ns: {_fmt(float(longest))}\n"
