import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clepsydra.caches import ClassicCache, ClepsydraCache
from clepsydra.config import CacheGeometry, SimConfig, TtlConfig
from clepsydra.simkit import (LIFETIME_EDGES, LifetimeBoundError, TraceError, TraceRecord, format_trace,
                              gen_workload, lifetime_histogram, lifetime_report, parse_trace, read_trace,
                              run_matrix, run_trace, runstats_csv, runstats_text, simulate, write_trace)

GEO = CacheGeometry(4, 64)


def test_parse_comments_case_and_blank_lines():
    text = ["# header", "", "r 0x40", "W 80   # trailing", "  R   0XFF  "]
    assert parse_trace(text) == [TraceRecord("R", 0x40), TraceRecord("W", 0x80), TraceRecord("R", 0xFF)]


@pytest.mark.parametrize("line,msg", [("X 0x40", "unknown op"), ("R zz", "not hex"), ("R", "expected"),
                                      ("R 0x1 0x2", "expected"), ("R 0x" + "f" * 17, "64 bits")])
def test_parse_errors_carry_line_numbers(line, msg):
    with pytest.raises(TraceError, match=msg) as exc:
        parse_trace(["R 0x0", line])
    assert exc.value.lineno == 2
    assert str(exc.value).startswith("line 2:")


@settings(max_examples=50)
@given(st.lists(st.tuples(st.sampled_from("RW"), st.integers(0, (1 << 64) - 1)), max_size=50))
def test_format_parse_round_trip(recs):
    trace = [TraceRecord(op, a) for op, a in recs]
    assert parse_trace(format_trace(trace).splitlines()) == trace


def test_trace_file_round_trip(tmp_path):
    trace = gen_workload("random", {"length": 100, "write_fraction": 0.5}, seed=1)
    path = tmp_path / "t.trace"
    write_trace(trace, path)
    assert read_trace(path) == trace
    assert {r.op for r in trace} == {"R", "W"}


@pytest.mark.parametrize("kind", ["loop", "random", "zipf", "dos-flood", "mixed"])
def test_workloads_are_deterministic_and_aligned(kind):
    params = {"length": 5000} if kind != "loop" else {}
    a = gen_workload(kind, params, seed=3)
    b = gen_workload(kind, params, seed=3)
    assert a == b and a
    assert all(r.addr % 64 == 0 for r in a)
    if kind not in ("loop",):
        assert a != gen_workload(kind, params, seed=4)


def test_workload_params_validated():
    with pytest.raises(ValueError):
        gen_workload("loop", {"length": 5})
    with pytest.raises(ValueError):
        gen_workload("sawtooth")
    with pytest.raises(ValueError):
        gen_workload("loop", {"addrs": 0})


def test_loop_and_flood_shapes():
    loop = gen_workload("loop", {"addrs": 8, "iterations": 3})
    assert len(loop) == 24 and loop[:8] == loop[8:16]
    flood = gen_workload("dos-flood", {"length": 20_000}, seed=2)
    assert len({r.addr for r in flood}) == 20_000


def test_zipf_rank_frequency_slope():
    trace = gen_workload("zipf", {"length": 100_000, "items": 1000, "s": 1.0}, seed=0)
    _, counts = np.unique([r.addr for r in trace], return_counts=True)
    freq = np.sort(counts)[::-1][:100]
    slope = np.polyfit(np.log(np.arange(1, 101)), np.log(freq), 1)[0]
    assert abs(slope + 1.0) < 0.1


def test_lifetime_histogram_buckets():
    h = lifetime_histogram([0, 9.9, 10, 99, 1e10, 1e12])
    assert len(h) == len(LIFETIME_EDGES) - 1
    assert h[0] == 2 and h[1] == 2 and h[-1] == 2


def test_run_trace_rejects_empty_trace():
    with pytest.raises(TraceError, match="empty trace"):
        run_trace(ClassicCache(GEO), [])


def test_run_trace_accounting_and_timing():
    trace = gen_workload("loop", {"addrs": 8, "iterations": 5})
    st_ = run_trace(ClassicCache(GEO), trace, gap_ns=5)
    assert (st_.accesses, st_.misses, st_.hits) == (40, 8, 32)
    assert st_.virtual_time_ns == 8 * 20 + 32 * 10 + 40 * 5
    assert st_.total_cycles == st_.virtual_time_ns / 0.5


def test_drain_counts_dirty_lines_separately():
    trace = [TraceRecord("W", i * 64) for i in range(10)]
    st_ = run_trace(ClassicCache(GEO), trace)
    assert st_.drain_writebacks == 10 and st_.writebacks == 0


def test_simulate_is_deterministic_per_seed():
    trace = gen_workload("random", {"length": 20_000, "footprint": 4096}, seed=1)
    cfg = SimConfig(model="clepsydra", geometry=GEO, seed=9)
    a, b = simulate(cfg, trace), simulate(cfg, trace)
    assert a == b
    assert runstats_csv([a]) == runstats_csv([b])


def test_run_matrix_parallel_equals_serial():
    trace = gen_workload("random", {"length": 5000, "footprint": 2048}, seed=1)
    cfgs = [SimConfig(model=m, geometry=GEO, seed=1) for m in ("classic", "randomized", "clepsydra")]
    serial = run_matrix(cfgs, trace, jobs=1)
    assert run_matrix(cfgs, trace, jobs=3) == serial
    assert [s.model for s in serial] == ["classic", "randomized", "clepsydra"]


def test_csv_has_schema_line_and_header():
    trace = gen_workload("loop", {"addrs": 4, "iterations": 2})
    text = runstats_csv([run_trace(ClassicCache(GEO), trace)])
    lines = text.splitlines()
    assert lines[0] == "# schema: clepsydra.runstats/1"
    assert lines[1].startswith("model,seed,accesses")
    assert "conflict_evictions" in runstats_text(run_trace(ClassicCache(GEO), trace))
    with pytest.raises(ValueError):
        runstats_csv([])


def test_lifetime_report_bound_and_unevicted():
    ttl = TtlConfig(ttl_min=1, ttl_max=4, period_base=1000, period_min=100, period_max=1000)
    c = ClepsydraCache(GEO, ttl=ttl, seed=1)
    trace = gen_workload("random", {"length": 20_000, "footprint": 1024}, seed=5)
    run_trace(c, trace, gap_ns=50)
    text = lifetime_report(c)
    assert text.startswith("# schema: clepsydra.lifetimes/1\nlo_ns,hi_ns,conflict,time\n")
    assert f"# unevicted: {c.occupancy()}" in text
    assert max(t for t, _ in c.lifetimes) <= ttl.max_lifetime_ns
    with pytest.raises(LifetimeBoundError):
        lifetime_report(c, bound_ns=1.0)


def test_lifetime_report_needs_tracking():
    c = ClassicCache(GEO, track_lifetimes=False)
    with pytest.raises(ValueError):
        lifetime_report(c)


def test_clepsydra_fewer_conflicts_on_small_mixed():
    # scaled-down mixed workload on a 64 KiB cache
    trace = gen_workload("mixed", {"length": 60_000, "hot": 256, "warm": 768, "stream": 8192, "phase": 500},
                         seed=0)
    geo = CacheGeometry(8, 128)
    classic = simulate(SimConfig(model="classic", geometry=geo), trace)
    clep = simulate(SimConfig(model="clepsydra", geometry=geo), trace)
    assert clep.conflict_evictions < 0.5 * classic.conflict_evictions
