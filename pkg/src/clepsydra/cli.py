"""Command-line entry point.

Exit status: 0 on success, 1 for usage or input errors, 2 for runtime
failures such as an exhausted attack budget.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from . import analytics as an
from .attacks import (AttackerModel, BudgetExceeded, attack_phase, build_ppp_eviction_set,
                      colliding_addresses, dos_scenario, evict_law_for, evict_time_experiment)
from .caches import make_cache
from .config import MODEL_KINDS, CacheGeometry, ConfigError, SimConfig
from .simkit import (WORKLOAD_KINDS, TraceError, csv_text, format_trace, gen_workload,
                     lifetime_report, read_trace, run_matrix, run_trace, runstats_csv, runstats_text)

TABLE_SCHEMAS = {
    "1": "clepsydra.table1/1",
    "2": "clepsydra.table2/1",
    "profiling": "clepsydra.profiling/1",
}
ATTACK_SCHEMA = "clepsydra.attack/1"
MC_SCHEMA = "clepsydra.mc/1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _emit(text: str, path: str | None) -> None:
    if path and path != "-":
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def aligned(header: list[str], rows: list[list]) -> str:
    cells = [header] + [[_cell(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _table_csv(schema: str, rows: list[dict]) -> tuple[str, list[str], list[list]]:
    header = list(rows[0])
    body = [[r[h] for h in header] for r in rows]
    return csv_text(schema, header, body), header, body


def _seed(args) -> int:
    """--seed, else CLEPSYDRA_SEED, else 0."""
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CLEPSYDRA_SEED")
    if env is None:
        return 0
    try:
        return int(env, 0)
    except ValueError:
        raise ConfigError(f"CLEPSYDRA_SEED is not an integer: {env!r}") from None


def _write_records(records: list[dict], path: str | None) -> None:
    if path:
        _emit("".join(json.dumps(r, sort_keys=True) + "\n" for r in records), path)


# -- subcommands ------------------------------------------------------------------

def cmd_analyze(args) -> int:
    p = an.SecurityParams(args.N, args.ways, args.t_hit, args.t_miss)
    if args.table == "1":
        rows = an.table1(p)
    elif args.table == "2":
        rows = an.table2(p)
    else:
        rows = an.profiling_table(p, args.p_e)
    text, header, body = _table_csv(TABLE_SCHEMAS[args.table], rows)
    if args.out:
        _emit(text, args.out)
        if not args.quiet:
            sys.stdout.write(aligned(header, body))
    else:
        sys.stdout.write(text)
    return 0


def cmd_mc(args) -> int:
    args.seed = _seed(args)
    est = an.monte_carlo_oracle(args.experiment, args.N, args.ways, args.trials,
                                size=args.size, seed=args.seed, model=args.model)
    sp = an.SecurityParams(args.N, args.ways)
    if args.experiment == "catch":
        closed = an.catch_probability(args.size, sp, args.model)
    elif args.experiment == "evict":
        closed = an.LAWS[f"{args.model}-evict"](args.size, sp)
    else:
        closed = an.expected_conflicts(args.size, sp, args.model)
    header = ["experiment", "model", "N", "ways", "size", "trials", "seed",
              "estimate", "ci_lo", "ci_hi", "closed_form", "agrees"]
    row = [args.experiment, args.model, args.N, args.ways, args.size, est.trials, args.seed,
           est.estimate, est.lo, est.hi, closed, est.contains(closed)]
    _emit(csv_text(MC_SCHEMA, header, [row]), args.out)
    return 0


def _load_config(args) -> SimConfig:
    cfg = SimConfig.load(args.config) if args.config else SimConfig().with_env_seed()
    if args.model:
        cfg = replace(cfg, model=args.model)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.gap is not None:
        cfg = replace(cfg, gap_ns=args.gap)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if args.trace:
        trace = read_trace(args.trace)
    elif cfg.workload:
        wl = dict(cfg.workload)
        trace = gen_workload(wl.pop("kind", "mixed"), wl, cfg.seed)
    else:
        raise UsageError("simulate needs --trace or a workload in the config")
    if not trace:
        raise TraceError("empty trace")
    models = args.models.split(",") if args.models else [cfg.model]
    for m in models:
        if m not in MODEL_KINDS:
            raise UsageError(f"unknown model {m!r}")
    configs = [replace(cfg, model=m) for m in models]
    stats = run_matrix(configs, trace, args.jobs)
    out = args.out or cfg.outputs.get("stats")
    _emit(runstats_csv(stats), out)
    if out and not args.quiet:
        for s in stats:
            sys.stdout.write(runstats_text(s) + "\n")
    if args.lifetimes:
        if len(configs) != 1:
            raise UsageError("--lifetimes needs a single model")
        cache = make_cache(configs[0])
        run_trace(cache, trace, cfg.gap_ns, cfg.clock_period_ns, cfg.seed)
        _emit(lifetime_report(cache), args.lifetimes)
    return 0


def _attack_geometry(args) -> CacheGeometry:
    return CacheGeometry.from_entries(args.N, args.ways)


def cmd_attack(args) -> int:
    args.seed = _seed(args)
    geo = _attack_geometry(args)
    cfg = SimConfig(model=args.cache, geometry=geo, seed=args.seed)
    cache = make_cache(cfg)
    attacker = AttackerModel(args.oracle, args.t_threshold)
    target = 0x4000_0000 + 0x40 * (args.seed % 1024)
    rows: list[dict] = []
    records: list[dict] = []
    status = 0
    if args.mode == "ppp":
        budget = args.budget_ms * 1e6 if args.budget_ms else None
        k_size = round(args.fill * geo.entries) if args.fill else None
        try:
            res = build_ppp_eviction_set(cache, target, args.p_e, attacker, budget, k_size, args.seed)
        except BudgetExceeded as exc:
            res, status = exc.result, 2
        row = {"mode": "ppp", "cache": args.cache, "seed": args.seed, **res.summary()}
        if res.G and args.trials:
            det = attack_phase(cache, res.G, target, attacker, trials=args.trials, seed=args.seed,
                               records=records)
            row.update(det.summary())
        rows.append(row)
    elif args.mode == "pp":
        size = args.G
        if size is None:
            if args.cache == "classic":
                size = geo.ways
            else:
                sp = an.SecurityParams(geo.entries, geo.ways)
                size = an.min_set_size_for(args.p_e or 0.5, evict_law_for(cache), sp)
        G = colliding_addresses(cache, target, size, args.seed)
        det = attack_phase(cache, G, target, attacker, trials=args.trials, seed=args.seed,
                           records=records)
        rows.append({"mode": "pp", "cache": args.cache, "seed": args.seed, "G": len(G), **det.summary()})
    elif args.mode == "evict-time":
        for bit in (0, 1):
            r = evict_time_experiment(cache, bit, samples=args.trials, seed=args.seed)
            records += [{"secret_bit": bit, "evicted": True, "runtime_ns": t} for t in r.evict_runtimes]
            records += [{"secret_bit": bit, "evicted": False, "runtime_ns": t} for t in r.control_runtimes]
            rows.append({"mode": "evict-time", "cache": args.cache, "seed": args.seed,
                         "secret_bit": bit, **r.summary()})
    else:
        benign = gen_workload("loop", {"addrs": args.benign_lines, "iterations": args.trials}, args.seed)
        d = dos_scenario(cache, args.flood_rate, benign, args.seed)
        rows.append({"mode": "dos", "cache": args.cache, "seed": args.seed, **d.summary()})
        records.append(rows[-1])
    header = []
    for r in rows:
        header += [h for h in r if h not in header]
    body = [[r.get(h, "") for h in header] for r in rows]
    _emit(csv_text(ATTACK_SCHEMA, header, body), args.out)
    _write_records(records, args.records)
    return status


def cmd_gen_trace(args) -> int:
    params = {}
    for item in args.param or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            raise UsageError(f"--param value for {key!r} is not a number") from None
    try:
        trace = gen_workload(args.kind, params, _seed(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(format_trace(trace), args.out)
    return 0


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clepsydra", description="Cache simulator and security analytics.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="replay a trace against one or more cache models")
    s.add_argument("--config", help="JSON run configuration")
    s.add_argument("--trace", help="trace file (R|W <hex addr> per line)")
    s.add_argument("--out", help="RunStats CSV path (default: stdout)")
    s.add_argument("--model", choices=MODEL_KINDS)
    s.add_argument("--models", help="comma-separated models to run on the same trace")
    s.add_argument("--seed", type=int)
    s.add_argument("--gap", type=float, help="inter-arrival gap in ns")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--lifetimes", help="write a lifetime histogram CSV here")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("attack", help="run an attack scenario")
    a.add_argument("--mode", choices=("ppp", "pp", "evict-time", "dos"), required=True)
    a.add_argument("--cache", choices=MODEL_KINDS, default="clepsydra")
    a.add_argument("--trials", type=int, default=100)
    a.add_argument("--seed", type=int)
    a.add_argument("--N", type=int, default=4096, help="total cache entries")
    a.add_argument("--ways", type=int, default=8)
    a.add_argument("--oracle", choices=("conflict-aware", "timing-only"), default="conflict-aware")
    a.add_argument("--t-threshold", type=float, default=15.0)
    a.add_argument("--p-e", type=float, default=0.5, help="eviction probability goal")
    a.add_argument("--budget-ms", type=float, help="virtual time budget for profiling")
    a.add_argument("--fill", type=float, help="priming set size as a fraction of N")
    a.add_argument("--G", type=int, help="eviction set size for --mode pp")
    a.add_argument("--flood-rate", type=float, default=1.0)
    a.add_argument("--benign-lines", type=int, default=256)
    a.add_argument("--out")
    a.add_argument("--records", help="per-trial JSON lines")
    a.set_defaults(func=cmd_attack)

    z = sub.add_parser("analyze", help="closed-form tables")
    z.add_argument("--table", choices=("1", "2", "profiling"), required=True)
    z.add_argument("--N", type=int, default=131_072)
    z.add_argument("--ways", type=int, default=16)
    z.add_argument("--t-hit", type=float, default=10.0)
    z.add_argument("--t-miss", type=float, default=20.0)
    z.add_argument("--p-e", type=float, default=0.5, help="eviction goal for --table profiling")
    z.add_argument("--out", help="CSV path; an aligned table is printed to stdout")
    z.add_argument("--quiet", action="store_true")
    z.set_defaults(func=cmd_analyze)

    m = sub.add_parser("mc", help="Monte Carlo urn oracle")
    m.add_argument("--experiment", choices=("catch", "evict", "conflicts"), required=True)
    m.add_argument("--model", choices=an.MODELS, default="clepsydra")
    m.add_argument("--N", type=int, default=64)
    m.add_argument("--ways", type=int, default=4)
    m.add_argument("--size", type=int, default=48, help="k' for catch, |G| for evict, k for conflicts")
    m.add_argument("--trials", type=int, default=10_000)
    m.add_argument("--seed", type=int)
    m.add_argument("--out")
    m.set_defaults(func=cmd_mc)

    g = sub.add_parser("gen-trace", help="write a synthetic trace")
    g.add_argument("--kind", choices=WORKLOAD_KINDS, required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--param", action="append", metavar="KEY=VALUE")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_trace)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (TraceError, ConfigError, FileNotFoundError, an.UnreachableError) as exc:
        print(f"clepsydra: error: {exc}", file=sys.stderr)
        return 1
    except (BudgetExceeded, an.DivergenceError, RuntimeError, ArithmeticError) as exc:
        print(f"clepsydra: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"clepsydra: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
