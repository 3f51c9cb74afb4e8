"""Configuration records shared by the cache models, the simulator and the CLI.

Everything here is plain data and round-trips through JSON.  Times are in
nanoseconds of virtual time.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration values."""


@dataclass(frozen=True)
class CacheGeometry:
    ways: int
    lines_per_way: int
    line_size: int = 64

    def __post_init__(self):
        if self.ways < 1:
            raise ConfigError(f"ways must be positive, got {self.ways}")
        if not _is_pow2(self.lines_per_way):
            raise ConfigError(
                f"lines_per_way must be a power of two, got {self.lines_per_way}")
        if not _is_pow2(self.line_size) or self.line_size < 8:
            raise ConfigError(
                f"line_size must be a power of two >= 8, got {self.line_size}")

    @property
    def entries(self) -> int:
        return self.ways * self.lines_per_way

    @property
    def offset_bits(self) -> int:
        return self.line_size.bit_length() - 1

    @property
    def index_bits(self) -> int:
        return self.lines_per_way.bit_length() - 1

    @property
    def size_bytes(self) -> int:
        return self.entries * self.line_size

    @classmethod
    def from_size(cls, size_bytes: int, ways: int, line_size: int = 64) -> "CacheGeometry":
        lines, rem = divmod(size_bytes, ways * line_size)
        if rem:
            raise ConfigError(f"{size_bytes} bytes is not divisible into {ways} ways")
        return cls(ways, lines, line_size)

    @classmethod
    def from_entries(cls, entries: int, ways: int, line_size: int = 64) -> "CacheGeometry":
        lines, rem = divmod(entries, ways)
        if rem:
            raise ConfigError(f"{entries} entries is not divisible into {ways} ways")
        return cls(ways, lines, line_size)


# 1 MiB, 8-way LLC used for the benchmark runs.
LLC_REFERENCE = CacheGeometry(ways=8, lines_per_way=2048)
# 8 MiB, 16-way cache used for the security estimates (131,072 entries).
SECURITY_REFERENCE = CacheGeometry(ways=16, lines_per_way=8192)


@dataclass(frozen=True)
class TtlConfig:
    """TTL range and decay-event period schedule.

    A decay event decrements every live TTL by one.  The period between events
    grows by ``period_increment`` after each conflict-free event and is divided
    by ``conflict_divisor`` on every conflict, clamped to
    ``[period_min, period_max]``.
    """

    ttl_min: int = 1
    ttl_max: int = 256
    period_base: float = 195_000.0
    period_min: float = 100.0
    period_max: float = 195_000.0
    period_increment: float = 1_000.0
    conflict_divisor: float = 4.0

    def __post_init__(self):
        if not 1 <= self.ttl_min <= self.ttl_max:
            raise ConfigError(f"need 1 <= ttl_min <= ttl_max, got [{self.ttl_min}, {self.ttl_max}]")
        if not 0 < self.period_min <= self.period_base <= self.period_max:
            raise ConfigError("need 0 < period_min <= period_base <= period_max")
        if self.period_increment <= 0:
            raise ConfigError("period_increment must be positive")
        if self.conflict_divisor < 1:
            raise ConfigError("conflict_divisor must be >= 1")

    @property
    def max_lifetime_ns(self) -> float:
        """Upper bound on how long an untouched entry can stay cached."""
        return self.ttl_max * self.period_max


@dataclass(frozen=True)
class Latencies:
    t_hit: float = 10.0
    t_miss: float = 20.0
    writeback_penalty: float = 20.0

    def __post_init__(self):
        if not 0 <= self.t_hit < self.t_miss:
            raise ConfigError("need 0 <= t_hit < t_miss")
        if self.writeback_penalty < 0:
            raise ConfigError("writeback_penalty must be non-negative")


MODEL_KINDS = ("classic", "randomized", "clepsydra")


@dataclass
class SimConfig:
    """Full, JSON-serializable run configuration."""

    model: str = "clepsydra"
    geometry: CacheGeometry = LLC_REFERENCE
    ttl: TtlConfig = field(default_factory=TtlConfig)
    latencies: Latencies = field(default_factory=Latencies)
    prince_rounds: int = 3
    gap_ns: float = 0.0
    clock_period_ns: float = 0.5
    seed: int = 0
    attacker: dict[str, Any] = field(default_factory=lambda: {"oracle": "conflict-aware", "t_threshold": 15.0})
    workload: dict[str, Any] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown cache model {self.model!r}; expected one of {MODEL_KINDS}")
        if self.gap_ns < 0:
            raise ConfigError("gap_ns must be non-negative")
        if self.clock_period_ns <= 0:
            raise ConfigError("clock_period_ns must be positive")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(data)
        try:
            if "geometry" in kw:
                kw["geometry"] = CacheGeometry(**kw["geometry"])
            if "ttl" in kw:
                kw["ttl"] = TtlConfig(**kw["ttl"])
            if "latencies" in kw:
                kw["latencies"] = Latencies(**kw["latencies"])
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(**kw)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SimConfig":
        with open(path) as fh:
            cfg = cls.from_dict(json.load(fh))
        return cfg.with_env_seed()

    def with_env_seed(self) -> "SimConfig":
        """Apply the ``CLEPSYDRA_SEED`` override, if set."""
        env = os.environ.get("CLEPSYDRA_SEED")
        if env is not None:
            try:
                self.seed = int(env, 0)
            except ValueError as exc:
                raise ConfigError(f"CLEPSYDRA_SEED is not an integer: {env!r}") from exc
        return self
