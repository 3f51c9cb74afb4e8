"""ClepsydraCache simulator: randomized-index caches with TTL decay, attack
harness and closed-form security analytics."""

from .caches import AccessOutcome, ClassicCache, ClepsydraCache, Eviction, Kind, RandomizedCache, make_cache
from .config import LLC_REFERENCE, SECURITY_REFERENCE, CacheGeometry, Latencies, SimConfig, TtlConfig

__version__ = "0.1.0"

__all__ = [
    "AccessOutcome", "CacheGeometry", "ClassicCache", "ClepsydraCache", "Eviction", "Kind",
    "LLC_REFERENCE", "Latencies", "RandomizedCache", "SECURITY_REFERENCE", "SimConfig",
    "TtlConfig", "make_cache",
]
