"""Closed-form security estimates for Prime+Prune+Probe and a Monte Carlo oracle.

Two cache families are compared:

``clepsydra``
    A miss only evicts when the whole dynamic set is occupied, so a primed set
    of ``k`` entries catches the target with ``C(k, w) / C(N, w)``, and a
    generalized eviction set has to cover every way.

``scattercache``
    Pure index randomization with random replacement.  Catching is linear in
    the primed fraction, an eviction set only has to hit the way the target
    currently lives in, and profiling needs no re-access to let the decay rate
    recover.  These laws are empirical fits rather than derivations, and are
    cross-checked by the urn simulations below.

All times are nanoseconds unless a name says otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class DivergenceError(ArithmeticError):
    """An expected count is infinite (catching probability reached 1)."""


class UnreachableError(ValueError):
    """A requested probability cannot be reached under the chosen law."""


@dataclass(frozen=True)
class SecurityParams:
    N: int = 131_072
    w: int = 16
    t_hit: float = 10.0
    t_miss: float = 20.0

    def __post_init__(self):
        if not 1 <= self.w <= self.N:
            raise ValueError(f"need 1 <= w <= N, got w={self.w}, N={self.N}")
        if not self.t_hit < self.t_miss:
            raise ValueError("need t_hit < t_miss")


MODELS = ("clepsydra", "scattercache")


def _log_comb(n: float, k: float) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def p_catch_clepsydra(k_prime: int, p: SecurityParams) -> float:
    """Probability that all ``w`` slots of a random dynamic set are primed."""
    if not 0 <= k_prime <= p.N:
        raise ValueError(f"k_prime must lie in [0, {p.N}]")
    if k_prime < p.w:
        return 0.0
    if k_prime == p.N:
        return 1.0
    return math.exp(_log_comb(k_prime, p.w) - _log_comb(p.N, p.w))


def p_catch_scattercache(k_prime: int, p: SecurityParams) -> float:
    if not 0 <= k_prime <= p.N:
        raise ValueError(f"k_prime must lie in [0, {p.N}]")
    return k_prime / p.N


def _catch_curve(k: int, p: SecurityParams, model: str) -> np.ndarray:
    """Catching probability for i = 1..k as an array (log-space products)."""
    i = np.arange(1, k + 1, dtype=np.float64)
    if model == "scattercache":
        return i / p.N
    logp = np.zeros_like(i)
    ok = i >= p.w
    for j in range(p.w):
        logp[ok] += np.log(i[ok] - j) - math.log(p.N - j)
    out = np.where(ok, np.exp(logp), 0.0)
    return out


def _geometric_tail(pc: np.ndarray) -> np.ndarray:
    """sum_{j>=1} pc**j, elementwise; raises if any term diverges."""
    if np.any(pc >= 1.0):
        first = int(np.argmax(pc >= 1.0)) + 1
        raise DivergenceError(f"catching probability reaches 1 at i={first}; expected conflicts diverge")
    return pc / (1.0 - pc)


def expected_conflicts(k: int, p: SecurityParams, model: str = "clepsydra") -> float:
    """Expected conflicts while priming ``k`` addresses one at a time."""
    if not 0 <= k <= p.N:
        raise ValueError(f"k must lie in [0, {p.N}]")
    _check_model(model)
    if k == 0:
        return 0.0
    return float(_geometric_tail(_catch_curve(k, p, model)).sum())


def p_evict_clepsydra(G_size: int, p: SecurityParams) -> float:
    if G_size < 0:
        raise ValueError("G_size must be non-negative")
    w = p.w
    return (1.0 - (1.0 - 1.0 / w) ** (G_size / w)) ** w


def p_evict_scattercache(G_size: int, p: SecurityParams) -> float:
    if G_size < 0:
        raise ValueError("G_size must be non-negative")
    w = p.w
    return 1.0 - (1.0 - 1.0 / w) ** (G_size / w)


LAWS: dict[str, Callable[[int, SecurityParams], float]] = {
    "clepsydra-catch": p_catch_clepsydra,
    "scattercache-catch": p_catch_scattercache,
    "clepsydra-evict": p_evict_clepsydra,
    "scattercache-evict": p_evict_scattercache,
}


def _check_model(model: str) -> None:
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def min_set_size_for(p_goal: float, law: str, p: SecurityParams) -> int:
    """Smallest integer size ``n`` with ``law(n) >= p_goal``."""
    if not 0 < p_goal < 1:
        raise ValueError("p_goal must lie strictly between 0 and 1")
    try:
        fn = LAWS[law]
    except KeyError:
        raise ValueError(f"unknown law {law!r}; expected one of {sorted(LAWS)}") from None

    if law.endswith("catch"):
        hi = p.N
        if fn(hi, p) < p_goal:
            raise UnreachableError(f"{law} never reaches {p_goal} for N={p.N}")
    else:
        hi = 1
        while fn(hi, p) < p_goal:
            hi *= 2
            if hi > 1 << 48:
                raise UnreachableError(f"{law} does not reach {p_goal}")
    lo = 0  # fn(lo) < p_goal since fn(0) == 0
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fn(mid, p) >= p_goal:
            hi = mid
        else:
            lo = mid
    return hi


def t_profiling_iteration(k: int, p: SecurityParams, model: str = "clepsydra") -> float:
    """Time (ns) to prime-and-prune ``k`` addresses once.

    For ``clepsydra`` every conflict costs a full re-access of the addresses
    primed so far (``i-1`` hits and one miss) so the decay rate can recover.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_model(model)
    if model == "scattercache":
        return k * p.t_miss
    pc = _catch_curve(k, p, model)
    i = np.arange(1, k + 1, dtype=np.float64)
    reaccess = (i - 1) * p.t_hit + p.t_miss
    return float(np.sum(p.t_miss + _geometric_tail(pc) * reaccess))


def catch_probability(k: int, p: SecurityParams, model: str) -> float:
    _check_model(model)
    return (p_catch_clepsydra if model == "clepsydra" else p_catch_scattercache)(k, p)


def t_construct_G(p_e_goal: float, k: int, p: SecurityParams, model: str = "clepsydra") -> float:
    """Estimated seconds to build an eviction set reaching ``p_e_goal``."""
    pc = catch_probability(k, p, model)
    if pc <= 0.0:
        raise UnreachableError(f"catching probability is 0 at k={k}; profiling never observes a conflict")
    g = min_set_size_for(p_e_goal, f"{model}-evict", p)
    return g / pc * t_profiling_iteration(k, p, model) * 1e-9


# -- tables ------------------------------------------------------------------

TABLE_PROBS = (0.01, 0.5, 0.9, 0.95)


def table1(p: SecurityParams, probs=TABLE_PROBS) -> list[dict]:
    """Primed-set size needed for each catching probability."""
    rows = []
    for pc in probs:
        kc = min_set_size_for(pc, "clepsydra-catch", p)
        ks = min_set_size_for(pc, "scattercache-catch", p)
        rows.append({
            "p_c": pc,
            "clepsydra_k": kc,
            "clepsydra_util": kc / p.N,
            "scattercache_k": ks,
            "scattercache_util": ks / p.N,
        })
    return rows


def table2(p: SecurityParams, probs=TABLE_PROBS) -> list[dict]:
    """Eviction-set size needed for each eviction probability."""
    return [{
        "p_e": pe,
        "clepsydra_G": min_set_size_for(pe, "clepsydra-evict", p),
        "scattercache_G": min_set_size_for(pe, "scattercache-evict", p),
    } for pe in probs]


PROFILING_SCENARIOS = (
    ("clepsydra", 0.70),
    ("clepsydra", 0.50),
    ("scattercache", 0.01),
)


def profiling_table(p: SecurityParams, p_e_goal: float = 0.5, scenarios=PROFILING_SCENARIOS) -> list[dict]:
    rows = []
    for model, fill in scenarios:
        k = round(fill * p.N)
        rows.append({
            "model": model,
            "fill": fill,
            "k": k,
            "p_c": catch_probability(k, p, model),
            "G": min_set_size_for(p_e_goal, f"{model}-evict", p),
            "t_pp_ns": t_profiling_iteration(k, p, model),
            "t_k_s": t_construct_G(p_e_goal, k, p, model),
        })
    return rows


# -- Monte Carlo oracle ----------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    lo: float
    hi: float
    trials: int

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one trial")
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _proportion(successes: int, n: int) -> MCEstimate:
    lo, hi = wilson_interval(successes, n)
    return MCEstimate(successes / n, lo, hi, n)


def _chunks(total: int, size: int):
    while total > 0:
        n = min(size, total)
        yield n
        total -= n


def mc_catch(N: int, w: int, k_prime: int, trials: int, rng: np.random.Generator) -> MCEstimate:
    """Prime a uniformly random ``k_prime``-subset of slots, then draw one slot per way."""
    if N % w:
        raise ValueError("N must be a multiple of w")
    lines = N // w
    hits = 0
    chunk = max(1, 2_000_000 // N)
    for n in _chunks(trials, chunk):
        keys = rng.random((n, N))
        primed = np.zeros((n, N), dtype=bool)
        if k_prime:
            sel = np.argpartition(keys, k_prime - 1, axis=1)[:, :k_prime]
            np.put_along_axis(primed, sel, True, axis=1)
        slots = np.arange(w) * lines + rng.integers(0, lines, size=(n, w))
        hits += int(np.take_along_axis(primed, slots, axis=1).all(axis=1).sum())
    return _proportion(hits, trials)


def _round_robin(G_size: int, w: int) -> np.ndarray:
    return np.arange(G_size) % w


def mc_evict(w: int, G_size: int, trials: int, rng: np.random.Generator,
             model: str = "clepsydra") -> MCEstimate:
    """Urn model of accessing a generalized eviction set.

    Member ``m`` collides with the target in way ``m % w`` only and lands in
    a uniformly random one of its ``w`` candidate slots.  Clepsydra needs every
    target slot covered; ScatterCache needs the slot the target lives in.
    """
    _check_model(model)
    if G_size == 0:
        return _proportion(0, trials)
    assigned = _round_robin(G_size, w)
    landed = rng.integers(0, w, size=(trials, G_size))
    covers = landed == assigned  # member took the colliding slot
    if model == "clepsydra":
        covered = np.zeros((trials, w), dtype=bool)
        for way in range(w):
            covered[:, way] = covers[:, assigned == way].any(axis=1)
        ok = covered.all(axis=1)
    else:
        home = rng.integers(0, w, size=trials)
        ok = (covers & (assigned[None, :] == home[:, None])).any(axis=1)
    return _proportion(int(ok.sum()), trials)


def mc_conflicts(N: int, w: int, k: int, trials: int, rng: np.random.Generator) -> MCEstimate:
    """Conflicts while priming ``k`` addresses one by one.

    Step ``i`` sees ``i`` occupied slots (the incoming address's own slot is
    counted); each draw of one slot per way that finds all of them occupied
    is a conflict, and the evicted address draws again.  Returns the mean
    count with a normal-approximation 95% interval.
    """
    if N % w:
        raise ValueError("N must be a multiple of w")
    if not 0 <= k <= N:
        raise ValueError(f"k must lie in [0, {N}]")
    if k == N:
        raise DivergenceError("every access conflicts once all N entries are primed")
    lines = N // w
    totals = []
    chunk = max(1, 4_000_000 // N)
    for n in _chunks(trials, chunk):
        primed = np.zeros((n, N), dtype=bool)
        count = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        for _ in range(k):
            # grow every trial's primed set by one uniformly random free slot
            pending = rows
            while pending.size:
                pick = rng.integers(0, N, size=pending.size)
                free = ~primed[pending, pick]
                primed[pending[free], pick[free]] = True
                pending = pending[~free]
            active = rows
            while active.size:
                slots = np.arange(w) * lines + rng.integers(0, lines, size=(active.size, w))
                caught = primed[active[:, None], slots].all(axis=1)
                count[active[caught]] += 1
                active = active[caught]
        totals.append(count)
    c = np.concatenate(totals).astype(np.float64)
    mean = float(c.mean())
    se = float(c.std(ddof=1) / math.sqrt(len(c))) if len(c) > 1 else 0.0
    return MCEstimate(mean, mean - 1.959963984540054 * se, mean + 1.959963984540054 * se, len(c))


def monte_carlo_oracle(experiment: str, N: int, w: int, trials: int, *, size: int,
                       seed: int = 0, model: str = "clepsydra") -> MCEstimate:
    """Dispatch to one of the urn simulations.

    ``size`` is ``k'`` for ``catch``, ``|G|`` for ``evict`` and ``|k|`` for
    ``conflicts``.
    """
    if N > 1 << 16:
        raise ValueError("the oracle is meant for small geometries (N <= 65536)")
    rng = np.random.default_rng(seed)
    if experiment == "catch":
        if model == "scattercache":
            return _mc_catch_scatter(N, size, trials, rng)
        return mc_catch(N, w, size, trials, rng)
    if experiment == "evict":
        return mc_evict(w, size, trials, rng, model)
    if experiment == "conflicts":
        return mc_conflicts(N, w, size, trials, rng)
    raise ValueError(f"unknown experiment {experiment!r}; expected catch, evict or conflicts")


def _mc_catch_scatter(N: int, k_prime: int, trials: int, rng: np.random.Generator) -> MCEstimate:
    """Target replaces one uniformly random slot; caught iff that slot is primed."""
    hits = 0
    for n in _chunks(trials, max(1, 2_000_000 // N)):
        primed = np.argsort(rng.random((n, N)), axis=1) < k_prime
        victim = rng.integers(0, N, size=n)
        hits += int(primed[np.arange(n), victim].sum())
    return _proportion(hits, trials)
