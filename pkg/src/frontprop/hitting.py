"""First-passage calculus: per-walk passage times and the chain infimum.

The front hitting time from a configuration equals an infimum over strictly
increasing site chains of sums of single-walk first-passage times, with the
first link starting from any existing particle and later links from walks
woken along the way.  Evaluated by dynamic programming this gives an oracle
that must tie the event-driven simulation exactly, which is the sharpest
correctness check the package has.

Unreached passages are explicit results, never sentinel floats; a chain
value is certified only when replacing every unresolved link by its elapsed
lower bound cannot change the answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import simulator
from .configuration import ParticleConfiguration, standard_config
from .randomness import BASE_FAMILY, RandomField


@dataclass(frozen=True)
class HitResult:
    """Outcome of one walk's first passage to a target site."""

    hit: bool
    time: float | None       # None when the cap ran out first
    steps: int               # steps consumed
    elapsed: float           # clock sum at the hit, or at the cap (lower bound)

    def value(self) -> float:
        return self.time if self.hit else math.inf


def walk_hit(field: RandomField, birthplace, eps: float, start: int, target: int,
             cap: int = 100_000, family: int = BASE_FAMILY,
             max_time: float | None = None) -> HitResult:
    """First time the walk born at ``birthplace`` and started at ``start``
    reaches ``target``, within ``cap`` steps and optionally within ``max_time``.

    Clock partial sums are strictly increasing, so the first visit is the
    infimum over all step counts; when a budget runs out, the elapsed sum is
    a valid lower bound for the eventual passage time.
    """
    if start == target:
        raise ValueError("start and target must differ")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    site, idx = birthplace
    stream = field.stream(site, idx, family)
    thr = 0.5 + eps
    t = 0.0
    pos = start
    for n in range(1, cap + 1):
        t += stream.clock(n)
        if max_time is not None and t > max_time:
            return HitResult(False, None, n, t)
        pos += 1 if stream.uniform(n) <= thr else -1
        if pos == target:
            return HitResult(True, t, n, t)
    return HitResult(False, None, cap, t)


def simulated_T(w: ParticleConfiguration, u: int, eps: float, field: RandomField,
                tol: float | None = None, event_cap: int = simulator.DEFAULT_EVENT_CAP,
                t_max: float | None = None) -> float | None:
    """First time the simulated front reaches site u (None if capped out).

    For lazily truncated configurations the horizon guard is doubled until
    the hit happens inside the span its cutoff certificate covers.
    """
    if u <= w.front:
        raise ValueError("target must exceed the front")
    if w.is_finite:
        tr = simulator.run(w, eps, field, target=u, t_max=t_max,
                           record_paths=False, event_cap=event_cap)
        return tr.hitting_time(u)
    guard = 16.0 + 8.0 * (u - w.front)
    while True:
        tr = simulator.run(w, eps, field, target=u, t_max=guard, tol=tol,
                           record_paths=False, event_cap=event_cap)
        t = tr.hitting_time(u)
        if t is not None:
            return t
        if tr.event_cap_hit:
            return None
        guard *= 2.0


@dataclass(frozen=True)
class ChainSource:
    """A possible first link: walk born at ``birthplace`` standing at ``start``."""

    birthplace: tuple
    start: int
    family: int = BASE_FAMILY


@dataclass(frozen=True)
class ChainResult:
    time: float               # math.inf when no admissible chain was resolved
    lower_bound: float        # DP value with unresolved links at their elapsed sums
    certified: bool           # True when the two DP passes agree

    @property
    def hit(self) -> bool:
        return math.isfinite(self.time)


def chain_infimum(sources, interior_lo: int, target: int, a: int, eps: float,
                  field: RandomField, cap: int = 100_000,
                  interior_family: int = BASE_FAMILY,
                  max_time: float | None = None) -> ChainResult:
    """Infimum over chains interior_lo < x2 < ... < target of summed passages.

    ``sources`` supply the first link; intermediate links come from the ``a``
    walks woken at each interior site.  Two DP passes bracket the truth:
    one treats unresolved passages as absent, the other as their elapsed
    lower bounds.  Equal results certify the infimum.
    """
    sites = list(range(interior_lo + 1, target + 1))
    hi = {}
    lo = {}
    for s in sites:
        best_hi = math.inf
        best_lo = math.inf
        for src in sources:
            res = walk_hit(field, src.birthplace, eps, src.start, s, cap,
                           src.family, max_time)
            best_hi = min(best_hi, res.value())
            best_lo = min(best_lo, res.elapsed)
        for s_prev in range(interior_lo + 1, s):
            base_hi = hi[s_prev]
            base_lo = lo[s_prev]
            if base_lo == math.inf:
                continue
            for i in range(1, a + 1):
                res = walk_hit(field, (s_prev, i), eps, s_prev, s, cap,
                               interior_family, max_time)
                best_hi = min(best_hi, base_hi + res.value())
                best_lo = min(best_lo, base_lo + res.elapsed)
        hi[s] = best_hi
        lo[s] = best_lo
    certified = hi[target] == lo[target]
    return ChainResult(hi[target], lo[target], certified)


ORACLE_SPAN = 8


def chain_oracle(w: ParticleConfiguration, u: int, eps: float, field: RandomField,
                 cap: int = 50_000, cap_limit: int = 200_000_000) -> ChainResult:
    """Chain-infimum value of the front hitting time, at oracle scale.

    Requires a fully materialized configuration and a small span, because the
    work grows quadratically in the span and the result is meant to tie the
    simulation exactly.  The step cap doubles until the value is certified
    (long stalls of a single walk can need millions of steps); an uncertified
    result is returned only once the cap limit is reached.
    """
    if u <= w.front:
        raise ValueError("target must exceed the front")
    if u - w.front > ORACLE_SPAN:
        raise ValueError(f"oracle span capped at {ORACLE_SPAN} sites")
    if w.tail is not None:
        raise ValueError("materialize the configuration before calling the oracle")
    sources = [ChainSource(key, pos) for key, pos in sorted(w.particles.items())]
    while True:
        result = chain_infimum(sources, w.front, u, w.particles_per_site, eps,
                               field, cap)
        if result.certified or cap >= cap_limit:
            return result
        cap *= 4


def truncated_T(w: ParticleConfiguration, u: int, K: int, eps: float,
                field: RandomField) -> ChainResult:
    """Chain value with every walk limited to K steps and sources born >= -K.

    Nonincreasing in K and ultimately stationary with limit the untruncated
    hitting time.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if w.tail is not None:
        raise ValueError("materialize the configuration first")
    sources = [ChainSource(key, pos) for key, pos in sorted(w.particles.items())
               if key[0] >= -K]
    if not sources:
        return ChainResult(math.inf, 0.0, True)
    return chain_infimum(sources, w.front, u, w.particles_per_site, eps, field, cap=K)


def subadditivity_check(w: ParticleConfiguration, u: int, v: int, eps: float,
                        field: RandomField, tol: float | None = None):
    """Pathwise T_w(v) <= T_w(u) + T_{w + (u - front)}(v) on shared randomness."""
    if not w.front < u < v:
        raise ValueError("need front < u < v")
    from .configuration import oplus

    t_v = simulated_T(w, v, eps, field, tol)
    t_u = simulated_T(w, u, eps, field, tol)
    shifted = oplus(w, u - w.front)
    t_rest = simulated_T(shifted, v, eps, field, tol)
    ok = t_v <= t_u + t_rest + 1e-9
    return ok, t_v, t_u, t_rest


def event_subadditivity_check(n: int, m: int, b: float, c: float, eps: float,
                              field: RandomField):
    """The event inclusion behind superadditivity of the log hit probabilities.

    On shared randomness: if the front from a single particle at 0 reaches n
    by time b*n, and the front from a single particle at n reaches n+m by
    c*m, then the front from 0 reaches n+m by b*n + c*m.  Decided with
    horizon-bounded runs, so heavy-tailed hitting times cost nothing.
    """
    first = simulator.run(standard_config("delta", 0, 1), eps, field,
                          target=n, t_max=b * n, record_paths=False)
    second = simulator.run(standard_config("delta", n, 1), eps, field,
                           target=n + m, t_max=c * m, record_paths=False)
    premise = (first.hitting_time(n) is not None
               and second.hitting_time(n + m) is not None)
    if not premise:
        return True, False, None
    full = simulator.run(standard_config("delta", 0, 1), eps, field,
                         target=n + m, t_max=b * n + c * m + 1e-9,
                         record_paths=False)
    conclusion = full.hitting_time(n + m) is not None
    return conclusion, True, full.hitting_time(n + m)
