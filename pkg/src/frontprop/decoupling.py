"""Hybrid hitting times with fresh randomness behind a site threshold.

For a block of sites (m*j, m*(j+1)] the hybrid hitting time uses the regular
streams for walks born above m*j - m*ell and an independent per-block copy
for everything below.  Splitting the admissible chains by where the first
link starts yields three restricted infima: the far sources under fresh
streams, the far sources under base streams, and the near sources (shared by
both).  The hybrid time is min(far-fresh, near), the plain time is
min(far-base, near), so distant blocks of hybrid times are i.i.d. while each
agrees with the plain time whenever the near chain wins.

All values are symmetric-walk (zero bias) chain infima.  The far source set
is infinite; it is scanned downward with realized clock-sum lower bounds
until no deeper source can beat the running value, which keeps the restricted
identities exact per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import analytics
from .hitting import ChainResult, ChainSource, chain_infimum
from .randomness import BASE_FAMILY, RandomField, fresh_family

FAR_FRESH = "far-fresh"
FAR_BASE = "far-base"
NEAR = "near"


@dataclass(frozen=True)
class DecoupleSpec:
    """Block geometry: length m, decoupling radius ell blocks, block index j,
    and the time-scale parameter alpha in (0, 1)."""

    m: int
    ell: int
    j: int = 0
    alpha: float = 0.5

    def __post_init__(self):
        if self.m < 1 or self.ell < 1:
            raise ValueError("need m >= 1 and ell >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def block_lo(self) -> int:
        return self.m * self.j

    @property
    def block_hi(self) -> int:
        return self.m * (self.j + 1)

    @property
    def threshold(self) -> int:
        return self.m * self.j - self.m * self.ell

    @property
    def time_scale(self) -> float:
        return self.alpha * (self.m * self.ell) ** 2


def _near_sources(spec: DecoupleSpec, a: int):
    return [ChainSource((x, i), x)
            for x in range(spec.threshold + 1, spec.block_lo + 1)
            for i in range(1, a + 1)]


def _far_sources(spec: DecoupleSpec, a: int, field: RandomField, cap_value: float,
                 fresh: bool):
    """Far sources scanned downward until none below can beat ``cap_value``.

    A source's first link must cross at least to block_lo + 1, so its clock
    partial sum over that distance is a realized lower bound on any chain
    through it.  The scan stops once the bound exceeded the cap on a run of
    consecutive sites and the remaining-mass margin is negligible.
    """
    family = fresh_family(spec.j) if fresh else BASE_FAMILY
    if not math.isfinite(cap_value):
        raise ValueError("far scan needs a finite value cap")
    sources = []
    consecutive = 0
    x = spec.threshold
    min_depth = int(6.0 * cap_value) + 40
    while True:
        dist = spec.block_lo + 1 - x
        cleared = True
        for i in range(1, a + 1):
            stream = field.stream(x, i, family)
            s = 0.0
            for n in range(1, dist + 1):
                s += stream.clock(n)
                if s > cap_value:
                    break
            if s <= cap_value:
                cleared = False
            sources.append(ChainSource((x, i), x, family))
        consecutive = consecutive + 1 if cleared else 0
        depth = spec.threshold - x
        if consecutive >= 8 and depth >= min_depth:
            return sources
        x -= 1


def restricted_chain(spec: DecoupleSpec, which: str, field: RandomField, a: int = 1,
                     cap_value: float | None = None,
                     max_time: float | None = None) -> ChainResult:
    """One of the three restricted infima for this block.

    Far variants carry knowledge only up to ``cap_value``: a value at or
    below the cap is exact; otherwise the result is unresolved with the cap
    as its certified lower bound.  That is all the identity and event checks
    require, and it keeps the downward source scan short.
    """
    if which == NEAR:
        srcs = _near_sources(spec, a)
        if not srcs:
            return ChainResult(math.inf, math.inf, True)
        return chain_infimum(srcs, spec.block_lo, spec.block_hi, a, 0.0, field,
                             max_time=max_time)
    if which not in (FAR_FRESH, FAR_BASE):
        raise ValueError(f"unknown restriction {which!r}")
    if cap_value is None:
        cap_value = 1.2 * spec.time_scale + 4.0 * spec.m
    srcs = _far_sources(spec, a, field, cap_value, which == FAR_FRESH)
    res = chain_infimum(srcs, spec.block_lo, spec.block_hi, a, 0.0, field,
                        max_time=cap_value)
    if res.time <= cap_value:
        return res
    return ChainResult(math.inf, cap_value, False)


@dataclass(frozen=True)
class BlockValues:
    """All five quantities of one block on shared randomness."""

    far_fresh: ChainResult    # fresh streams below the threshold
    far_base: ChainResult     # base streams below the threshold
    near: ChainResult         # sources inside (threshold, block_lo]
    hybrid: float             # min(far_fresh, near)
    plain: float              # min(far_base, near)


def block_values(spec: DecoupleSpec, field: RandomField, a: int = 1,
                 budget: float | None = None) -> BlockValues:
    """Evaluate the restricted chains and assemble the hybrid and plain times.

    The budget doubles until the near chain resolves; far chains only ever
    matter below the near value, so their scans are capped just above it.
    """
    budget = budget if budget is not None else 8.0 * spec.m + 16.0
    while True:
        near = restricted_chain(spec, NEAR, field, a, max_time=budget)
        if near.certified and near.hit:
            break
        budget *= 2.0
    cap = near.time * 1.0001 + 1.0
    far_fresh = restricted_chain(spec, FAR_FRESH, field, a, cap_value=cap)
    far_base = restricted_chain(spec, FAR_BASE, field, a, cap_value=cap)
    hybrid = min(far_fresh.time, near.time)
    plain = min(far_base.time, near.time)
    return BlockValues(far_fresh, far_base, near, hybrid, plain)


def decoupled_T(spec: DecoupleSpec, field: RandomField, a: int = 1) -> float:
    """The hybrid block crossing time (fresh streams behind the threshold)."""
    return block_values(spec, field, a).hybrid


def plain_T(spec: DecoupleSpec, field: RandomField, a: int = 1) -> float:
    """The ordinary block crossing time evaluated through the same chains."""
    return block_values(spec, field, a).plain


@dataclass(frozen=True)
class IdentityReport:
    hybrid_is_min: bool       # hybrid == min(far_fresh, near)
    plain_is_min: bool        # plain == min(far_base, near)
    inclusion_ok: bool        # min(far_fresh, far_base) >= near  =>  hybrid == plain
    values: BlockValues


def identity_check(spec: DecoupleSpec, field: RandomField, a: int = 1) -> IdentityReport:
    """Per-sample identities; the far values may be interval-resolved.

    When a far chain is unresolved its lower bound already exceeds the near
    value, which settles every min() comparison exactly.
    """
    vals = block_values(spec, field, a)
    hybrid_is_min = vals.hybrid == min(vals.far_fresh.time, vals.near.time)
    plain_is_min = vals.plain == min(vals.far_base.time, vals.near.time)

    def known_floor(res: ChainResult) -> float:
        return res.time if res.hit else res.lower_bound

    premise = min(known_floor(vals.far_fresh),
                  known_floor(vals.far_base)) >= vals.near.time
    inclusion_ok = (not premise) or vals.hybrid == vals.plain
    return IdentityReport(hybrid_is_min, plain_is_min, inclusion_ok, vals)


def block_family_sample(spec: DecoupleSpec, field: RandomField, offsets: int,
                        a: int = 1) -> list:
    """Hybrid times of ``offsets`` consecutive decoupled blocks.

    Block p starts at m*(j + p*(ell+1)); the spacing guarantees the stream
    sets are disjoint, so the values are i.i.d. across p.
    """
    out = []
    for p in range(offsets):
        shifted = DecoupleSpec(spec.m, spec.ell, spec.j + p * (spec.ell + 1),
                               spec.alpha)
        out.append(decoupled_T(shifted, field, a))
    return out


# ---------------------------------------------------------------------------
# event rates and their bounds


def far_event_bound(spec: DecoupleSpec, a: int = 1) -> float:
    """Certified bound on P(some far chain beats the block time scale).

    Union bound over far walks reaching block_lo + 1 within the time scale:
    reflection for the window (threshold - t, threshold], exponential
    martingale beyond; evaluated concretely, no free constants.
    """
    t = spec.time_scale
    dist_min = spec.block_lo + 1 - spec.threshold  # = m*ell + 1
    theta = math.asinh(1.0) if t <= 1 else 0.5
    g = theta - 2.0 * (math.cosh(theta) - 1.0)
    if g <= 0:
        theta = 0.4
        g = theta - 2.0 * (math.cosh(theta) - 1.0)
    mid_sites = max(0, int(math.ceil(t)) - (dist_min - 1))
    term_mid = a * mid_sites * min(1.0, 2.0 * analytics.walk_upper_tail(t, dist_min))
    term_far = a * math.exp(-g * t) / (1.0 - math.exp(-theta))
    return min(1.0, term_mid + term_far)


def near_survival_bound_shape(m: int, alpha: float, ell_grid, probs):
    """Fit log P(F) ~ log V1 - V2 * sqrt(alpha) * m * ell on a calibration grid.

    The bound's constants are existential, so they are calibrated on part of
    the grid and must then dominate on the rest; returns (V1, V2).
    """
    import numpy as np

    xs = np.array([math.sqrt(alpha) * m * ell for ell in ell_grid], dtype=float)
    ys = np.array([math.log(p) for p in probs], dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    v2 = max(-slope, 1e-9)
    v1 = math.exp(intercept)
    return v1, v2


def event_indicators(spec: DecoupleSpec, field: RandomField, a: int = 1):
    """(far event, near event) for one sample.

    Far event: min(far_fresh, far_base) below the time scale.  Near event:
    the near chain at or above the time scale.  Both are decidable from
    interval-resolved chains scanned up to the scale.
    """
    t = spec.time_scale
    cap = t * 1.0001 + 1.0
    near = restricted_chain(spec, NEAR, field, a, max_time=cap)
    near_event = not (near.hit and near.time < t)
    far_fresh = restricted_chain(spec, FAR_FRESH, field, a, cap_value=cap)
    far_base = restricted_chain(spec, FAR_BASE, field, a, cap_value=cap)
    far_event = min(far_fresh.time, far_base.time) < t
    return far_event, near_event


# ---------------------------------------------------------------------------
# crossing-time tail bound (square-root regime)


def crossing_tail_bound(m: int, t: float, cumulative, rho: float,
                        amplitude: float = 1.0) -> float:
    """Bound amplitude * (1 - rho)^(cumulative(-floor(sqrt(t)))) on the
    survival P(block crossing time >= t) for a front-at-0 configuration.

    ``rho`` is a uniform lower bound on the per-walk probability of reaching
    m + floor(sqrt(t)) by time t, fitted once on a calibration grid.
    """
    depth = int(math.sqrt(t))
    h = cumulative(-depth)
    if h <= 0:
        return amplitude
    return amplitude * (1.0 - rho) ** h


def fit_crossing_tail(m: int, t_grid) -> float:
    """Calibrate rho = min over the grid of the hit probability
    1 - stay_below(t, m + floor(sqrt(t)))."""
    rho = 1.0
    for t in t_grid:
        barrier = m + int(math.sqrt(t))
        hit = 1.0 - analytics.stay_below_prob(t, barrier)
        rho = min(rho, hit)
    return rho
