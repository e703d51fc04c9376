"""Exact event-driven simulation of the moving front.

Active walks jump at rate 2; a jump landing one site past the front advances
it and wakes ``a`` fresh walks at the new site, each driven by streams keyed
to its birthplace.  Because the clocks and step uniforms are keyed, a walk's
trajectory never depends on when it was activated, which is what makes the
bias coupling and the hitting-time calculus exact pathwise.

Infinite-left initial conditions must be truncated: the simulator refuses
them unless a tolerance is supplied, in which case the cutoff carries a
certified bound on the probability that any discarded walk could have
touched positive sites within the horizon.
"""

from __future__ import annotations

import math
from array import array
from dataclasses import dataclass, field
from heapq import heappop, heappush

from . import analytics
from .configuration import (
    EtaProfile,
    ExponentialTail,
    GrowthConditionError,
    LazyLeftTail,
    ParticleConfiguration,
    ZeroTail,
)
from .randomness import BASE_FAMILY, RandomField

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_UNIT = 1.1102230246251565e-16

DEFAULT_EVENT_CAP = 10**8


@dataclass
class Truncation:
    cutoff: int          # walks born at sites >= front - cutoff were kept
    bound: float         # certified probability that the discarded ones matter
    horizon: float       # the bound is valid up to this time


@dataclass
class SimulationTrace:
    """Everything needed to evaluate stopping times after the fact."""

    eps: float
    seed: int
    initial: ParticleConfiguration
    front_path: list                 # [(time, front)], first entry (0.0, r0)
    activations: dict                # site -> activation time (sites > r0)
    walk_paths: dict | None          # (site, i) -> (times, positions), absolute
    birth_times: dict                # (site, i) -> activation time
    horizon: float
    truncation: Truncation | None = None
    event_cap_hit: bool = False
    events: int = 0
    family: int = BASE_FAMILY

    @property
    def front(self) -> int:
        return self.front_path[-1][1]

    def front_at(self, t: float) -> int:
        """Front position at time t (piecewise constant, cadlag)."""
        if t < 0 or t > self.horizon:
            raise ValueError("time outside the simulated horizon")
        path = self.front_path
        lo, hi = 0, len(path) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if path[mid][0] <= t:
                lo = mid
            else:
                hi = mid - 1
        return path[lo][1]

    def hitting_time(self, u: int) -> float | None:
        """First front-advance time reaching site u, None if beyond the trace."""
        r0 = self.front_path[0][1]
        if u <= r0:
            return 0.0
        idx = u - r0
        if idx >= len(self.front_path):
            return None
        return self.front_path[idx][0]

    def position_at(self, key, t: float) -> int:
        """Position of the walk born at ``key`` at time t (birth site before activation)."""
        times, positions = self.walk_paths[key]
        if t < times[0]:
            return key[0]
        lo, hi = 0, len(times) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if times[mid] <= t:
                lo = mid
            else:
                hi = mid - 1
        return positions[lo]


def truncation_cutoff(profile: EtaProfile, t: float, tol: float,
                      eps: float = 0.0) -> tuple[int, float]:
    """Smallest tested depth K with a certified bound <= tol.

    The bound dominates the probability that any walk born at depth > K
    reaches site 1 within time t; it is nonincreasing in K.
    """
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    if isinstance(profile.tail, ZeroTail):
        return profile.span(), 0.0
    if t == 0.0:
        return 0, 0.0
    if isinstance(profile.tail, ExponentialTail):
        raise GrowthConditionError(
            "exponential-growth tails admit no finite certified cutoff")
    depth = max(profile.span() + 1, int(2.0 * math.sqrt(t)) + 2, 4)
    while True:
        bound = analytics.remote_hit_bound(profile, depth + 1, t, eps)
        if bound <= tol:
            return depth, bound
        depth *= 2
        if depth > 10**9:
            raise GrowthConditionError("certified cutoff unreachable at this tolerance")


def _tail_profile(tail: LazyLeftTail) -> EtaProfile:
    return EtaProfile((0,), tail.law)


def _prepare(w: ParticleConfiguration, eps: float, horizon: float,
             tol: float | None) -> tuple[ParticleConfiguration, Truncation | None]:
    if w.is_finite:
        if w.tail is not None:
            w = w.materialize(w.front - w.tail.boundary)
            w.tail = None
        return w, None
    if tol is None:
        raise ValueError("infinite configuration requires a truncation tolerance")
    if w.tail.origin != w.front:
        raise ValueError("lazy tail must be anchored at the front for truncation")
    profile = _tail_profile(w.tail)
    depth, bound = truncation_cutoff(profile, horizon, tol, eps)
    mat = w.materialize(depth)
    mat.tail = None
    return mat, Truncation(cutoff=depth, bound=bound, horizon=horizon)


def run(w: ParticleConfiguration, eps: float, field: RandomField,
        t_max: float | None = None, target: int | None = None,
        tol: float | None = None, record_paths: bool = True,
        event_cap: int = DEFAULT_EVENT_CAP,
        family: int = BASE_FAMILY,
        stream_family=None) -> SimulationTrace:
    """Exact trajectory from configuration ``w`` under bias ``eps``.

    Runs until ``t_max``, until the front reaches ``target``, or until the
    event cap trips (flagged on the trace).  ``stream_family`` optionally
    maps a birth site to the stream family used for walks born there, which
    is how fresh randomness is spliced in below a site threshold.
    """
    if not 0.0 <= eps < 0.5:
        raise ValueError("bias must lie in [0, 1/2)")
    if t_max is None and target is None:
        raise ValueError("need a horizon or a target site")
    if t_max is not None and t_max < 0:
        raise ValueError("horizon must be >= 0")
    if target is not None and target <= w.front and t_max is None:
        raise ValueError("target must exceed the initial front")

    horizon_for_cut = t_max
    if horizon_for_cut is None:
        # generous guard so the certificate covers the whole run; the caller
        # retries with a larger horizon if the target is not reached in time
        horizon_for_cut = 16.0 + 8.0 * max(target - w.front, 1)
    w0, truncation = _prepare(w, eps, horizon_for_cut, tol)

    thr = 0.5 + eps
    r = w0.front
    r0 = r
    a = w0.particles_per_site
    fam_of = stream_family if stream_family is not None else (lambda site: family)

    front_path = [(0.0, r)]
    activations = {}
    birth_times = {}
    paths = {} if record_paths else None

    # walk state: key -> [position, steps taken, clock base, step base]
    walks = {}
    heap = []
    base = field._base
    for (site, idx), pos in w0.particles.items():
        fam = fam_of(site)
        cb = base(site, idx, 0, fam)
        sb = base(site, idx, 1, fam)
        walks[(site, idx)] = [pos, 0, cb, sb]
        birth_times[(site, idx)] = 0.0
        if record_paths:
            paths[(site, idx)] = (array("d", (0.0,)), array("l", (pos,)))
        z = (cb + _GOLDEN) & _MASK64
        z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
        z ^= z >> 31
        tau = -0.5 * math.log(((z >> 11) + 0.5) * _UNIT)
        heappush(heap, (tau, site, idx))

    events = 0
    cap_hit = False
    last_t = 0.0
    while heap:
        t, site, idx = heappop(heap)
        if t_max is not None and t > t_max:
            last_t = t_max
            break
        events += 1
        if events > event_cap:
            cap_hit = True
            last_t = t
            break
        state = walks[(site, idx)]
        n = state[1] + 1
        # step uniform, inline splitmix finalizer
        z = (state[3] + n * _GOLDEN) & _MASK64
        z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
        z ^= z >> 31
        u = ((z >> 11) + 0.5) * _UNIT
        pos = state[0] + (1 if u <= thr else -1)
        state[0] = pos
        state[1] = n
        if record_paths:
            rec = paths[(site, idx)]
            rec[0].append(t)
            rec[1].append(pos)
        if pos == r + 1:
            r += 1
            front_path.append((t, r))
            activations[r] = t
            for j in range(1, a + 1):
                fam = fam_of(r)
                cb = base(r, j, 0, fam)
                sb = base(r, j, 1, fam)
                walks[(r, j)] = [r, 0, cb, sb]
                birth_times[(r, j)] = t
                if record_paths:
                    paths[(r, j)] = (array("d", (t,)), array("l", (r,)))
                z = (cb + _GOLDEN) & _MASK64
                z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
                z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
                z ^= z >> 31
                tau = -0.5 * math.log(((z >> 11) + 0.5) * _UNIT)
                heappush(heap, (t + tau, r, j))
            if target is not None and r == target:
                last_t = t
                break
        # schedule this walk's next jump
        z = (state[2] + (n + 1) * _GOLDEN) & _MASK64
        z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
        z ^= z >> 31
        tau = -0.5 * math.log(((z >> 11) + 0.5) * _UNIT)
        heappush(heap, (t + tau, site, idx))
    else:
        last_t = t_max if t_max is not None else 0.0

    horizon = t_max if (t_max is not None and not cap_hit
                        and (target is None or r != target)) else last_t
    return SimulationTrace(
        eps=eps, seed=field.seed, initial=w, front_path=front_path,
        activations=activations, walk_paths=paths, birth_times=birth_times,
        horizon=horizon, truncation=truncation, event_cap_hit=cap_hit,
        events=events, family=family,
    )


def coupled_run(w: ParticleConfiguration, eps_list, field: RandomField,
                t_max: float, tol: float | None = None,
                record_paths: bool = False,
                event_cap: int = DEFAULT_EVENT_CAP) -> list:
    """One trace per bias, all driven by identical clock and step draws.

    The cutoff certificate is computed once for the largest bias, so every
    trace sees the same initial particle set and the pathwise comparison is
    exact.
    """
    eps_list = list(eps_list)
    if any(b < a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("bias list must be sorted ascending")
    if not w.is_finite:
        if tol is None:
            raise ValueError("infinite configuration requires a truncation tolerance")
        profile = _tail_profile(w.tail)
        depth, bound = truncation_cutoff(profile, t_max, tol, max(eps_list))
        w = w.materialize(depth)
        w.tail = None
        traces = [run(w, eps, field, t_max=t_max, record_paths=record_paths,
                      event_cap=event_cap) for eps in eps_list]
        for tr in traces:
            tr.truncation = Truncation(depth, bound, t_max)
        return traces
    return [run(w, eps, field, t_max=t_max, tol=tol, record_paths=record_paths,
                event_cap=event_cap) for eps in eps_list]


def front_at(trace: SimulationTrace, t: float) -> int:
    return trace.front_at(t)


def config_at(trace: SimulationTrace, t: float) -> ParticleConfiguration:
    """Snapshot of all active walks at time t as a configuration."""
    if trace.walk_paths is None:
        raise ValueError("trace was recorded without walk paths")
    if t < 0 or t > trace.horizon:
        raise ValueError("time outside the simulated horizon")
    particles = {}
    for key, birth in trace.birth_times.items():
        if birth <= t:
            particles[key] = trace.position_at(key, t)
    return ParticleConfiguration(trace.front_at(t), particles,
                                 trace.initial.particles_per_site, None)


def active_walks(trace: SimulationTrace, t: float) -> int:
    """Number of active walks at time t."""
    return sum(1 for birth in trace.birth_times.values() if birth <= t)


# ---------------------------------------------------------------------------
# trace export


def dump_front_csv(trace: SimulationTrace, fh) -> None:
    fh.write("sigma_n,r\n")
    for t, r in trace.front_path:
        fh.write(f"{t!r},{r}\n")


def dump_trace_csv(trace: SimulationTrace, fh) -> None:
    """Flat event log: jumps, front advances, activations, time-ordered."""
    if trace.walk_paths is None:
        raise ValueError("trace was recorded without walk paths")
    rows = []
    for (site, idx), (times, positions) in trace.walk_paths.items():
        for t, pos in zip(times[1:], positions[1:]):
            rows.append((t, 1, "jump", site, idx, pos))
    for t, r in trace.front_path[1:]:
        rows.append((t, 0, "front", r, 0, r))
    for site, t in trace.activations.items():
        rows.append((t, 2, "activate", site, 0, site))
    rows.sort(key=lambda row: (row[0], row[1], row[3], row[4]))
    fh.write("event_index,time,kind,site,particle,position\n")
    for i, (t, _, kind, site, idx, pos) in enumerate(rows):
        fh.write(f"{i},{t!r},{kind},{site},{idx},{pos}\n")
