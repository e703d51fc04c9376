"""Regeneration structure: auxiliary front, failure triggers, renewal times.

The construction watches the process after selected front times.  An attempt
starts at the first time the front completes a block whose trailing
configuration is light (small tilted weight behind the front, enough
particles right at it).  The attempt fails if one of three triggers fires:
the auxiliary front falls below the alpha2 line, a walk born in the window
just behind the origin crosses the alpha1 line, or the tilted weight of the
far-left particles overtakes its decay schedule.  If no trigger fires the
attempt time is a regeneration time: the process restarted there, viewed
from its front, is distributionally fresh, so regeneration increments are
i.i.d. and the speed is the ratio of mean front displacement to mean
duration.

Infinite-time triggers cannot be decided by a finite run; a trigger is
declared "never" only relative to an explicit censor window, and every
record carries its censoring metadata.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

from . import simulator
from .configuration import ParticleConfiguration, left_weight, window_count
from .randomness import RandomField
from .simulator import SimulationTrace


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class RenewalParams:
    a: int
    theta: float
    alpha1: float
    alpha2: float
    eps0: float
    p: float
    L: int
    M: int
    mode: str = "strict"

    @property
    def m_quarter(self) -> float:
        return self.M / 4.0 - 1.0

    @property
    def probe_width(self) -> int:
        return int(self.L ** 0.25)


def derived_window(a: int) -> int:
    """Window size used by the strict-mode auxiliary front."""
    return 4 * (a + 9)


def required_block(a: int) -> int:
    """Smallest strict-mode block length: (window + 1)^4."""
    return (derived_window(a) + 1) ** 4


def validate_params(candidate: dict, alpha_hat: float) -> tuple[RenewalParams | None, list]:
    """Check every structural inequality; diagnostic mode relaxes only the
    block/window size floor (the separation inequalities always apply).

    ``alpha_hat`` is the empirical auxiliary-front speed the alpha lines are
    measured against.  Returns (params, violations); params is None when any
    violation is found.
    """
    mode = candidate.get("mode", "strict")
    a = int(candidate["a"])
    theta = float(candidate["theta"])
    alpha1 = float(candidate["alpha1"])
    alpha2 = float(candidate["alpha2"])
    eps0 = float(candidate["eps0"])
    p = float(candidate["p"])
    L = int(candidate["L"])
    errors = []
    if mode == "strict":
        M = derived_window(a)
    else:
        M = int(candidate.get("M", derived_window(a)))
        if M < 2:
            errors.append("window M must be >= 2")
    if a < 1:
        errors.append("a must be >= 1")
    if theta <= 0:
        errors.append("theta must be > 0")
    if not 0.0 < alpha1 < alpha2:
        errors.append("need 0 < alpha1 < alpha2")
    if alpha2 >= alpha_hat:
        errors.append(f"alpha2 must stay below the auxiliary speed {alpha_hat:.4f}")
    if theta > 0:
        drift_line = (2.0 * (math.cosh(theta) - 1.0)
                      + 4.0 * eps0 * math.sinh(theta)) / theta
        if drift_line >= alpha1:
            errors.append(
                f"theta^-1(2(cosh th - 1) + 4 eps0 sinh th) = {drift_line:.4f} >= alpha1")
    if 4.0 * eps0 >= alpha1:
        errors.append("4 eps0 must stay below alpha1")
    if not 0.0 < p:
        errors.append("p must be > 0")
    if p * math.exp(theta) >= 1.0:
        errors.append("p exp(theta) >= 1")
    if theta > 0 and a * math.exp(-L * theta) / (1.0 - math.exp(-theta)) >= p:
        errors.append("fresh-block weight a e^{-L theta}/(1 - e^{-theta}) >= p")
    if mode == "strict" and L ** 0.25 < M + 1:
        errors.append(f"block length must satisfy L^(1/4) >= M+1, i.e. L >= {(M + 1) ** 4}")
    if errors:
        return None, errors
    return RenewalParams(a, theta, alpha1, alpha2, eps0, p, L, M, mode), errors


# ---------------------------------------------------------------------------
# detections with explicit censoring


@dataclass(frozen=True)
class Detection:
    """Trigger time relative to the view origin, or the censor limit reached."""

    time: float | None
    censored_at: float | None

    @property
    def triggered(self) -> bool:
        return self.time is not None

    def decided_until(self) -> float:
        return self.time if self.triggered else self.censored_at


class TraceView:
    """A trace re-rooted at (t0, front(t0)): time-shift plus front-relative frame."""

    def __init__(self, trace: SimulationTrace, t0: float):
        if trace.walk_paths is None:
            raise ValueError("renewal detection needs recorded walk paths")
        if t0 < 0 or t0 > trace.horizon:
            raise ValueError("view origin outside the trace")
        self.trace = trace
        self.t0 = t0
        self.r0 = trace.front_at(t0)
        self.span = trace.horizon - t0

    def activation(self, site: int) -> float | None:
        """View time at which walks born at ``site`` start moving (0 if before t0)."""
        if site <= self.trace.front_path[0][1]:
            return max(0.0, -self.t0)
        t = self.trace.activations.get(site)
        if t is None:
            return None
        return max(t - self.t0, 0.0)

    def walks_at_site(self, site: int):
        # particle indices are contiguous from 1 at every populated site
        keys = []
        i = 1
        while (site, i) in self.trace.birth_times:
            keys.append((site, i))
            i += 1
        return keys

    def jumps_after(self, key, rel_from: float = 0.0):
        """(view time, position) pairs for jumps strictly after t0 + rel_from."""
        times, positions = self.trace.walk_paths[key]
        i = bisect_right(times, self.t0 + rel_from)
        for j in range(i, len(times)):
            yield times[j] - self.t0, positions[j]

    def position(self, key, rel: float) -> int:
        return self.trace.position_at(key, self.t0 + rel)

    def front(self, rel: float) -> int:
        return self.trace.front_at(self.t0 + rel)


def _first_passage(view: TraceView, key, level: int, clock_start: float) -> tuple:
    """(first view-relative clock time the walk reaches level, observed span).

    The clock runs from ``clock_start`` in view time (the walk's own
    activation); returns (None, span) when the level is not reached within
    the recorded path.
    """
    times, positions = view.trace.walk_paths[key]
    abs_start = view.t0 + clock_start
    i = bisect_right(times, abs_start)
    span = view.trace.horizon - abs_start
    if i > 0 and positions[i - 1] >= level:
        return 0.0, span
    for j in range(i, len(times)):
        if positions[j] == level:
            return times[j] - abs_start, span
    return None, span


def window_advance_clocks(view: TraceView, window: int, until: float,
                          need_levels: int | None = None) -> tuple[list, bool]:
    """Per-level advance clocks of the auxiliary front built from the view.

    Level k waits for the first of the walks born within ``window`` sites
    below (clamped at the origin) to reach origin + k in its own
    activation-relative clock.  Returns (clocks, complete); complete is
    False when recorded paths ran out before the requested span was decided.
    """
    clocks = []
    total = 0.0
    k = 0
    while total <= until:
        k += 1
        if need_levels is not None and k > need_levels:
            break
        level = view.r0 + k
        z_lo = max(view.r0, view.r0 + k - window)
        best = math.inf
        unhit_spans = []
        undecided_site = False
        for z in range(z_lo, view.r0 + k):
            act = view.activation(z)
            if act is None:
                undecided_site = True
                continue
            for key in view.walks_at_site(z):
                t_hit, span = _first_passage(view, key, level, act)
                if t_hit is not None:
                    best = min(best, t_hit)
                else:
                    unhit_spans.append(span)
        # decided only if the earliest observed hit precedes every
        # unobserved stretch in which an earlier hit could hide
        if undecided_site or best == math.inf or any(s < best for s in unhit_spans):
            return clocks, False
        clocks.append(best)
        total += best
    return clocks, True


def detect_slow_front(clocks: list, complete: bool, alpha2: float,
                      limit: float) -> Detection:
    """First view time the auxiliary staircase drops below the alpha2 line."""
    c = 0.0
    for n, nu in enumerate(clocks):
        c_next = c + nu
        thr = (n + 1) / alpha2
        if thr < c_next:
            t = max(c, thr)
            if t <= limit:
                return Detection(t, None)
            return Detection(None, limit)
        c = c_next
        if c > limit:
            return Detection(None, limit)
    if complete:
        return Detection(None, limit)
    thr = (len(clocks) + 1) / alpha2
    return Detection(None, min(limit, max(c, thr)))


def detect_left_escape(view: TraceView, params: RenewalParams,
                       limit: float) -> Detection:
    """First view time a walk born in (origin-L, origin) crosses the alpha1 line."""
    best = math.inf
    for z in range(view.r0 - params.L + 1, view.r0):
        for key in view.walks_at_site(z):
            for rel, pos in view.jumps_after(key):
                if rel > limit or rel >= best:
                    break
                if pos > math.floor(params.alpha1 * rel) + view.r0:
                    best = min(best, rel)
                    break
    if best <= limit:
        return Detection(best, None)
    return Detection(None, limit)


def detect_weight_overflow(view: TraceView, params: RenewalParams,
                           limit: float) -> Detection:
    """First view time the far-left tilted weight beats its decay schedule.

    The front term cancels: the condition at view time s reduces to
    sum over monitored walks of exp(theta * position) >= exp(theta *
    (floor(alpha1 s) + origin)), which can only newly hold when a monitored
    walk jumps right, so those jump times are the only check points.
    """
    theta = params.theta
    boundary = view.r0 - params.L
    events = []
    total = 0.0
    for key, birth in view.trace.birth_times.items():
        if key[0] > boundary:
            continue
        total += math.exp(theta * view.position(key, 0.0))
        for rel, pos in view.jumps_after(key):
            if rel > limit:
                break
            events.append((rel, key, pos))
    if total >= math.exp(theta * view.r0):
        return Detection(0.0, None)
    if not events:
        return Detection(None, limit)
    events.sort()
    positions = {}
    for rel, key, pos in events:
        old = positions.get(key)
        if old is None:
            old = view.position(key, 0.0)
        total += math.exp(theta * pos) - math.exp(theta * old)
        positions[key] = pos
        need = theta * (math.floor(params.alpha1 * rel) + view.r0)
        if total > 0.0 and math.log(total) >= need:
            return Detection(rel, None)
    return Detection(None, limit)


@dataclass(frozen=True)
class TriggerScan:
    slow_front: Detection
    left_escape: Detection
    weight_overflow: Detection

    def combined(self) -> Detection:
        """Earliest trigger, decided only where all three scans are decided."""
        parts = (self.slow_front, self.left_escape, self.weight_overflow)
        fired = [d.time for d in parts if d.triggered]
        frontier = min(d.decided_until() for d in parts)
        if fired and min(fired) <= frontier:
            return Detection(min(fired), None)
        return Detection(None, frontier)


def detect_triggers(view: TraceView, params: RenewalParams, limit: float) -> TriggerScan:
    """Staged scan: each trigger is only resolved up to the earliest one found.

    Scanning past the current earliest trigger cannot change the combined
    verdict (its time and the decided frontier both stop there), so the later
    scans run on progressively smaller windows.  The combined detection is
    exact; only wasted work is avoided.
    """
    escape = detect_left_escape(view, params, limit)
    lim2 = min(limit, escape.decided_until())
    levels = int(math.ceil(lim2 * params.alpha2)) + 2
    clocks, complete = window_advance_clocks(view, params.M, lim2, levels)
    slow = detect_slow_front(clocks, complete, params.alpha2, lim2)
    lim3 = min(lim2, slow.decided_until())
    overflow = detect_weight_overflow(view, params, lim3)
    return TriggerScan(slow, escape, overflow)


# ---------------------------------------------------------------------------
# auxiliary front utilities


def auxiliary_front_path(trace: SimulationTrace, window: int,
                         until: float | None = None):
    """[(view time, auxiliary front)] staircase from the trace origin.

    The auxiliary front lags the true front pathwise; it advances one site
    per decided window clock.
    """
    view = TraceView(trace, 0.0)
    limit = trace.horizon if until is None else until
    clocks, complete = window_advance_clocks(view, window, limit)
    path = [(0.0, view.r0)]
    t = 0.0
    for k, nu in enumerate(clocks, start=1):
        t += nu
        if t > limit:
            break
        path.append((t, view.r0 + k))
    return path, complete


def alpha_hat(eps: float, a: int, window: int, field: RandomField, t: float,
              tol: float = 1e-9) -> float:
    """Auxiliary-front speed estimate from one long run started at a full front."""
    from .configuration import standard_config

    w = standard_config("a_delta", 0, a)
    trace = simulator.run(w, eps, field, t_max=t, tol=tol)
    path, _ = auxiliary_front_path(trace, window)
    t_last, r_last = path[-1]
    if t_last <= 0:
        return 0.0
    return (r_last - path[0][1]) / t_last


# ---------------------------------------------------------------------------
# regeneration search


@dataclass(frozen=True)
class Attempt:
    index: int
    start: float              # attempt time S_k, absolute
    anchor: int               # front position R_{k-1} the block search started from
    block: int                # index of the accepted block
    failure: float | None     # D_k, absolute; None when no trigger in the window
    decided_until: float      # absolute time the no-trigger statement covers


@dataclass
class RenewalRecord:
    origin_time: float
    origin_front: int
    attempts: list = field(default_factory=list)
    success: int | None = None          # K, the index of the successful attempt
    regeneration: float | None = None   # kappa, relative to origin_time
    displacement: int | None = None     # front(kappa) - origin_front
    censored: bool = False
    reason: str = ""
    censor_window: float = 0.0

    @property
    def uncensored(self) -> bool:
        return not self.censored and self.success is not None


def _block_search(trace: SimulationTrace, params: RenewalParams, anchor: int):
    """First block past ``anchor`` whose completion config passes both gates."""
    probe = params.probe_width
    j = 1
    while True:
        site = anchor + j * params.L
        t_site = trace.hitting_time(site)
        if t_site is None or t_site > trace.horizon:
            return None, j
        cfg = simulator.config_at(trace, t_site)
        phi = left_weight(cfg, site - params.L, params.theta)
        count = window_count(cfg, site - probe, site)
        if phi <= params.p and count >= params.a * probe / 2.0:
            return (site, t_site), j
        j += 1


def find_regeneration(trace: SimulationTrace, params: RenewalParams,
                      censor_window: float, origin_time: float = 0.0) -> RenewalRecord:
    """Run the attempt iteration on a recorded trace from ``origin_time``.

    An attempt is declared failure-free only when no trigger fires within
    ``censor_window`` after it and the trace actually covers that span;
    otherwise the record is censored with the reason named.
    """
    record = RenewalRecord(origin_time, trace.front_at(origin_time),
                           censor_window=censor_window)
    anchor = record.origin_front
    k = 0
    while True:
        k += 1
        found, j = _block_search(trace, params, anchor)
        if found is None:
            record.censored = True
            record.reason = "horizon exhausted during block search"
            return record
        site, s_abs = found
        view = TraceView(trace, s_abs)
        window = min(censor_window, trace.horizon - s_abs)
        scan = detect_triggers(view, params, window)
        verdict = scan.combined()
        if verdict.triggered:
            d_abs = s_abs + verdict.time
            record.attempts.append(Attempt(k, s_abs, anchor, j, d_abs, d_abs))
            anchor = trace.front_at(d_abs)
            after = d_abs
            continue
        decided = verdict.censored_at
        record.attempts.append(Attempt(k, s_abs, anchor, j, None, s_abs + decided))
        if decided < censor_window:
            record.censored = True
            record.reason = "horizon exhausted inside the censor window"
            return record
        record.success = k
        record.regeneration = s_abs - origin_time
        record.displacement = site - record.origin_front
        return record


def find_regenerations(trace: SimulationTrace, params: RenewalParams,
                       censor_window: float, max_count: int) -> list:
    """Successive regeneration records chained along one trace."""
    records = []
    origin = 0.0
    for _ in range(max_count):
        rec = find_regeneration(trace, params, censor_window, origin)
        records.append(rec)
        if not rec.uncensored:
            break
        origin = origin + rec.regeneration
    return records


# ---------------------------------------------------------------------------
# weight diagnostics


def running_max_weight(trace: SimulationTrace, z: int, t: float,
                       theta: float) -> float:
    """Sum over walks born at sites <= z of exp(theta * (running max - front)).

    Dominates the plain tilted weight of the same walks, which is what makes
    it useful as a block-gate diagnostic.
    """
    if trace.walk_paths is None:
        raise ValueError("needs recorded walk paths")
    total = 0.0
    front = trace.front_at(t)
    for key, birth in trace.birth_times.items():
        if key[0] > z or birth > t:
            continue
        times, positions = trace.walk_paths[key]
        best = positions[0]
        for tt, pos in zip(times, positions):
            if tt > t:
                break
            if pos > best:
                best = pos
        total += math.exp(theta * (best - front))
    return total


def weight_martingale(trace: SimulationTrace, z: int, t: float,
                      theta: float) -> float:
    """Compensated tilted weight of the walks born at sites <= z.

    Equals the sum over those walks of exp(theta * position - rate * t) with
    the biased exponential growth rate 2(cosh th - 1) + 4 eps sinh th, a sum
    of per-walk exponential martingales, so its mean is constant in t.
    """
    from .analytics import biased_sup_exponent

    rate = biased_sup_exponent(trace.eps, theta)
    total = 0.0
    for key, birth in trace.birth_times.items():
        if key[0] > z or birth > 0.0:
            continue
        total += math.exp(theta * trace.position_at(key, t) - rate * t)
    return total


# ---------------------------------------------------------------------------
# the speed estimator


def renewal_speed(records: list, min_records: int = 100):
    """Ratio-of-means speed estimate over uncensored records with a delta CI.

    Returns (speed, (lo, hi), censored_fraction).
    """
    clean = [r for r in records if r.uncensored]
    if len(clean) < min_records:
        raise ValueError(f"need >= {min_records} uncensored records, have {len(clean)}")
    n = len(clean)
    kappas = [r.regeneration for r in clean]
    gains = [float(r.displacement) for r in clean]
    mk = sum(kappas) / n
    mg = sum(gains) / n
    v = mg / mk
    resid = [(g - v * k) for g, k in zip(gains, kappas)]
    var = sum(x * x for x in resid) / (n - 1) if n > 1 else 0.0
    se = math.sqrt(var / n) / mk
    half = 1.959963984540054 * se
    censored_fraction = 1.0 - n / len(records) if records else 0.0
    return v, (v - half, v + half), censored_fraction


# ---------------------------------------------------------------------------
# export


def records_to_csv(records: list, fh) -> None:
    fh.write("record,attempt,S_k,R_k,D_k,censored,reason\n")
    for ri, rec in enumerate(records):
        for att in rec.attempts:
            d = "" if att.failure is None else repr(att.failure)
            fh.write(f"{ri},{att.index},{att.start!r},{att.anchor},{d},"
                     f"{int(rec.censored and att.failure is None)},"
                     f"{rec.reason if rec.censored else ''}\n")


def summary_json(records: list) -> str:
    clean = [r for r in records if r.uncensored]
    payload = {
        "records": len(records),
        "uncensored": len(clean),
        "censored_fraction": (1.0 - len(clean) / len(records)) if records else 0.0,
    }
    if clean:
        ks = [r.regeneration for r in clean]
        mean = sum(ks) / len(ks)
        payload["kappa_mean"] = mean
        payload["kappa_second_moment"] = sum(k * k for k in ks) / len(ks)
        payload["kappa_max"] = max(ks)
        payload["displacement_mean"] = sum(r.displacement for r in clean) / len(clean)
    return json.dumps(payload, sort_keys=True)
