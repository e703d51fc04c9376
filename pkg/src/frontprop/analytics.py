"""Closed-form quantities for the rate-2 continuous-time nearest-neighbor walk.

The symmetric walk at time t is a difference of two independent Poisson(t)
counts, so its pmf is ``exp(-2t) I_k(2t)`` with the modified Bessel function
evaluated through scipy's exponentially scaled routine, which switches to
the uniform asymptotic expansion internally and stays accurate over the
whole range used here (t up to 1e4).  Everything prone to underflow is also
exposed in log form.

A wording note on monotonicity: as functions of the spatial argument, the
upper tail ``walk_upper_tail(t, .)`` is nonincreasing and the stay-below
probability ``stay_below_prob(t, .)`` is nondecreasing; those are the
directions the product formulas below rely on.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .configuration import (
    EtaProfile,
    ExponentialTail,
    GrowthConditionError,
    ParticleConfiguration,
    ZeroTail,
    front_weight,
)

_TINY_LOG = -745.0  # below exp() underflow


def walk_pmf(t: float, k: int) -> float:
    """P(position = k at time t) for the symmetric rate-2 walk started at 0."""
    if t < 0:
        raise ValueError("time must be >= 0")
    if t == 0.0:
        return 1.0 if k == 0 else 0.0
    return float(special.ive(abs(k), 2.0 * t))


def walk_log_pmf(t: float, k: int) -> float:
    """log P(position = k); stays finite far beyond float underflow."""
    p = walk_pmf(t, k)
    if p > 0.0:
        return math.log(p)
    if t == 0.0:
        return -math.inf
    # scaled Bessel underflowed; leading uniform asymptotics of log I_nu(2t)
    nu = abs(k)
    z = 2.0 * t / nu
    root = math.sqrt(1.0 + z * z)
    eta = root + math.log(z / (1.0 + root))
    return nu * eta - 0.5 * math.log(2.0 * math.pi * nu * root) - 2.0 * t


def pmf_row(t: float, k_max: int) -> np.ndarray:
    """Vector of pmf values for k = 0..k_max."""
    if t == 0.0:
        row = np.zeros(k_max + 1)
        row[0] = 1.0
        return row
    return special.ive(np.arange(k_max + 1), 2.0 * t)


def walk_upper_tail(t: float, x: int) -> float:
    """P(position at time t >= x)."""
    if t < 0:
        raise ValueError("time must be >= 0")
    if t == 0.0:
        return 1.0 if x <= 0 else 0.0
    if x <= 0:
        return 1.0 - walk_upper_tail(t, 1 - x)
    total = 0.0
    k = x
    while True:
        term = float(special.ive(k, 2.0 * t))
        total += term
        k += 1
        if term == 0.0 or term <= total * 1e-18:
            return total


def stay_below_prob(t: float, x: int) -> float:
    """P(the walk stays strictly below x on [0, t)), for x >= 1.

    Reflection identity: 1 - stay_below = 2 * upper_tail - pmf.
    """
    if x < 1:
        raise ValueError("barrier must be >= 1")
    if t == 0.0:
        return 1.0
    return 1.0 - 2.0 * walk_upper_tail(t, x) + walk_pmf(t, x)


def log_stay_below(t: float, x: int) -> float:
    """log of ``stay_below_prob``, accurate both near 0 and near 1."""
    if t == 0.0:
        return 0.0
    hit = 2.0 * walk_upper_tail(t, x) - walk_pmf(t, x)
    if hit < 0.5:
        return math.log1p(-hit)
    val = 1.0 - hit
    return math.log(val) if val > 0.0 else -math.inf


# ---------------------------------------------------------------------------
# exponent bookkeeping for the displacement and growth bounds


def sup_displacement_exponent(gamma: float, theta: float) -> float:
    """Decay rate gamma*theta - 2(cosh theta - 1) of the running-max bound."""
    return gamma * theta - 2.0 * (math.cosh(theta) - 1.0)


def biased_sup_exponent(eps: float, theta: float) -> float:
    """Growth rate 2(cosh theta - 1) + 4 eps sinh theta of exp(theta * walk)."""
    return 2.0 * (math.cosh(theta) - 1.0) + 4.0 * eps * math.sinh(theta)


def front_growth_rate(eps: float, theta: float, a: int) -> float:
    """Exponential growth rate of the tilted particle weight under bias eps."""
    return biased_sup_exponent(eps, theta) + a * (1.0 + 2.0 * eps) * math.exp(theta)


def front_tail_exponent(gamma: float, eps: float, theta: float, a: int) -> float:
    """Decay rate of P(front displacement >= gamma t) from the growth bound."""
    return gamma * theta - front_growth_rate(eps, theta, a)


def trap_margin(eps: float, theta: float, alpha1: float) -> float:
    """Margin theta*alpha1 - 2(cosh theta - 1) - 4 eps sinh theta.

    Positive margin means a walk with bias eps pays exponentially to cross
    the alpha1 line; the margin is nonincreasing in eps.
    """
    return theta * alpha1 - biased_sup_exponent(eps, theta)


# ---------------------------------------------------------------------------
# remote-particle bounds (one walk crossing a long distance quickly)


def _chernoff_log_hit(dist: float, t: float, eps: float) -> tuple[float, float]:
    """(log bound, theta) on P(biased walk gains >= dist sites by time t).

    Optimizes exp(-theta*dist + t*rate(theta)) over a multiplicative grid
    around the saddle point; every grid value is a valid bound.
    """
    if dist <= 0:
        return 0.0, 1.0
    theta0 = math.asinh(dist / max(2.0 * t, 1e-12))
    best = math.inf
    best_theta = theta0 if theta0 > 0 else 1.0
    for g in (0.4, 0.6, 0.8, 1.0, 1.25, 1.6, 2.2):
        theta = max(theta0 * g, 1e-6)
        val = -theta * dist + biased_sup_exponent(eps, theta) * t
        if val < best:
            best, best_theta = val, theta
    return best, best_theta


def remote_hit_bound_sum(profile: EtaProfile, depth: int, t: float, eps: float) -> float:
    """Upper bound on sum over x <= -depth of eta(x) * P(walk born at x reaches 1 by t).

    Uses the exponential martingale at a common theta, so the site sum is the
    tilted tail sum of the profile; minimized over a theta grid around the
    saddle for the leading distance.
    """
    if t == 0.0:
        return 0.0
    _, theta0 = _chernoff_log_hit(depth + 1, t, eps)
    best = math.inf
    for g in (0.5, 0.75, 1.0, 1.5):
        theta = max(theta0 * g, 1e-4)
        try:
            tail = profile.tilted_tail_sum(depth, theta)
        except GrowthConditionError:
            continue
        if tail <= 0.0:
            return 0.0
        log_b = biased_sup_exponent(eps, theta) * t - theta + math.log(tail)
        best = min(best, log_b)
    if best == math.inf:
        return math.inf
    return math.exp(best) if best < 700.0 else math.inf


def remote_hit_bound(profile: EtaProfile, depth: int, t: float, eps: float = 0.0) -> float:
    """Certified bound on P(any walk born at site <= -depth reaches 1 before t)."""
    return min(1.0, remote_hit_bound_sum(profile, depth, t, eps))


# ---------------------------------------------------------------------------
# stand-still probability of the front (deterministic product)


class SlowdownProduct:
    """Exact log-probability that the front has not moved by time t."""

    __slots__ = ("log_value", "tail_bound", "terms")

    def __init__(self, log_value: float, tail_bound: float, terms: int):
        self.log_value = log_value
        self.tail_bound = tail_bound
        self.terms = terms

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value > _TINY_LOG else 0.0

    def __repr__(self):
        return (f"SlowdownProduct(log_value={self.log_value!r}, "
                f"tail_bound={self.tail_bound!r}, terms={self.terms})")


def stand_still_product(profile: EtaProfile, t: float, tol: float = 1e-12) -> SlowdownProduct:
    """P(front still at 0 at time t) for an initial profile with front 0.

    The front stays put iff no initial walk reaches site 1 before t, and the
    walks are independent, so the probability is the product over particles
    of stay-below factors.  The infinite left tail is cut where the certified
    remainder (hit probability <= 2 * upper tail per walk) drops below
    ``tol``; the neglected sites change the log-probability by at most
    ``tail_bound``.
    """
    if t < 0:
        raise ValueError("time must be >= 0")
    if isinstance(profile.tail, ExponentialTail):
        raise GrowthConditionError("no finite certified cut for exponential-growth tails")
    if t == 0.0:
        return SlowdownProduct(0.0, 0.0, 0)

    if isinstance(profile.tail, ZeroTail):
        depth = profile.span()
        tail_rem = 0.0
    else:
        depth = max(profile.span(), int(2.0 * math.sqrt(t)) + 2)
        while True:
            rem = remote_hit_bound_sum(profile, depth + 1, t, 0.0)
            if rem < min(tol, 0.2):
                tail_rem = 2.0 * rem  # -log(1-s) <= 2s for s <= 1/2, per particle
                break
            depth *= 2
            if depth > 10**8:
                raise GrowthConditionError("certified cut unreachable at this tolerance")

    row = pmf_row(t, depth + 1 + int(12.0 * math.sqrt(t)) + 60)
    tail_sums = np.cumsum(row[::-1])[::-1]  # tail_sums[k] = P(walk >= k) up to row end
    log_p = 0.0
    terms = 0
    for d in range(depth + 1):
        cnt = profile.eta(-d)
        if not cnt:
            continue
        x = 1 + d
        hit = 2.0 * tail_sums[x] - row[x]
        if hit < 0.5:
            lg = math.log1p(-hit)
        else:
            val = 1.0 - hit
            lg = math.log(val) if val > 0.0 else -math.inf
        log_p += cnt * lg
        terms += 1
    return SlowdownProduct(log_p, tail_rem, terms)


# ---------------------------------------------------------------------------
# slowdown exponent of the tail-expectation bound


def slowdown_bound_exponent(profile: EtaProfile, b: float, t: float) -> float:
    """t^-1 E[1(walk >= ceil(bt)) * cumulative(-(walk - ceil(bt)))] at time t.

    This is the exponential rate in the upper bound on P(front speed <= b):
    it stays bounded away from 0 exactly when the slowdown cost is
    exponential in t.  Terms are combined in log domain so exponentially
    growing profiles cannot overflow intermediates; a result too large for
    floats is reported as inf.
    """
    if b < 0:
        raise ValueError("b must be >= 0")
    if t <= 0:
        raise ValueError("t must be > 0")
    lead = math.ceil(b * t)
    rate = profile.tail.rate if isinstance(profile.tail, ExponentialTail) else 0.0
    k_hard = lead + int(2.0 * t * math.sinh(rate)) + int(12.0 * math.sqrt(t)) + 40
    log_terms = []
    best = -math.inf
    for k in range(max(lead, 1), k_hard + 1):
        lp = walk_log_pmf(t, k)
        lh = profile.log_cumulative(-(k - lead))
        if lh == -math.inf:
            continue
        term = lp + lh
        log_terms.append(term)
        best = max(best, term)
        if term < best - 60.0 and k > lead + 2.0 * t * math.sinh(rate) + 4:
            break
    if not log_terms:
        return 0.0
    m = max(log_terms)
    s = m + math.log(sum(math.exp(v - m) for v in log_terms))
    if s - math.log(t) > 700.0:
        return math.inf
    return math.exp(s) / t


# ---------------------------------------------------------------------------
# square-root tail integral and the two moment bounds


def sqrt_tail_integral(nu: float, x: float) -> tuple[float, float]:
    """(exact, certified bound) for the integral of exp(-nu sqrt(u)) over [x, inf).

    Exact closed form (2/nu^2) e^{-nu sqrt(x)} (nu sqrt(x) + 1); the bound is
    d1 (4/nu) e^{-(nu/2) sqrt(x)} with d1 = sup_{s>=1} s e^{-(nu/2) s}.
    """
    if nu <= 0:
        raise ValueError("nu must be > 0")
    if x < 0:
        raise ValueError("x must be >= 0")
    s = math.sqrt(x)
    exact = (2.0 / (nu * nu)) * math.exp(-nu * s) * (nu * s + 1.0)
    d1 = (2.0 / nu) * math.exp(-1.0) if nu <= 2.0 else math.exp(-nu / 2.0)
    bound = d1 * (4.0 / nu) * math.exp(-(nu / 2.0) * s)
    return exact, bound


def running_max_bound(w: ParticleConfiguration, b: float, phi: float, t: float) -> float:
    """Bound on P(some particle's running max reaches b*t by time t)."""
    if phi <= 0:
        raise ValueError("phi must be > 0")
    return (front_weight(w, phi) * math.exp(t * (math.cosh(2.0 * phi) - 1.0))
            * math.sqrt(walk_upper_tail(t, math.floor(b * t))))


def weight_growth_bound(w: ParticleConfiguration, phi: float, t: float,
                        expected_front: float) -> float:
    """Bound on E[sum over live particles of exp(phi * (position - front))] at time t."""
    if phi <= 0:
        raise ValueError("phi must be > 0")
    return (math.exp(2.0 * (math.cosh(phi) - 1.0) * t) * front_weight(w, phi)
            + w.particles_per_site * expected_front)
