"""Particle configurations and their static functionals.

A configuration is a front position ``r``, a map from birthplaces (site,
index) to current positions with every position <= r, and an optional lazy
left tail describing particles on sites below an explicit boundary that have
not been materialized yet (each sits at its birth site).  Profiles describe
initial occupancies on the nonpositive half-line as a finite table plus a
tail law; the supported laws keep every growth-condition check analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


class GrowthConditionError(ValueError):
    """A tilted sum diverges for the requested tilt."""


# ---------------------------------------------------------------------------
# tail laws


@dataclass(frozen=True)
class ZeroTail:
    def count(self, depth: int) -> int:
        return 0

    def spec(self) -> str:
        return "zero"


@dataclass(frozen=True)
class ConstantTail:
    count_per_site: int

    def count(self, depth: int) -> int:
        return self.count_per_site

    def spec(self) -> str:
        return f"constant {self.count_per_site}"


@dataclass(frozen=True)
class PolynomialTail:
    """Per-site count ceil(depth ** power); cumulative count grows like depth^(power+1)."""

    power: float

    def count(self, depth: int) -> int:
        return math.ceil(depth ** self.power)

    def spec(self) -> str:
        return f"poly {self.power!r}"


@dataclass(frozen=True)
class ExponentialTail:
    """Per-site count ceil(exp(rate * depth)); violates the growth condition."""

    rate: float

    def count(self, depth: int) -> int:
        if self.rate * depth > 700.0:
            raise OverflowError("exponential tail count exceeds float range")
        return math.ceil(math.exp(self.rate * depth))

    def spec(self) -> str:
        return f"exp {self.rate!r}"


def tail_from_spec(text: str):
    parts = text.split()
    if parts[0] == "zero":
        return ZeroTail()
    if parts[0] == "constant":
        return ConstantTail(int(parts[1]))
    if parts[0] == "poly":
        return PolynomialTail(float(parts[1]))
    if parts[0] == "exp":
        return ExponentialTail(float(parts[1]))
    raise ValueError(f"unknown tail law {text!r}")


# ---------------------------------------------------------------------------
# initial profiles


@dataclass(frozen=True)
class EtaProfile:
    """Initial per-site counts: counts[j] at site -j, tail law below -span."""

    counts: tuple
    tail: object = field(default_factory=ZeroTail)

    def __post_init__(self):
        if not self.counts:
            raise ValueError("profile table must be nonempty")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be >= 0 integers")
        if all(c == 0 for c in self.counts) and isinstance(self.tail, ZeroTail):
            raise ValueError("profile must place at least one particle")

    def span(self) -> int:
        return len(self.counts) - 1

    def eta(self, x: int) -> int:
        """Count at site x <= 0."""
        if x > 0:
            raise ValueError("profile sites are <= 0")
        depth = -x
        if depth <= self.span():
            return self.counts[depth]
        return self.tail.count(depth)

    def cumulative(self, x: int) -> int:
        """Total count on sites x..0 (exact integer)."""
        if x > 0:
            raise ValueError("cumulative count is defined for x <= 0")
        depth = -x
        total = sum(self.counts[: min(depth, self.span()) + 1])
        if depth > self.span():
            if isinstance(self.tail, ZeroTail):
                pass
            elif isinstance(self.tail, ConstantTail):
                total += self.tail.count_per_site * (depth - self.span())
            else:
                for d in range(self.span() + 1, depth + 1):
                    total += self.tail.count(d)
        return total

    def log_cumulative(self, x: int) -> float:
        """log of the cumulative count; closed form once it overflows floats.

        For exponential tails past float range the geometric closed form of
        the tail dominates everything else by hundreds of orders, so the
        table part and the ceil() corrections are dropped there.
        """
        depth = -x
        if isinstance(self.tail, ExponentialTail) and self.tail.rate * depth > 690.0:
            rate = self.tail.rate
            return rate * depth - math.log1p(-math.exp(-rate))
        total = self.cumulative(x)
        return math.log(total) if total > 0 else -math.inf

    def tilted_sum(self, theta: float) -> float:
        """Sum over x <= 0 of eta(x) exp(theta x); raises when divergent."""
        if theta <= 0:
            raise ValueError("tilt must be > 0")
        total = 0.0
        for d, c in enumerate(self.counts):
            total += c * math.exp(-theta * d)
        return total + self._tail_tilted(self.span() + 1, theta)

    def tilted_tail_sum(self, depth: int, theta: float) -> float:
        """Upper bound on sum over x <= -depth of eta(x) exp(theta x)."""
        if theta <= 0:
            raise ValueError("tilt must be > 0")
        total = 0.0
        for d in range(depth, self.span() + 1):
            total += self.counts[d] * math.exp(-theta * d)
        return total + self._tail_tilted(max(depth, self.span() + 1), theta)

    def _tail_tilted(self, start_depth: int, theta: float) -> float:
        law = self.tail
        if isinstance(law, ZeroTail):
            return 0.0
        if isinstance(law, ConstantTail):
            return law.count_per_site * math.exp(-theta * start_depth) / (1.0 - math.exp(-theta))
        if isinstance(law, ExponentialTail):
            if theta <= law.rate:
                raise GrowthConditionError(
                    f"tilted sum diverges: tail rate {law.rate} >= tilt {theta}")
            # ceil(e^{rate d}) <= e^{rate d} + 1: two geometric series
            q1 = math.exp(-(theta - law.rate))
            q2 = math.exp(-theta)
            return (q1 ** start_depth) / (1.0 - q1) + (q2 ** start_depth) / (1.0 - q2)
        if isinstance(law, PolynomialTail):
            total = 0.0
            d = start_depth
            while True:
                term = law.count(d) * math.exp(-theta * d)
                total += term
                d += 1
                ratio = math.exp(-theta) * (1.0 + 1.0 / (d - 1)) ** law.power
                if ratio < 1.0 and term * ratio / (1.0 - ratio) < max(total, 1e-300) * 1e-15:
                    return total + term * ratio / (1.0 - ratio)
        raise ValueError(f"unsupported tail law {law!r}")


@dataclass(frozen=True)
class GrowthVerdict:
    satisfied: bool
    value: float
    reason: str = ""


def check_growth_condition(profile: EtaProfile, theta: float) -> GrowthVerdict:
    """Analytic verdict on whether the tilted site sum converges at this tilt."""
    if theta <= 0:
        raise ValueError("tilt must be > 0")
    try:
        value = profile.tilted_sum(theta)
    except GrowthConditionError as exc:
        return GrowthVerdict(False, math.inf, str(exc))
    return GrowthVerdict(True, value)


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class LazyLeftTail:
    """Unmaterialized particles: law.count(origin - x) of them at every site x <= boundary."""

    boundary: int
    origin: int
    law: object

    def eta(self, x: int) -> int:
        if x > self.boundary:
            return 0
        return self.law.count(self.origin - x)


@dataclass
class ParticleConfiguration:
    """Front position, birthplace-indexed particle positions, optional lazy tail."""

    front: int
    particles: dict
    particles_per_site: int = 1
    tail: LazyLeftTail | None = None

    def __post_init__(self):
        if self.particles_per_site < 1:
            raise ValueError("need at least one dormant particle per site")
        if not self.particles and self.tail is None:
            raise ValueError("configuration must contain at least one particle")
        bad = [p for p in self.particles.values() if p > self.front]
        if bad:
            raise ValueError("particle positions must not exceed the front")

    def clone(self) -> "ParticleConfiguration":
        return ParticleConfiguration(self.front, dict(self.particles),
                                     self.particles_per_site, self.tail)

    @property
    def is_finite(self) -> bool:
        return self.tail is None or isinstance(self.tail.law, ZeroTail)

    def occupancy(self) -> dict:
        """Explicit particle count per current position (tail not included)."""
        occ = {}
        for pos in self.particles.values():
            occ[pos] = occ.get(pos, 0) + 1
        return occ

    def eta(self, x: int) -> int:
        """Particles currently at site x, including the lazy tail."""
        n = sum(1 for pos in self.particles.values() if pos == x)
        if self.tail is not None:
            n += self.tail.eta(x)
        return n

    def single_particle(self, site: int, index: int) -> "ParticleConfiguration":
        """Same front, only the particle born at (site, index) retained."""
        key = (site, index)
        if key not in self.particles:
            raise KeyError(f"no particle born at {key}")
        return ParticleConfiguration(self.front, {key: self.particles[key]},
                                     self.particles_per_site, None)

    def materialize(self, depth: int) -> "ParticleConfiguration":
        """Explicit copy with tail particles created down to front - depth."""
        if self.tail is None:
            return self.clone()
        cutoff = self.front - depth
        parts = dict(self.particles)
        for x in range(self.tail.boundary, cutoff - 1, -1):
            for i in range(1, self.tail.eta(x) + 1):
                parts[(x, i)] = x
        new_tail = None
        if not isinstance(self.tail.law, ZeroTail):
            new_tail = replace(self.tail, boundary=cutoff - 1)
        return ParticleConfiguration(self.front, parts, self.particles_per_site, new_tail)


def standard_config(kind: str, u: int, a: int = 1) -> ParticleConfiguration:
    """The three reference initial conditions anchored at site u.

    ``delta``: one particle at u.  ``a_delta``: a particles at u.  ``I``: a
    particles at every site x <= u, materialized lazily.
    """
    if a < 1:
        raise ValueError("a must be >= 1")
    if kind == "delta":
        return ParticleConfiguration(u, {(u, 1): u}, a)
    if kind == "a_delta":
        return ParticleConfiguration(u, {(u, i): u for i in range(1, a + 1)}, a)
    if kind == "I":
        tail = LazyLeftTail(boundary=u - 1, origin=u, law=ConstantTail(a))
        return ParticleConfiguration(u, {(u, i): u for i in range(1, a + 1)}, a, tail)
    raise ValueError(f"unknown standard configuration {kind!r}")


def from_profile(profile: EtaProfile, a: int = 1, front: int = 0) -> ParticleConfiguration:
    """Configuration with the profile's table materialized and its law kept lazy."""
    parts = {}
    for d in range(profile.span() + 1):
        x = front - d
        for i in range(1, profile.counts[d] + 1):
            parts[(x, i)] = x
    tail = None
    if not isinstance(profile.tail, ZeroTail):
        tail = LazyLeftTail(boundary=front - profile.span() - 1, origin=front,
                            law=profile.tail)
    return ParticleConfiguration(front, parts, a, tail)


def oplus(w: ParticleConfiguration, q: int) -> ParticleConfiguration:
    """Advance the front by q sites, seeding a fresh particles at each new site."""
    if q < 1:
        raise ValueError("q must be >= 1")
    parts = dict(w.particles)
    a = w.particles_per_site
    for x in range(w.front + 1, w.front + q + 1):
        for i in range(1, a + 1):
            parts[(x, i)] = x
    return ParticleConfiguration(w.front + q, parts, a, w.tail)


# ---------------------------------------------------------------------------
# functionals


def front_weight(w: ParticleConfiguration, theta: float) -> float:
    """Sum over particles of exp(theta * (position - front)).

    Divergence (a lazy tail violating the growth condition) raises rather
    than silently truncating.
    """
    if theta <= 0:
        raise ValueError("tilt must be > 0")
    total = 0.0
    for pos in w.particles.values():
        total += math.exp(theta * (pos - w.front))
    if w.tail is not None:
        total += _tail_weight(w, w.tail.boundary, theta)
    return total


def left_weight(w: ParticleConfiguration, z: int, theta: float) -> float:
    """Same weighted sum restricted to particles with birth site <= z."""
    if theta <= 0:
        raise ValueError("tilt must be > 0")
    total = 0.0
    for (site, _), pos in w.particles.items():
        if site <= z:
            total += math.exp(theta * (pos - w.front))
    if w.tail is not None:
        total += _tail_weight(w, min(z, w.tail.boundary), theta)
    return total


def _tail_weight(w: ParticleConfiguration, upto: int, theta: float) -> float:
    """Weight of lazy-tail particles on sites <= upto (each sits at its site)."""
    tail = w.tail
    start_depth = tail.origin - min(upto, tail.boundary)
    helper = EtaProfile((0,), tail.law)
    return math.exp(theta * (tail.origin - w.front)) * helper.tilted_tail_sum(
        start_depth, theta)


def window_count(w: ParticleConfiguration, z1: int, z2: int) -> int:
    """Particles born in (z1, z2] currently positioned in [z1+1, z2]."""
    if z1 >= z2:
        raise ValueError("need z1 < z2")
    n = 0
    for (site, _), pos in w.particles.items():
        if z1 + 1 <= site <= z2 and z1 + 1 <= pos <= z2:
            n += 1
    if w.tail is not None:
        for x in range(z1 + 1, min(z2, w.tail.boundary) + 1):
            n += w.tail.eta(x)
    return n


def cumulative_count(w: ParticleConfiguration, x: int) -> int:
    """Total particles currently on sites x..0 for a front at 0."""
    if w.front != 0:
        raise ValueError("cumulative count is defined for front at 0")
    if x > 0:
        raise ValueError("x must be <= 0")
    total = sum(1 for pos in w.particles.values() if x <= pos <= 0)
    if w.tail is not None:
        for s in range(x, min(0, w.tail.boundary) + 1):
            total += w.tail.eta(s)
    return total


# ---------------------------------------------------------------------------
# text round-trip


def to_text(w: ParticleConfiguration) -> str:
    """Plain-text form: headers, then one `site index position` line per particle."""
    lines = [f"front={w.front}", f"a={w.particles_per_site}"]
    if w.tail is None:
        lines.append("tail=none")
    else:
        lines.append(f"tail={w.tail.law.spec()} boundary={w.tail.boundary} "
                     f"origin={w.tail.origin}")
    for (site, idx) in sorted(w.particles):
        lines.append(f"{site} {idx} {w.particles[(site, idx)]}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> ParticleConfiguration:
    front = None
    a = 1
    tail = None
    particles = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("front="):
            front = int(line[6:])
        elif line.startswith("a="):
            a = int(line[2:])
        elif line.startswith("tail="):
            body = line[5:]
            if body == "none":
                tail = None
            else:
                spec, boundary_part, origin_part = body.rsplit(" ", 2)
                tail = LazyLeftTail(
                    boundary=int(boundary_part.split("=")[1]),
                    origin=int(origin_part.split("=")[1]),
                    law=tail_from_spec(spec),
                )
        else:
            site_s, idx_s, pos_s = line.split()
            particles[(int(site_s), int(idx_s))] = int(pos_s)
    if front is None:
        raise ValueError("missing front header")
    return ParticleConfiguration(front, particles, a, tail)
