"""Keyed counter-based random streams indexed by particle birthplace.

Every random quantity in the system is a pure function of a 64-bit seed and
a stream key (site, particle index, event index, channel).  This gives O(1)
random access to the n-th clock or step of any walk, so the same randomness
can drive simulations at every bias value (exact monotone coupling) and
fresh independent copies can be requested per block for the decoupled
hitting-time construction.

The generator is a SplitMix64-style finalizer: the key fields are folded
into a 64-bit stream base through repeated avalanche mixing, and the n-th
draw of a stream is ``mix(base + n * GOLDEN)``.  Identical (seed, key) pairs
reproduce bit-identical values on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB
_FIELD_SALT = (0xD6E8FEB86659FD93, 0xA5A5B9E3779B97F4, 0xC2B2AE3D27D4EB4F)

CLOCK = 0
STEP = 1

BASE_FAMILY = 0


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
    return z ^ (z >> 31)


def _to_unit(z: int) -> float:
    # 53-bit mantissa, offset by half an ulp so the result lies strictly in (0, 1)
    return ((z >> 11) + 0.5) * 1.1102230246251565e-16


def fresh_family(block: int) -> int:
    """Family index of the independent stream copy attached to ``block``."""
    if block < 0:
        raise ValueError("block index must be >= 0")
    return block + 1


@dataclass(frozen=True)
class StreamKey:
    """Identity of a single random draw.

    ``kind`` selects the clock or step sub-stream; ``family`` selects the
    base family (0) or one of the independent per-block copies (>= 1).
    """

    seed: int
    site: int
    particle: int
    event: int
    kind: int
    family: int = BASE_FAMILY

    def __post_init__(self):
        if self.event < 1:
            raise ValueError("event index starts at 1")
        if self.kind not in (CLOCK, STEP):
            raise ValueError("kind must be CLOCK or STEP")
        if self.family < 0:
            raise ValueError("family must be >= 0")


class WalkStream:
    """Cached clock/step bases for one birthplace; draws are O(1) in the index."""

    __slots__ = ("clock_base", "step_base")

    def __init__(self, clock_base: int, step_base: int):
        self.clock_base = clock_base
        self.step_base = step_base

    def clock(self, n: int) -> float:
        """Waiting time before the n-th jump; Exponential(2), mean 1/2."""
        u = _to_unit(_mix64(self.clock_base + n * _GOLDEN))
        return -0.5 * math.log(u)

    def uniform(self, n: int) -> float:
        """Raw uniform in (0, 1) deciding the n-th step direction."""
        return _to_unit(_mix64(self.step_base + n * _GOLDEN))


class RandomField:
    """The full i.i.d. family of clocks and step uniforms, keyed by birthplace.

    Stateless after construction; all draws are pure functions of
    (seed, key), so a single field can be shared across replicas and bias
    values.
    """

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        if not 0 <= seed <= _MASK64:
            raise ValueError("seed must fit in 64 bits")
        self.seed = seed

    def _base(self, site: int, particle: int, kind: int, family: int) -> int:
        h = _mix64(self.seed ^ _GOLDEN)
        h = _mix64(h ^ ((site & _MASK64) * _FIELD_SALT[0]) & _MASK64)
        h = _mix64(h ^ ((particle & _MASK64) * _FIELD_SALT[1]) & _MASK64)
        h = _mix64(h ^ (((kind + 2 * family) & _MASK64) * _FIELD_SALT[2]) & _MASK64)
        return h

    def key(self, site: int, particle: int, event: int, kind: int,
            family: int = BASE_FAMILY) -> StreamKey:
        return StreamKey(self.seed, site, particle, event, kind, family)

    def draw(self, key: StreamKey) -> float:
        """Deterministic value of one draw: Exp(2) for clocks, U(0,1) for steps."""
        if key.seed != self.seed:
            raise ValueError("key was built for a different seed")
        base = self._base(key.site, key.particle, key.kind, key.family)
        u = _to_unit(_mix64(base + key.event * _GOLDEN))
        if key.kind == CLOCK:
            return -0.5 * math.log(u)
        return u

    def stream(self, site: int, particle: int, family: int = BASE_FAMILY) -> WalkStream:
        return WalkStream(
            self._base(site, particle, CLOCK, family),
            self._base(site, particle, STEP, family),
        )

    def uniforms(self, site: int, particle: int, events: np.ndarray,
                 kind: int = STEP, family: int = BASE_FAMILY) -> np.ndarray:
        """Vectorized draws of the raw uniforms for an array of event indices."""
        base = np.uint64(self._base(site, particle, kind, family))
        with np.errstate(over="ignore"):
            z = base + events.astype(np.uint64) * np.uint64(_GOLDEN)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
            z = z ^ (z >> np.uint64(31))
        return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 1.1102230246251565e-16


def step_sign(u: float, eps: float) -> int:
    """Step direction for threshold uniform ``u`` under right bias ``eps``.

    Returns +1 iff u <= 1/2 + eps, so the step is monotone in eps for a
    fixed uniform: raising the bias can only turn -1 steps into +1 steps.
    """
    if not 0.0 <= eps < 0.5:
        raise ValueError("bias must lie in [0, 1/2)")
    if not 0.0 < u < 1.0:
        raise ValueError("uniform must lie strictly in (0, 1)")
    return 1 if u <= 0.5 + eps else -1


@dataclass
class Trajectory:
    """A single walk path in its own relative frame: position 0 at time 0."""

    times: list
    positions: list
    exhausted: bool = False

    def position_at(self, t: float) -> int:
        """Piecewise-constant position just after the last jump at or before t."""
        if t < 0:
            raise ValueError("negative time")
        lo, hi = 0, len(self.times) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.times[mid] <= t:
                lo = mid
            else:
                hi = mid - 1
        return self.positions[lo]


def walk_path(field: RandomField, birthplace: tuple, eps: float,
              steps: int | None = None, t_max: float | None = None,
              family: int = BASE_FAMILY) -> Trajectory:
    """Trajectory of the walk born at ``birthplace``, relative to its start.

    The budget is a step count, a time horizon, or both; the ``exhausted``
    flag is set when a step budget ran out before the time horizon was
    reached.
    """
    if steps is None and t_max is None:
        raise ValueError("need a step or time budget")
    if steps is not None and steps < 0:
        raise ValueError("step budget must be >= 0")
    site, particle = birthplace
    if not 0.0 <= eps < 0.5:
        raise ValueError("bias must lie in [0, 1/2)")
    stream = field.stream(site, particle, family)
    thr = 0.5 + eps
    times = [0.0]
    positions = [0]
    t = 0.0
    pos = 0
    n = 0
    while True:
        if steps is not None and n >= steps:
            exhausted = t_max is not None and t < t_max
            return Trajectory(times, positions, exhausted)
        n += 1
        t += stream.clock(n)
        if t_max is not None and t > t_max:
            return Trajectory(times, positions, False)
        pos += 1 if stream.uniform(n) <= thr else -1
        times.append(t)
        positions.append(pos)
