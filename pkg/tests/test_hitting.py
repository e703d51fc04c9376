import math

import pytest

from frontprop import analytics, hitting as ht, simulator as sim
from frontprop.configuration import ParticleConfiguration, standard_config
from frontprop.randomness import RandomField
from frontprop.stats import wilson_interval


def test_walk_hit_first_step():
    # when the first uniform points right, the passage to start+1 is tau_1
    found = 0
    for s in range(40):
        field = RandomField(100 + s)
        stream = field.stream(0, 1)
        res = ht.walk_hit(field, (0, 1), 0.0, 0, 1)
        if stream.uniform(1) <= 0.5:
            assert res.hit and res.steps == 1
            assert res.time == stream.clock(1)
            found += 1
    assert found > 5


def test_walk_hit_cap():
    field = RandomField(11)
    stream = field.stream(0, 1)
    # force a two-step situation: first step left means cap 1 cannot reach +1
    for s in range(200):
        field = RandomField(s)
        if field.stream(0, 1).uniform(1) > 0.5:
            res = ht.walk_hit(field, (0, 1), 0.0, 0, 1, cap=1)
            assert not res.hit and res.time is None and res.elapsed > 0
            break
    else:
        pytest.fail("no left-starting seed found")


def test_walk_hit_time_budget():
    field = RandomField(7)
    res = ht.walk_hit(field, (0, 1), 0.0, 0, 50, max_time=1.0)
    assert not res.hit and res.elapsed > 1.0


def test_single_walk_hit_probability_matches_reflection():
    # P(hit +1 by t) = 1 - stay_below(t, 1), Monte Carlo at 3 sigma
    t = 1.0
    hits = 0
    n = 20000
    for s in range(n):
        res = ht.walk_hit(RandomField(50_000 + s), (0, 1), 0.0, 0, 1,
                          max_time=t)
        hits += res.hit and res.time <= t
    want = 1.0 - analytics.stay_below_prob(t, 1)
    se = math.sqrt(want * (1 - want) / n)
    assert abs(hits / n - want) < 3 * se


def test_oracle_matches_simulation():
    configs = [standard_config("delta", 0, 1),
               standard_config("a_delta", 0, 2),
               ParticleConfiguration(0, {(0, 1): 0, (-1, 1): -1, (-2, 1): -1}, 1)]
    for s in range(60):
        field = RandomField(140_000 + s)
        for w in configs:
            for u in (1, 4):
                t_sim = ht.simulated_T(w, u, 0.0, field)
                oracle = ht.chain_oracle(w, u, 0.0, field)
                assert oracle.certified
                assert abs(oracle.time - t_sim) < 1e-9


def test_oracle_min_over_single_particles():
    w = ParticleConfiguration(0, {(0, 1): 0, (-1, 1): -1, (-3, 1): -2}, 1)
    for s in range(30):
        field = RandomField(9_000 + s)
        whole = ht.chain_oracle(w, 3, 0.0, field).time
        parts = [ht.chain_oracle(w.single_particle(*key), 3, 0.0, field).time
                 for key in w.particles]
        assert abs(whole - min(parts)) < 1e-12


def test_hitting_monotone_in_bias():
    w = standard_config("delta", 0, 1)
    for s in range(40):
        field = RandomField(17_000 + s)
        ts = [ht.simulated_T(w, 4, e, field) for e in (0.0, 0.1, 0.25)]
        assert ts[0] >= ts[1] >= ts[2]


def test_hitting_monotone_in_target():
    field = RandomField(3)
    tr = sim.run(standard_config("delta", 0, 1), 0.0, field, t_max=60.0)
    times = [tr.hitting_time(u) for u in range(1, tr.front + 1)]
    assert all(b > a for a, b in zip(times, times[1:]))


def test_subadditivity_pathwise():
    w = standard_config("a_delta", 0, 2)
    for s in range(150):
        ok, *_ = ht.subadditivity_check(w, 3, 6, 0.0, RandomField(77_000 + s))
        assert ok


def test_event_inclusion_pathwise():
    for s in range(200):
        ok, premise, _ = ht.event_subadditivity_check(4, 4, 1.0, 1.0, 0.0,
                                                      RandomField(88_000 + s))
        assert ok


def test_truncated_variant_stationary():
    w = standard_config("a_delta", 0, 2)
    for s in (1, 5, 11):
        field = RandomField(600 + s)
        vals = [ht.truncated_T(w, 3, K, 0.0, field).time
                for K in (1, 2, 4, 8, 16, 64, 256)]
        finite = [v for v in vals if math.isfinite(v)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
        full = ht.chain_oracle(w, 3, 0.0, field).time
        assert vals[-1] == pytest.approx(full, abs=1e-12)


def test_truncated_empty_source_is_flagged():
    w = ParticleConfiguration(0, {(-5, 1): -5}, 1)
    res = ht.truncated_T(w, 2, 1, 0.0, RandomField(1))
    assert not res.hit and res.time == math.inf


def test_chain_source_window_constraint():
    # interior sites must be strictly increasing: a chain cannot reuse a site
    field = RandomField(42)
    w = standard_config("delta", 0, 1)
    res = ht.chain_infimum([ht.ChainSource((0, 1), 0)], 0, 2, 1, 0.0, field)
    assert res.certified and res.hit
    direct = ht.walk_hit(field, (0, 1), 0.0, 0, 2).time
    via = (ht.walk_hit(field, (0, 1), 0.0, 0, 1).time
           + ht.walk_hit(field, (1, 1), 0.0, 1, 2).time)
    assert res.time == pytest.approx(min(direct, via), abs=1e-12)
