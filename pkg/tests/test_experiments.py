import json
import math

import pytest

from frontprop import experiments as ex
from frontprop.configuration import ConstantTail, EtaProfile
from frontprop.randomness import RandomField
from frontprop.stats import prob_estimate


def test_reports_are_deterministic():
    r1 = ex.speed_suite([20.0, 40.0], [20, 20], seed=99, start="a_delta")
    r2 = ex.speed_suite([20.0, 40.0], [20, 20], seed=99, start="a_delta")
    assert r1.to_json() == r2.to_json()
    r3 = ex.speed_suite([20.0, 40.0], [20, 20], seed=100, start="a_delta")
    assert r3.to_json() != r1.to_json()


def test_parallel_matches_sequential():
    seq = ex.estimate_speed(0.0, 25.0, 24, seed=7, start="a_delta", n_jobs=1)
    par = ex.estimate_speed(0.0, 25.0, 24, seed=7, start="a_delta", n_jobs=2)
    assert seq[0] == par[0] and seq[2] == par[2]


def test_speed_continuity_coupling():
    rep = ex.speed_continuity(0.05, 30.0, 40, seed=3, start="a_delta")
    gap = rep.estimates["speed_gap"]
    assert rep.verdicts["gap nonnegative (coupling)"]
    assert gap["value"] >= 0.0


def test_hit_probability_bounded_runs():
    est = ex.hit_probability(1.2, 5, 300, seed=17)
    assert 0.0 < est.p < 1.0
    # impossible deadline: fewer than n jumps cannot cover n sites
    certain_miss = ex.hit_probability(1e-9, 5, 50, seed=21)
    assert certain_miss.censored and certain_miss.p == pytest.approx(3 / 50)


def test_rate_curve_zero_and_positive_regions():
    v_hat = 1.28
    rep = ex.rate_curves([0.9, 1.9], (6, 12), 4000, seed=5, v_hat=v_hat)
    sub = rep.estimates["I_b0.9"]
    sup = rep.estimates["I_b1.9"]
    assert not sub["censored"]
    assert sub["lo"] <= 0.03  # zero within the band below the speed
    assert sup["lo"] > 0.0  # strictly positive above the speed


def test_superadditivity_gap():
    rep = ex.superadditivity_gap(4, 4, 1.0, 1.0, 3000, seed=8)
    assert rep.verdicts["estimable"]
    assert rep.verdicts["superadditive within 2 widths"]


def test_kingman_curve_shape():
    rep = ex.kingman_curve([2, 4, 8, 16], 100, seed=31, v_hat=1.29, v_lo=1.25,
                           v_hi=1.33, n_jobs=2)
    assert rep.verdicts["nonincreasing within CI"]
    m2 = rep.estimates["T_per_site_m2"]["value"]
    m16 = rep.estimates["T_per_site_m16"]["value"]
    assert m16 <= m2
    assert rep.verdicts["limit consistent with 1/v"]


def test_window_probability_trend():
    # the central window event gets more likely as t grows
    probs = []
    for t in (10.0, 30.0, 60.0):
        rep = ex.window_events(0.0, 1.1, t, 90, seed=55, v_hat=1.28, n_jobs=2)
        assert rep.verdicts["inclusion holds pathwise"]
        probs.append(rep.estimates["P_window"]["value"])
    assert probs[-1] > probs[0]
    assert probs[-1] > 0.7


def test_slowdown_scaling_profiles():
    const = EtaProfile((1,), ConstantTail(1))
    rep = ex.slowdown_scaling(const, [100.0, 1000.0, 10000.0])
    assert 0.40 <= rep.fits["exponent"]["slope"] <= 0.60

    finite = EtaProfile((1, 1, 1))
    # finitely many walks: polynomial survival, the local slope decays
    pts = []
    for t in (1e2, 1e4, 1e6):
        from frontprop import analytics

        out = analytics.stand_still_product(finite, t)
        pts.append((math.log(t), math.log(-out.log_value)))
    slope_late = (pts[2][1] - pts[1][1]) / (pts[2][0] - pts[1][0])
    assert slope_late < 0.2


def test_sqrt_tail_sampler_matches_exact_tail():
    import numpy as np

    A, c = 1.0, 1.0
    field = RandomField(40)
    u = field.uniforms(0, 1, np.arange(1, 200_001))
    xs = ex.sqrt_tail_sample(A, c, u)
    for x0 in (1.0, 4.0, 9.0):
        want = A * math.exp(-c * math.sqrt(x0))
        got = float((xs >= x0).mean())
        se = math.sqrt(want * (1 - want) / len(xs))
        assert abs(got - want) < 4 * se
    mean = ex.sqrt_tail_mean(A, c)
    assert abs(mean - 2.0) < 1e-12
    assert abs(float(xs.mean()) - mean) < 0.1


def test_sqrt_tail_ld_precondition():
    rep = ex.sqrt_tail_ld(1.0, 1.0, 0.5, [1, 2, 4], 2000, seed=2)
    assert rep.verdicts == {"precondition f > mean": False}


def test_sqrt_tail_ld_fit():
    rep = ex.sqrt_tail_ld(1.0, 1.0, 4.0, [1, 2, 5, 10, 20, 40], 40_000, seed=12)
    assert rep.verdicts["slope negative"]
    assert rep.fits["decay"]["slope"] < 0


def test_window_events_inclusion():
    rep = ex.window_events(0.0, 1.05, 25.0, 120, seed=77, v_hat=1.28)
    assert rep.verdicts["inclusion holds pathwise"]
    assert rep.estimates["P_window"]["value"] > 0.3


def test_window_events_precondition():
    with pytest.raises(ValueError):
        ex.window_events(1.0, 0.5, 10.0, 10, seed=1, v_hat=1.28)


def test_ci_coverage_selftest():
    cov = ex.ci_coverage(1000, 400, 0.3, seed=123)
    assert 0.93 <= cov <= 0.97


def test_report_hash_stability():
    rep = ex.ExperimentReport("x", 5, {"a": 1})
    h1 = rep.config_hash()
    rep.add_estimate("v", 1.0)
    assert rep.config_hash() == h1
    blob = json.loads(rep.to_json())
    assert blob["config_hash"] == h1
