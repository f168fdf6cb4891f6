import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hklab.experiments import (
    ExperimentSpec,
    consensus_probability,
    equilibration_scan,
    linear_critical_scan,
    sample_uniform,
    stability_probability,
    trial_stream,
    wilson_interval,
)
from hklab.numerics import PrecisionPolicy


def test_sample_deterministic_and_sorted():
    a = sample_uniform(50, 3.0, trial_stream(42, 0))
    b = sample_uniform(50, 3.0, trial_stream(42, 0))
    c = sample_uniform(50, 3.0, trial_stream(42, 1))
    assert a == b
    assert a != c
    assert list(a.opinions) == sorted(a.opinions)
    assert 0 <= a.opinions[0] and a.opinions[-1] <= 3.0


def test_sample_mean():
    x = sample_uniform(10_000, 1.0, trial_stream(7, 0))
    assert abs(np.mean(x.as_array()) - 0.5) < 0.02


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("nope")
    with pytest.raises(ValueError):
        ExperimentSpec("consensus-prob", trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec("consensus-prob", L=(0.0,))


@given(st.integers(min_value=1, max_value=500).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_wilson_contains_estimate(sn):
    s, n = sn
    lo, hi = wilson_interval(s, n)
    assert 0 <= lo <= s / n <= hi <= 1


def test_wilson_known_value():
    lo, hi = wilson_interval(5, 10)
    assert abs(lo - 0.2365931) < 1e-6 and abs(hi - 0.7634069) < 1e-6


def test_small_range_always_consensus():
    for seed in (0, 1, 99):
        res = consensus_probability(ExperimentSpec("consensus-prob", N=40, L=(0.9,), trials=5, seed=seed))
        assert res[0].estimate == 1.0
    res = stability_probability(ExperimentSpec("stability-prob", N=40, L=(0.9,), trials=5))
    assert res[0].estimate == 1.0


def test_single_trial_binary():
    res = consensus_probability(ExperimentSpec("consensus-prob", N=100, L=(5.0,), trials=1, seed=3))
    assert res[0].estimate in (0.0, 1.0)


def test_results_deterministic_and_parallel_invariant():
    spec = ExperimentSpec("consensus-prob", N=120, L=(3.0, 5.0, 7.0), trials=6, seed=5)
    a = consensus_probability(spec)
    b = consensus_probability(spec)
    c = consensus_probability(spec, workers=2)
    assert a == b == c


def test_undecided_reported():
    spec = ExperimentSpec("consensus-prob", N=200, L=(20.0,), trials=3, seed=1, horizon=1)
    res = consensus_probability(spec)[0]
    assert res.undecided == 3 and res.successes == 0


def test_equilibration_scan_small():
    rows = equilibration_scan([2, 6])
    assert (rows[0].N, rows[0].steps) == (2, 1)
    assert rows[1].steps == 6
    exact = equilibration_scan([6], PrecisionPolicy.exact())
    assert exact[0].steps == 6


def test_linear_scan_examples():
    v = linear_critical_scan([0.8, 3.0, 7.0], horizon=30)
    assert (v[0].verdict, v[0].step) == ("consensus", 1)
    assert v[1].verdict == "consensus"
    # first step of x = 3 alpha lands on the corner profile, range 2
    assert v[1].ranges[1] == pytest.approx(2.0, abs=1e-12)
    assert v[2].verdict == "persistent"
