from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hklab.discrete import (
    Cluster,
    ClusterSet,
    OpinionConfig,
    extract_clusters,
    hk_step,
    hk_step_naive,
    is_connected,
    is_equilibrium,
    is_stable,
    make_equidistant,
    neighborhood_window,
    receptivity_edges,
    run_to_equilibrium,
)
from hklab.numerics import PrecisionPolicy

EXACT = PrecisionPolicy.exact()
F64 = PrecisionPolicy.f64()

UNEVEN = [-1] * 98 + [0, 1]


def cfg(values, policy=EXACT):
    return OpinionConfig.from_values(values, policy)


def test_config_rejects_unsorted():
    with pytest.raises(ValueError):
        cfg([2, 1])
    with pytest.raises(ValueError):
        OpinionConfig(())


def test_window_closed_boundary():
    c = cfg([0, 1, 2])
    assert neighborhood_window(c, 0) == (0, 1)
    assert neighborhood_window(c, 1) == (0, 2)
    assert neighborhood_window(c, 2) == (1, 2)


def test_window_index_error():
    with pytest.raises(IndexError):
        neighborhood_window(cfg([0, 1]), 5)


def test_step_equidistant_three():
    assert hk_step(cfg([1, 2, 3])).opinions == (Fraction(3, 2), Fraction(2), Fraction(5, 2))


def test_step_pair_merges():
    assert hk_step(cfg([0, 1])).opinions == (Fraction(1, 2), Fraction(1, 2))


def test_uneven_first_step():
    nxt = hk_step(cfg(UNEVEN)).opinions
    assert all(x == Fraction(-98, 99) for x in nxt[:98])
    assert nxt[98] == Fraction(-97, 100)
    assert nxt[99] == Fraction(1, 2)


def test_e6_clusters_exact():
    res = run_to_equilibrium(make_equidistant(6))
    assert res.reached_equilibrium
    assert res.steps == 6
    cs = extract_clusters(res.final)
    assert cs.centers == [Fraction(4613, 1728), Fraction(7483, 1728)]
    assert cs.weights == [3, 3]


def test_e6_f64_matches_rounded_exact():
    res = run_to_equilibrium(make_equidistant(6, F64))
    cs = extract_clusters(res.final)
    assert cs.centers == [float(Fraction(4613, 1728)), float(Fraction(7483, 1728))]


def test_e6_bigfloat():
    pol = PrecisionPolicy.bigfloat(256)
    res = run_to_equilibrium(make_equidistant(6, pol))
    cs = extract_clusters(res.final)
    assert cs.weights == [3, 3]
    assert abs(Fraction(*cs.centers[0].as_integer_ratio()) - Fraction(4613, 1728)) < Fraction(1, 2**240)


def test_equilibrium_predicate():
    assert is_equilibrium(cfg([0, Fraction(3, 2)]))
    assert not is_equilibrium(cfg([0, 1]))
    assert is_equilibrium(cfg([2, 2, 2]))


def test_equilibrium_is_fixed_point():
    c = cfg([0, 0, Fraction(11, 10), 5])
    assert hk_step(c) == c


def test_stability_rule():
    assert not is_stable(ClusterSet((Cluster(Fraction(0), 1), Cluster(Fraction(3, 2), 1))))
    assert is_stable(ClusterSet((Cluster(Fraction(0), 1), Cluster(Fraction(3, 2), 2))))
    assert is_stable(ClusterSet((Cluster(Fraction(0), 3), Cluster(Fraction(2), 3))))
    with pytest.raises(ValueError):
        is_stable(ClusterSet(()))


def test_e6_equilibrium_is_unstable():
    cs = extract_clusters(run_to_equilibrium(make_equidistant(6)).final)
    # gap 2870/1728 < 2 = 1 + 3/3
    assert not is_stable(cs)


def test_uneven_final_has_isolated_agent():
    res = run_to_equilibrium(cfg(UNEVEN))
    cs = extract_clusters(res.final)
    assert Cluster(Fraction(1, 2), 1) in cs.clusters


def test_single_agent_and_max_steps():
    res = run_to_equilibrium(cfg([5]))
    assert res.steps == 0 and res.reached_equilibrium
    res = run_to_equilibrium(make_equidistant(20), max_steps=2)
    assert res.steps == 2 and not res.reached_equilibrium


def test_trajectory_kept():
    res = run_to_equilibrium(make_equidistant(6), keep_trajectory=True)
    assert len(res.trajectory) == res.steps + 1
    assert res.trajectory[0] == make_equidistant(6)


def test_receptivity_graph():
    c = cfg([0, 1, 3])
    assert receptivity_edges(c) == [(0, 1)]
    assert not is_connected(c)
    assert is_connected(cfg([0, 1, 2]))


def test_merge_tol_defaults():
    c = cfg([0, Fraction(1, 10**20), 5])
    assert len(extract_clusters(c)) == 3
    f = OpinionConfig.from_values([0.0, 1e-13, 5.0], F64)
    assert len(extract_clusters(f)) == 2


# -- properties -----------------------------------------------------------------

small_fracs = st.fractions(min_value=-6, max_value=6, max_denominator=12)


@st.composite
def exact_configs(draw, max_n=40):
    vals = draw(st.lists(small_fracs, min_size=1, max_size=max_n))
    return cfg(sorted(vals))


@given(exact_configs())
def test_step_matches_naive(c):
    assert hk_step(c) == hk_step_naive(c)


@given(exact_configs())
def test_order_and_range(c):
    n = hk_step(c)
    assert all(a <= b for a, b in zip(n.opinions, n.opinions[1:]))
    assert n.spread() <= c.spread()
    assert n.opinions[0] >= c.opinions[0] and n.opinions[-1] <= c.opinions[-1]


@given(st.lists(st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=1, max_size=60))
def test_f64_step_matches_naive(vals):
    c = OpinionConfig.from_values(sorted(vals), F64)
    assert hk_step(c) == hk_step_naive(c)


@given(exact_configs(max_n=25))
def test_run_ends_in_equilibrium(c):
    res = run_to_equilibrium(c)
    assert res.reached_equilibrium
    assert is_equilibrium(res.final)
    assert hk_step(res.final) == res.final
