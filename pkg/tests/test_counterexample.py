from fractions import Fraction

import pytest

from hklab.continuum import Profile, evaluate, profile_range, regularity_check
from hklab.counterexample import (
    DoubleSParams,
    PrecisionExhausted,
    agent_sets,
    antisymmetrize,
    build_double_s,
    chain_mean_bound,
    epsilon_guards,
    lemma_recursion,
    limit_mean_bound,
    mean_increment_bound,
    predicted_bounds,
    run_counterexample,
    verify_assumptions,
)
from hklab.numerics import PrecisionPolicy

F = Fraction
EPS = F(1, 100)
D = F(3, 2)
PARAMS = DoubleSParams(EPS, D)


def test_params_validation():
    with pytest.raises(ValueError):
        DoubleSParams(F(3, 10))
    with pytest.raises(ValueError):
        DoubleSParams(F(0))
    with pytest.raises(ValueError):
        DoubleSParams(EPS, F(2))
    assert PARAMS.domain_end == 2 + EPS**2 + 2 * EPS**4


def test_double_s_shape():
    p = build_double_s(PARAMS)
    assert regularity_check(p) == (EPS, D / EPS**4)
    assert profile_range(p) == 2 * D + 3 * EPS
    assert evaluate(p, PARAMS.center) == D + 3 * EPS / 2
    assert evaluate(p, F(1)) == EPS
    assert evaluate(p, 1 + EPS**4) == D + EPS
    assert evaluate(p, 1 + EPS**4 + EPS**2) == D + 2 * EPS


@pytest.mark.parametrize("eps", [F(1, 100), F(1, 20), F(1, 4)])
def test_double_s_antisymmetric(eps):
    prm = DoubleSParams(eps)
    p = build_double_s(prm)
    c, xc = prm.center, prm.center_value
    for a in p.alphas:
        assert evaluate(p, a) + evaluate(p, 2 * c - a) == 2 * xc


def test_agent_sets_initial():
    p = build_double_s(PARAMS)
    A0, B0, img = agent_sets(p, EPS)
    assert A0 == (0, 1 + EPS**5 / D)
    assert B0[0] >= 1 and B0[1] <= 1 + EPS**4
    assert img == (0, EPS)


def test_agent_sets_constant_zero():
    p = Profile.constant(0, (0, 3))
    A, B, _ = agent_sets(p, EPS)
    assert A == (0, 3)
    assert B is None


def test_initial_certificate():
    cert = verify_assumptions(build_double_s(PARAMS), PARAMS)
    assert all(cert.assumptions.values())
    assert cert.passed
    assert EPS - cert.A_mean == EPS / 2
    assert (cert.e_meas, cert.s_meas) == (EPS, D / EPS**4)


def test_violation_of_image_bound():
    # x(1) = 2 eps > eps breaks assumption III
    p = Profile.from_points([0, 1, 1 + EPS**4, 2 + 2 * EPS**4], [0, 2 * EPS, D + EPS, 2 * D + 3 * EPS])
    cert = verify_assumptions(p, PARAMS)
    assert cert.assumptions["III"] is False
    assert not cert.passed


def test_lemma_recursion_examples():
    e1, s1, b1 = lemma_recursion(EPS, D / EPS**4, EPS, D)
    assert (e1, s1, b1) == (2 * EPS**5 / D, D / (2 * EPS**4), 2 * EPS**4)
    e2, s2, _ = lemma_recursion(e1, s1, EPS, D)
    # growth factor eps / (2 e_1) = d / (4 eps^4)
    assert s2 / s1 == D / (4 * EPS**4)
    assert lemma_recursion(F(3), F(3), EPS, D) == (2, EPS / 2, 2 * D / EPS)
    with pytest.raises(ValueError):
        lemma_recursion(F(0), F(1), EPS, D)


def test_mean_increment_bound():
    assert mean_increment_bound(EPS**4) == 4 * EPS**4
    assert mean_increment_bound(0) == 0
    assert mean_increment_bound(2 * EPS**4) == 8 * EPS**4
    with pytest.raises(ValueError):
        mean_increment_bound(-1)


def test_limit_mean_bound():
    bound, ok = limit_mean_bound(EPS, D)
    assert ok
    assert bound < EPS - 2 * EPS**2
    bound, ok = limit_mean_bound(F(1, 4), D)
    assert not ok
    assert bound == F(4215, 24512)
    small = F(1, 10**6)
    b, ok = limit_mean_bound(small, D)
    assert ok and abs(b / small - F(1, 2)) < F(1, 10**10)


def test_chain_mean_bound():
    bound, ok = chain_mean_bound(EPS, D)
    assert ok
    assert bound > limit_mean_bound(EPS, D)[0]


def test_epsilon_guards():
    assert all(epsilon_guards(EPS).values())
    g = epsilon_guards(F(1, 5))
    assert g["center_gap"] is False
    g = epsilon_guards(F(1, 10))
    assert g["eps_le_tenth"] and g["eps_le_quarter"]
    # threshold (sqrt(13) - 3) / 4 = 0.15138...
    assert epsilon_guards(F(151, 1000))["center_gap"]
    assert not epsilon_guards(F(152, 1000))["center_gap"]


def test_predicted_bounds_shrink():
    pb = predicted_bounds(PARAMS, 5)
    assert pb[1][:2] == (2 * EPS**5 / D, D / (2 * EPS**4))
    # the first step halves s and doubles the |B| bound; afterwards both improve
    assert pb[1][1] == pb[0][1] / 2 and pb[1][2] == 2 * pb[0][2]
    for (e0, _, _), (e1, _, _) in zip(pb, pb[1:]):
        assert e1 < e0
    for (_, s0, b0), (_, s1, b1) in zip(pb[1:], pb[2:]):
        assert s1 > s0 and b1 < b0


def test_s_chain_iteration_bound():
    pb = predicted_bounds(PARAMS, 5)
    s1 = pb[1][1]
    for t in range(1, 6):
        assert pb[t][1] >= (D / (4 * EPS**4)) ** (t - 1) * s1


def test_precision_exhausted():
    with pytest.raises(PrecisionExhausted) as info:
        run_counterexample(PARAMS, 5, PrecisionPolicy.bigfloat(128))
    assert info.value.step == 4
    assert "precision exhausted" in str(info.value)


def test_certify_guards():
    with pytest.raises(ValueError):
        run_counterexample(DoubleSParams(F(1, 20)), 1, PrecisionPolicy.bigfloat(512))
    with pytest.raises(ValueError):
        run_counterexample(PARAMS, 1, PrecisionPolicy.f64())


def test_antisymmetrize_is_exact():
    p = Profile.from_points([0, F(1, 2), 1, F(3, 2), 2], [0, F(1, 3), 1, F(7, 4), 2])
    q, defect = antisymmetrize(p, F(1), F(1))
    assert defect == F(1, 24)
    for a in q.alphas:
        assert evaluate(q, a) + evaluate(q, 2 - a) == 2


@pytest.fixture(scope="module")
def one_step():
    return run_counterexample(PARAMS, 1, PrecisionPolicy.bigfloat(512))


def test_one_step_certificate(one_step):
    c0, c1 = one_step
    assert c0.passed and c1.passed
    assert c1.checks["A_grows"] and c1.checks["B_shrinks"]
    assert c1.A_interval[0] <= c0.A_interval[0] and c1.A_interval[1] >= c0.A_interval[1]
    assert c1.B_interval[0] >= c0.B_interval[0] and c1.B_interval[1] <= c0.B_interval[1]


def test_one_step_matches_first_bounds(one_step):
    c1 = one_step[1]
    pol = PrecisionPolicy.bigfloat(512)
    with pol.context():
        assert c1.e_meas <= pol.scalar(2 * EPS**5 / D)
        assert c1.s_meas >= pol.scalar(D / (2 * EPS**4))
        assert c1.range > 2
        assert 0 <= c1.A_mean - one_step[0].A_mean <= 4 * pol.scalar(EPS**4)


def test_exploratory_f64_keeps_range():
    certs = run_counterexample(DoubleSParams(F(1, 20)), 15, PrecisionPolicy.f64(), certify=False)
    assert len(certs) == 16
    assert all(c.range > 2 for c in certs)
    assert certs[0].passed
    assert certs[-1].advisory
