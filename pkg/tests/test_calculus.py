from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from martrep import arith
from martrep.calculus import (
    BracketMeasure,
    classify_time,
    compensated_occurrence,
    compensator_of_occurrence,
    covariation,
    doob_decomposition,
    enveloping_compensator,
    is_martingale,
    law_from_compensator,
    mass_outside,
    mutually_singular,
    predictable_support,
    sharp_bracket,
    strongly_orthogonal,
    yoeurp_check,
    yoeurp_parts,
)
from martrep.errors import ContractError
from martrep.finite_space import ProcessTable
from martrep.models import random_tau_space, two_generator_model
from martrep.laws import RandomTimeLaw

import oracle

GRID = (0, 1, 2)


def _col(X, k):
    return list(X.values[:, k])


def test_compensated_default_matches_brute_force(m2_model, m2_joint):
    P = m2_model.measureP
    A = compensator_of_occurrence(m2_model.tau, m2_model.filtH, P)
    assert _col(A, 1) == [F(2, 5)] * 4
    H = compensated_occurrence(m2_model.tau, m2_model.filtH, P)
    law = oracle.marginal(m2_joint, 1)
    for a, (_, t) in enumerate(m2_joint):
        assert list(H.values[a]) == oracle.compensated(t, law, GRID)
    assert _col(H, 2) == [F(3, 5), F(-2, 5), F(3, 5), F(-2, 5)]
    assert is_martingale(H, m2_model.filtH, P)


def test_doob_decomposition_reassembles(m2_model):
    P = m2_model.measureP
    X = m2_model.tau.occurrence()
    M, A = doob_decomposition(X, m2_model.G, P)
    assert arith.all_close(M.values + A.values + X.values[:, :1], X.values, True)
    assert is_martingale(M, m2_model.G, P)
    # a martingale has a zero compensator
    M2, A2 = doob_decomposition(M, m2_model.G, P)
    assert arith.all_zero(A2.values, True)
    assert arith.all_close(M2.values, M.values, True)


def test_doob_rejects_non_adapted(m2_model):
    with pytest.raises(ContractError):
        doob_decomposition(m2_model.tau.occurrence(), m2_model.filtF, m2_model.measureP)


def test_sharp_brackets_of_m2(m2_model):
    P = m2_model.measureP
    M, N = m2_model.martingale_M(), m2_model.martingale_N()
    bm = sharp_bracket(M, M, m2_model.filtF, P)
    bn = sharp_bracket(N, N, m2_model.filtH, P)
    assert _col(bm, 1) == [F(21, 100)] * 4
    assert _col(bn, 1) == [F(6, 25)] * 4
    # both hazards are 1 at t = 2: no further mass
    assert _col(bm, 2) == _col(bm, 1) and _col(bn, 2) == _col(bn, 1)


def test_enveloping_compensator_jump_mass(m2_model):
    P = m2_model.measureP
    N = m2_model.martingale_N()
    B = enveloping_compensator(covariation(N, N), m2_model.filtH, P)
    assert _col(B, 1) == [F(6, 25)] * 4


def test_enveloping_compensator_rejects_decreasing(m2_model):
    X = m2_model.martingale_N()
    with pytest.raises(ContractError):
        enveloping_compensator(X, m2_model.filtH, m2_model.measureP)


@pytest.mark.parametrize("exact", [True, False])
def test_enveloping_matches_doob_on_fuzzed_laws(exact):
    rng = np.random.default_rng(11)
    for _ in range(120):
        space, tau, H, P = random_tau_space(rng, exact)
        N = compensated_occurrence(tau, H, P)
        C = covariation(N, N)
        B = enveloping_compensator(C, H, P)
        _, A = doob_decomposition(C, H, P)
        assert arith.all_close(B.values, A.values, exact, 1e-12)


def test_covariation_is_pathwise(m2_model, m2_joint):
    MN = covariation(m2_model.martingale_M(), m2_model.martingale_N())
    want = oracle.covariation(m2_joint, GRID)
    for a, key in enumerate(m2_joint):
        assert list(MN.values[a]) == want[key]
    assert _col(MN, 1) == [F(21, 50), F(-7, 25), F(-9, 50), F(3, 25)]


def test_covariation_does_not_depend_on_measure(m2_model):
    M, N = m2_model.martingale_M(), m2_model.martingale_N()
    a = covariation(M.as_float(), N.as_float()).values
    other = m2_model.with_measure(m2_model.measureP.renamed("P")).space
    assert other is not None
    b = covariation(M.as_float(), N.as_float()).values
    assert a.tobytes() == b.tobytes()


@st.composite
def _paths(draw):
    rows = draw(st.integers(1, 4))
    cols = draw(st.integers(2, 5))
    vals = st.lists(st.lists(st.integers(-6, 6), min_size=cols, max_size=cols), min_size=rows, max_size=rows)
    return [np.array([[F(v) for v in r] for r in draw(vals)], dtype=object) for _ in range(3)]


@given(_paths())
@settings(max_examples=50, deadline=None)
def test_covariation_symmetric_bilinear(xyz):
    X, Y, Z = (ProcessTable(v) for v in xyz)
    assert list(covariation(X, Y).values.flat) == list(covariation(Y, X).values.flat)
    lhs = covariation(X, Y + Z).values
    rhs = covariation(X, Y).values + covariation(X, Z).values
    assert list(lhs.flat) == list(rhs.flat)
    # [X, X] is increasing from 0
    XX = covariation(X, X).values
    assert all(v == 0 for v in XX[:, 0])
    assert all(XX[i, k] >= XX[i, k - 1] for i in range(XX.shape[0]) for k in range(1, XX.shape[1]))


def test_m2_brackets_not_singular(m2_model):
    sp, P = m2_model.space, m2_model.measureP
    bm = BracketMeasure.from_process(sharp_bracket(m2_model.martingale_M(), m2_model.martingale_M(),
                                                   m2_model.filtF, P), sp, P)
    bn = BracketMeasure.from_process(sharp_bracket(m2_model.martingale_N(), m2_model.martingale_N(),
                                                   m2_model.filtH, P), sp, P)
    res = mutually_singular(bm, bn, m2_model.filtF, P, sp.grid)
    assert not res.singular
    assert res.witness[1] == 1


def _staggered():
    # eta can only occur at 1, tau only at 2; independent
    inf = float("inf")
    joint = {(e, t): pe * pt for e, pe in ((1, F(1, 2)), (inf, F(1, 2))) for t, pt in ((2, F(1, 3)), (inf, F(2, 3)))}
    return two_generator_model(joint, GRID, True, "staggered")


def test_singular_brackets_have_disjoint_predictable_supports():
    m = _staggered()
    sp, P = m.space, m.measureP
    M, N = m.martingale_M(), m.martingale_N()
    bm = BracketMeasure.from_process(sharp_bracket(M, M, m.filtF, P), sp, P)
    bn = BracketMeasure.from_process(sharp_bracket(N, N, m.filtH, P), sp, P)
    res = mutually_singular(bm, bn, m.filtF, P, sp.grid)
    assert res.singular
    CA, CB = res.sets
    assert not np.any(CA.member & CB.member)
    assert CA.is_predictable(m.filtF)
    A = ProcessTable(bm.cumulative(sp.grid))
    assert arith.all_zero(mass_outside(A, CA), True)
    assert strongly_orthogonal(M, N, m.G, P)


def test_predictable_support_of_compensator(m2_model):
    A = compensator_of_occurrence(m2_model.tau, m2_model.filtH, m2_model.measureP)
    C = predictable_support(A, m2_model.filtH, m2_model.measureP)
    # mass at t_1 everywhere, at t_2 only where tau has not occurred
    assert C.section(0, GRID) == {1}
    assert C.section(1, GRID) == {1, 2}


def test_classify_time_finite_and_law(m2_model):
    d = classify_time(m2_model.tau, m2_model.filtH)
    assert [t for t, _ in d.envelope] == [1, 2]
    assert np.all(d.totally_inaccessible.index == 3)
    law = RandomTimeLaw({1.0: 0.3, 2.0: 0.5}, 0.2, 4.0)
    d = classify_time(law)
    assert d.accessible.mass == pytest.approx(0.8)
    assert d.totally_inaccessible.mass == pytest.approx(0.2)
    with pytest.raises(ContractError):
        classify_time(m2_model.tau, None)


def test_yoeurp_finite_is_all_accessible(m2_model):
    M = m2_model.martingale_M()
    parts = yoeurp_parts(M, filt=m2_model.filtF, measure=m2_model.measureP)
    assert arith.all_zero(parts.continuous.values, True)
    assert arith.all_zero(parts.totally_inaccessible.values, True)
    assert yoeurp_check(parts, M, m2_model.filtF, m2_model.measureP)


@pytest.mark.parametrize("seed", range(5))
def test_law_from_compensator_recovers_law(seed):
    rng = np.random.default_rng(seed)
    for _ in range(30):
        space, tau, H, P = random_tau_space(rng, True)
        A = compensator_of_occurrence(tau, H, P)
        law = law_from_compensator(A, tau, P)
        counts = [P.prob(tau.index == k) for k in range(len(tau.grid) + 1)]
        assert law == counts
