import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy.integrate import quad

from martrep.errors import AssumptionError, ContractError, StructuralError
from martrep.laws import (
    DENSITY,
    MixedModel,
    RandomTimeLaw,
    exact_triplet,
    g_compensator_atoms,
    mixed_from_document,
    mixed_multiplicity,
    mixed_to_document,
    mixed_yoeurp_parts,
)
from martrep.models import MIXED_PRESETS, mixed_preset
from martrep.representation import classify_multiplicity

T_GRID = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0])


def _scenarios(model):
    eta = np.array([c[0] for c in model.cells])
    tau = np.array([3.3 if c[1] == DENSITY else c[1] for c in model.cells])
    atom = np.array([c[1] != DENSITY for c in model.cells])
    return eta, tau, atom


def _example_quantities():
    # eta law (0.3, 0.4, 0.3); P(tau=2 | eta=1) = 0.2, otherwise 0.6
    p_eta1 = 0.3
    p_eta2_given_not1 = 0.4 / 0.7
    p_tau2 = 0.3 * 0.2 + 0.7 * 0.6
    return p_eta1, p_eta2_given_not1, p_tau2


def test_m_matches_worked_example():
    m = mixed_preset("equal-hazard")
    ev = exact_triplet(m)
    eta, tau, atom = _scenarios(m)
    W = np.tile(np.linspace(-1, 1, len(T_GRID)), (len(eta), 1))
    got = ev.M(eta, W, T_GRID)
    p1, p2, _ = _example_quantities()
    for i, e in enumerate(eta):
        cond2 = 0.0 if e == 1 else p2
        for j, t in enumerate(T_GRID):
            want = W[i, j] + (e <= t) - p1 * (1 <= t) - cond2 * (2 <= t) - (e == 3) * (3 <= t)
            assert got[i, j] == pytest.approx(want, abs=1e-12)


def test_hprime_matches_worked_example():
    m = mixed_preset("equal-hazard")
    ev = exact_triplet(m)
    eta, tau, atom = _scenarios(m)
    got = ev.Hprime(eta, tau, atom, T_GRID)
    for i, (e, t0) in enumerate(zip(eta, tau)):
        p = 0.2 if e == 1 else 0.6
        for j, t in enumerate(T_GRID):
            want = (t0 <= t) - p * (2 <= t) - (t0 == 4) * (4 <= t)
            assert got[i, j] == pytest.approx(want, abs=1e-12)


def test_covariation_matches_worked_example():
    m = mixed_preset("equal-hazard")
    ev = exact_triplet(m)
    eta, tau, atom = _scenarios(m)
    got = ev.MH(eta, tau, atom, T_GRID)
    _, p2, pt2 = _example_quantities()
    for i, (e, t0) in enumerate(zip(eta, tau)):
        c2 = 0.0 if e == 1 else p2
        val = (t0 == 2 and e == 2) - pt2 * (e == 2) - (t0 == 2) * c2 + pt2 * c2
        for j, t in enumerate(T_GRID):
            assert got[i, j] == pytest.approx(val * (2 <= t), abs=1e-12)


def _brute_density_compensator(joint, horizon, eta, tau, t):
    """Integral of the density intensity of tau given the running eta-information,
    plus hazards at atoms, from the joint law directly."""
    def info(s):
        return [k for k in joint if (k[0] == eta if eta < s else k[0] >= s)]

    def ge(keys, s):
        out = 0.0
        for k in keys:
            if k[1] == DENSITY:
                out += joint[k] * max(0.0, 1 - s / horizon)
            elif k[1] >= s:
                out += joint[k]
        return out

    def rate(s):
        keys = info(s)
        rho = sum(joint[k] for k in keys if k[1] == DENSITY)
        den = ge(keys, s)
        return rho / horizon / den if den > 0 else 0.0

    end = min(t, tau)
    atoms = sorted({k[1] for k in joint if k[1] != DENSITY} | {k[0] for k in joint if not math.isinf(k[0])})
    total, _ = quad(rate, 0, end, points=[a for a in atoms if a < end], limit=200)
    for a in sorted({k[1] for k in joint if k[1] != DENSITY}):
        if a <= end:
            keys = info(a)
            den = ge(keys, a)
            total += sum(joint[k] for k in keys if k[1] == a) / den if den > 0 else 0.0
    return total


@pytest.mark.parametrize("name", ["equal-hazard-density", "density-tau", "verdict2"])
def test_g_compensator_against_numerical_integration(name):
    m = mixed_preset(name)
    joint = {(e, t): p for e, t, p in m.cells}
    ev = exact_triplet(m)
    for e, t0 in [(e, t) for e, t, _ in m.cells]:
        for tau_val, is_atom in ([(t0, True)] if t0 != DENSITY else [(0.7, False), (2.5, False), (3.9, False)]):
            got = ev.A_G(np.array([e]), np.array([tau_val]), np.array([is_atom]), T_GRID)[0]
            for j, t in enumerate(T_GRID):
                want = _brute_density_compensator(joint, m.horizon, e, tau_val, t)
                assert got[j] == pytest.approx(want, abs=1e-9), (e, tau_val, t)


def test_density_time_compensator_is_log_survival():
    m = mixed_preset("density-tau")
    ev = exact_triplet(m)
    tau = np.array([2.5, 4.0])
    A = ev.A_H(tau, np.array([False, False]), T_GRID)
    for i, t0 in enumerate(tau):
        s = np.minimum(T_GRID, t0)
        want = -np.log(np.clip(1 - s / 4.0, 1e-300, None))
        finite = s < 4.0
        assert np.allclose(A[i, finite], want[finite], atol=1e-12)


def test_density_time_stays_inaccessible_after_enlargement():
    m = mixed_preset("density-tau")
    assert g_compensator_atoms(m) == set()
    ev = exact_triplet(m)
    fine = np.linspace(0, 3.9, 3901)
    eta = np.array([1.0, 2.0, 3.0])
    A = ev.A_G(eta, np.full(3, 3.95), np.zeros(3, bool), fine)
    assert np.max(np.abs(np.diff(A, axis=1))) < 1e-2
    # no simultaneous jumps: [M,H] vanishes
    assert np.all(ev.MH(eta, np.full(3, 2.0), np.zeros(3, bool), T_GRID) == 0)


def test_density_part_leaves_covariation_jump_times_unchanged():
    a = mixed_preset("equal-hazard")
    b = mixed_preset("equal-hazard-density")
    assert g_compensator_atoms(a) == g_compensator_atoms(b) == {2.0, 4.0}
    eta, tau, atom = _scenarios(b)
    mh = exact_triplet(b).MH(eta, tau, atom, T_GRID)
    jumps = {float(T_GRID[j]) for j in range(1, len(T_GRID)) if np.any(mh[:, j] != mh[:, j - 1])}
    assert jumps == {2.0}


@pytest.mark.parametrize("name,want", [("equal-hazard", 3), ("unequal-hazard", 3), ("equal-hazard-density", 3),
                                       ("verdict1", 1), ("verdict2", 2), ("density-tau", 2)])
def test_mixed_verdicts(name, want):
    m = mixed_preset(name)
    assert mixed_multiplicity(m).multiplicity == want
    r = classify_multiplicity(m)
    assert r.verdict == want


def test_verdict2_is_witnessed_by_accessible_parts():
    r = classify_multiplicity(mixed_preset("verdict2"))
    assert not r.total.singular
    assert r.total.witness[1] == "lebesgue"
    assert r.accessible.singular


def test_mixed_classifier_refuses_without_rectangle():
    m = MixedModel({(1.0, 2.0): 0.5, (2.0, 4.0): 0.5}, 4.0, 1e-3)
    assert m.is_rectangular() == (False, (1.0, 4.0))
    with pytest.raises(AssumptionError):
        classify_multiplicity(m)


def test_yoeurp_parts_of_density_default():
    m = mixed_preset("equal-hazard-density")
    parts = mixed_yoeurp_parts(m, "H")
    eta, tau, atom = _scenarios(m)
    W = np.zeros((len(eta), len(T_GRID)))
    total = sum(f(eta, tau, atom, W, T_GRID) for f in (parts.continuous, parts.accessible,
                                                       parts.totally_inaccessible))
    assert np.allclose(total, exact_triplet(m).H(tau, atom, T_GRID), atol=1e-12)
    # across t = 2 the accessible part jumps and the inaccessible one only drifts by O(dt)
    t = np.array([2.0 - 1e-6, 2.0])
    W2 = np.zeros((len(eta), 2))
    inacc = parts.totally_inaccessible(eta, tau, atom, W2, t)
    acc = parts.accessible(eta, tau, atom, W2, t)
    assert np.max(np.abs(np.diff(inacc, axis=1))) < 1e-5
    assert np.max(np.abs(np.diff(acc, axis=1))) > 0.1
    with pytest.raises(ContractError):
        mixed_yoeurp_parts(m, "Z")


def test_random_time_law_validation():
    with pytest.raises(ContractError):
        RandomTimeLaw({1.0: 0.5}, 0.2, 2.0)
    with pytest.raises(ContractError):
        RandomTimeLaw({3.0: 1.0}, 0.0, 2.0)
    law = RandomTimeLaw({1.0: 0.5}, 0.5, 2.0)
    assert not law.is_atomic()
    assert law.density_part().support == (0.0, 2.0)


def test_mixed_model_validation():
    with pytest.raises(ContractError):
        MixedModel({(1.0005, 2.0): 1.0}, 4.0, 1e-3 * 2)
    with pytest.raises(ContractError):
        MixedModel({(1.0, 5.0): 1.0}, 4.0)
    with pytest.raises(ContractError):
        MixedModel({(1.0, 2.0): 0.5}, 4.0)


@pytest.mark.parametrize("name", sorted(MIXED_PRESETS))
def test_mixed_document_round_trip(name):
    m = mixed_preset(name)
    back = mixed_from_document(mixed_to_document(m))
    assert back.cells == m.cells
    assert back.horizon == m.horizon and back.dt == m.dt


def test_mixed_document_errors():
    with pytest.raises(StructuralError) as ei:
        mixed_from_document({"schema": "martrep.mixed/1", "joint": [[1, 2]]})
    assert ei.value.path == "joint[0]"
    with pytest.raises(StructuralError):
        mixed_from_document({"schema": "other"})
    doc = {"schema": "martrep.mixed/1", "joint": [[1, 2, "1/2"], ["inf", "density", "1/2"]]}
    m = mixed_from_document(doc)
    assert m.density_mass == pytest.approx(0.5)
    assert m.eta_values == [1.0, math.inf]
