"""Property-based checks of structural invariants on generated models."""
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from martrep import arith
from martrep.calculus import (
    BracketMeasure,
    compensated_occurrence,
    compensator_of_occurrence,
    covariation,
    doob_decomposition,
    is_martingale,
    mass_outside,
    predictable_support,
    sharp_bracket,
)
from martrep.default_sim import simulate
from martrep.enlargement import pstar
from martrep.errors import StructuralError
from martrep.finite_space import (
    Filtration,
    ProcessTable,
    RandomTimeTable,
    join_filtrations,
    natural_filtration_of_occurrence,
    stopping_time_violation,
)
from martrep.laws import MixedModel, exact_triplet
from martrep.models import (
    EQUAL_HAZARD_JOINT,
    random_tau_space,
    random_two_generator_model,
    with_density,
)
from martrep.representation import hedge, iter_nodes, multiplicity, prp_check

seeds = st.integers(0, 2**32 - 1)
SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@given(seeds)
@SETTINGS
def test_join_never_coarsens(seed):
    m = random_two_generator_model(np.random.default_rng(seed), True)
    G = join_filtrations(m.filtF, m.filtH)
    for k in range(len(G)):
        assert G.n_cells(k) >= max(m.filtF.n_cells(k), m.filtH.n_cells(k))


@given(st.lists(st.integers(0, 3), min_size=2, max_size=6), st.lists(st.integers(0, 3), min_size=2, max_size=6))
@settings(max_examples=60, deadline=None)
def test_stopping_time_check_matches_definition(vals, other):
    n = min(len(vals), len(other))
    vals, other = vals[:n], other[:n]
    grid = (0, 1, 2, 3)
    tau = RandomTimeTable.from_values("tau", [v if v else float("inf") for v in vals], grid)
    sigma = RandomTimeTable.from_values("sigma", [v if v else float("inf") for v in other], grid)
    filt = natural_filtration_of_occurrence(sigma)
    bad = stopping_time_violation(tau, filt)
    # brute force: {tau <= t_k} must be a union of cells at every k
    ok = all(len({int(tau.index[a] <= k) for a in range(n) if filt[k][a] == c}) == 1
             for k in range(4) for c in range(filt.n_cells(k)))
    assert (bad is None) == ok
    assert stopping_time_violation(tau, natural_filtration_of_occurrence(tau)) is None


@given(seeds)
@SETTINGS
def test_doob_part_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    m = random_two_generator_model(rng, True)
    n, K = m.space.n_atoms, m.space.n_times
    raw = rng.integers(-4, 5, size=(n, K))
    # make X adapted to G by averaging over G-cells
    X = np.empty((n, K), dtype=object)
    for k in range(K):
        cells = m.G[k]
        for c in range(m.G.n_cells(k)):
            X[cells == c, k] = F(int(raw[cells == c, k][0]))
    X = ProcessTable(X)
    Mx, A = doob_decomposition(X, m.G, m.measureP)
    assert is_martingale(Mx, m.G, m.measureP)
    M2, A2 = doob_decomposition(Mx, m.G, m.measureP)
    assert arith.all_zero(A2.values, True)
    assert arith.all_close(M2.values, Mx.values, True)


@given(seeds)
@SETTINGS
def test_bracket_measures_are_atomic_and_supported(seed):
    space, tau, H, P = random_tau_space(np.random.default_rng(seed), True)
    N = compensated_occurrence(tau, H, P)
    B = sharp_bracket(N, N, H, P)
    bm = BracketMeasure.from_process(B, space, P)
    assert bm.is_atomic()
    assert all(t in space.grid for pts in bm.points for t, _ in pts)
    C = predictable_support(B, H, P)
    assert C.is_predictable(H)
    assert arith.all_zero(mass_outside(B, C)[P.support()], True)
    A = compensator_of_occurrence(tau, H, P)
    CA = predictable_support(A, H, P)
    assert arith.all_zero(mass_outside(A, CA)[P.support()], True)


@given(seeds, st.lists(st.integers(-3, 3), min_size=16, max_size=16))
@SETTINGS
def test_hedging_is_exact_when_prp_holds(seed, raw):
    m = random_two_generator_model(np.random.default_rng(seed), True)
    Ps = pstar(m)
    M, N = m.martingale_M(), m.martingale_N()
    basis = [M, N, covariation(M, N)]
    payoff = np.array([F(raw[a % len(raw)]) for a in range(m.space.n_atoms)], dtype=object)
    assert prp_check(basis, m.G, Ps).holds
    h = hedge(payoff, basis, m.G, Ps)
    assert h.residual_sq == 0


@given(seeds, st.lists(st.integers(-3, 3), min_size=16, max_size=16))
@SETTINGS
def test_hedging_residual_is_orthogonal_at_deficient_nodes(seed, raw):
    m = random_two_generator_model(np.random.default_rng(seed), True)
    Ps = pstar(m)
    basis = [m.martingale_M()]
    payoff = np.array([F(raw[a % len(raw)]) for a in range(m.space.n_atoms)], dtype=object)
    h = hedge(payoff, basis, m.G, Ps)
    V = h.value.values
    for node in iter_nodes(m.G, Ps):
        resid = [V[ch.atom, node.k + 1] - V[ch.atom, node.k]
                 - h.integrands.components[0].values[ch.atom, node.k + 1] * basis[0].increments()[ch.atom, node.k + 1]
                 for ch in node.children]
        inc = [basis[0].increments()[ch.atom, node.k + 1] for ch in node.children]
        assert sum(ch.prob * r * d for ch, r, d in zip(node.children, resid, inc)) == 0
    if not prp_check(basis, m.G, Ps).holds:
        assert h.node_residuals or h.residual_sq == 0


@given(seeds)
@SETTINGS
def test_multiplicity_basis_is_pairwise_orthogonal(seed):
    m = random_two_generator_model(np.random.default_rng(seed), True)
    Ps = pstar(m)
    rep = multiplicity(m.G, Ps)
    for i in range(len(rep.basis)):
        for j in range(i + 1, len(rep.basis)):
            B = sharp_bracket(rep.basis[i], rep.basis[j], m.G, Ps)
            assert arith.all_zero(B.values, True)


@pytest.mark.parametrize("name", ["equal-hazard", "equal-hazard-density", "verdict2"])
def test_simulated_channels_equal_closed_forms(name):
    from martrep.models import mixed_preset

    m = mixed_preset(name)
    b = simulate(m, 300, 1)
    ev = exact_triplet(m)
    t = b.times
    M = b["W"] + b["occ_eta"] - ev.A_eta(b.eta, t)
    H = b["occ_tau"] - ev.A_H(b.tau, b.tau_atom, t)
    Hp = b["occ_tau"] - ev.A_G(b.eta, b.tau, b.tau_atom, t)
    assert np.array_equal(M, b["M"])
    assert np.allclose(H, b["H"], atol=0) and np.allclose(Hp, b["Hprime"], atol=0)
    # [M,H] changes only at common atoms
    moving = np.flatnonzero(np.any(np.diff(b["MH"], axis=1) != 0, axis=0)) + 1
    assert set(np.round(t[moving], 9)) <= set(m.eta_atoms) & set(m.tau_atoms)


@pytest.mark.parametrize("density", [0, F(1, 5)])
def test_pathwise_covariation_equals_accessible_covariation(density):
    joint = {k: float(v) for k, v in (with_density(EQUAL_HAZARD_JOINT, density) if density else EQUAL_HAZARD_JOINT).items()}
    m = MixedModel(joint, 4.0, 1e-2, brownian=False, name="no-W")
    b = simulate(m, 400, 3, grid="full")
    dM, dH = np.diff(b["M"], axis=1), np.diff(b["H"], axis=1)
    pathwise = np.cumsum(dM * dH, axis=1)
    # a density draw in the same dt-step as an eta atom is a grid artefact (null in continuous time)
    clash = ~b.tau_atom & np.any([(b.tau > a - m.dt) & (b.tau <= a) for a in m.eta_atoms], axis=0)
    err = np.max(np.abs(pathwise - b["MH"][:, 1:])[~clash])
    # the only difference is the O(dt) continuous drift of H on the step of an eta-jump
    assert err < (1e-12 if not density else 0.05)


def test_filtration_of_mismatched_sizes_is_rejected():
    with pytest.raises(StructuralError):
        Filtration("x", (np.zeros(3, int), np.zeros(2, int)))
