"""Two-filtration models on a finite space and progressive enlargement.

A JointModel carries a reference filtration F (generated by the random time
`gen_F`), the natural filtration H of a random time tau, and G = F v H.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from . import arith
from .calculus import (
    compensated_occurrence,
    compensator_of_occurrence,
    covariation,
    cumsum,
    martingale_violation,
)
from .errors import AssumptionError, ContractError, InternalConsistencyError, UnsupportedModelError
from .finite_space import (
    FiniteFilteredSpace,
    Filtration,
    MeasureVector,
    ProcessTable,
    canonical_cells,
    cond_exp,
    join_filtrations,
)


@dataclass(frozen=True, eq=False)
class JointModel:
    space: FiniteFilteredSpace
    F: str
    H: str
    P: str
    gen_F: str | None
    gen_H: str
    M: ProcessTable | None = None
    N: ProcessTable | None = None
    name: str = ""
    G: Filtration = field(init=False)

    def __post_init__(self):
        sp = self.space
        F, H = sp.filtration(self.F), sp.filtration(self.H)
        G = join_filtrations(F, H, "G")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "space", sp.with_filtration(G))
        if self.gen_H not in sp.random_times:
            raise ContractError(f"unknown random time {self.gen_H!r}")

    @property
    def filtF(self) -> Filtration:
        return self.space.filtration(self.F)

    @property
    def filtH(self) -> Filtration:
        return self.space.filtration(self.H)

    @property
    def measureP(self) -> MeasureVector:
        return self.space.measure(self.P)

    @property
    def tau(self):
        return self.space.time(self.gen_H)

    @property
    def exact(self) -> bool:
        return self.measureP.exact

    def measure(self, m: str | MeasureVector | None) -> MeasureVector:
        return self.measureP if m is None else self.space.measure(m)

    def martingale_M(self, measure: MeasureVector | None = None) -> ProcessTable:
        """The designated F-martingale; by default the compensated occurrence
        of the F-generator under (measure, F)."""
        if self.M is not None:
            return self.M
        if self.gen_F is None:
            raise ContractError("model has neither an F-martingale nor an F-generator")
        m = compensated_occurrence(self.space.time(self.gen_F), self.filtF, measure or self.measureP)
        return m.with_values(m.values, name="M")

    def martingale_N(self, measure: MeasureVector | None = None) -> ProcessTable:
        if self.N is not None:
            return self.N
        n = compensated_occurrence(self.tau, self.filtH, measure or self.measureP)
        return n.with_values(n.values, name="H")

    def with_measure(self, m: MeasureVector) -> "JointModel":
        return JointModel(self.space.with_measure(m), self.F, self.H, self.P, self.gen_F, self.gen_H,
                          self.M, self.N, self.name)

    def with_reference(self, name: str) -> "JointModel":
        return JointModel(self.space, self.F, self.H, name, self.gen_F, self.gen_H, self.M, self.N, self.name)


def _terminal(filt: Filtration) -> np.ndarray:
    return filt[len(filt) - 1]


def _cell_masses(cells: np.ndarray, measure: MeasureVector) -> list:
    out = [Fraction(0) if measure.exact else 0.0 for _ in range(int(cells.max()) + 1)]
    for c, w in zip(cells, measure.weights):
        out[c] += w
    return out


def _generator_cells(model: JointModel, which: str) -> np.ndarray:
    gen = model.gen_F if which == "F" else model.gen_H
    filt = model.filtF if which == "F" else model.filtH
    if gen is None:
        raise UnsupportedModelError(f"no generator declared for {which}")
    t = model.space.time(gen)
    cells = canonical_cells(t.index.tolist())
    if not np.array_equal(canonical_cells(_terminal(filt).tolist()), cells):
        raise UnsupportedModelError(
            f"{gen} does not generate the terminal sigma-field of {filt.name}; "
            "decoupling is decided only for two-generator models")
    return cells


@dataclass(frozen=True)
class DecouplingResult:
    exists: bool
    Q: MeasureVector | None
    certificate: tuple | None = None

    def record(self) -> dict:
        from .report import jsonable
        return {"exists": self.exists,
                "Q": None if self.Q is None else [jsonable(w) for w in self.Q.weights],
                "certificate": None if self.certificate is None else jsonable(self.certificate)}


def decoupling_exists(model: JointModel, measure: str | MeasureVector | None = None) -> DecouplingResult:
    """An equivalent measure making F and H independent exists iff the support
    of the joint generator law is a product set; Q is then the product of the
    marginals of P, spread over atoms of each class in proportion to P."""
    P = model.measure(measure)
    fc = _generator_cells(model, "F")
    hc = _generator_cells(model, "H")
    pf = _cell_masses(fc, P)
    ph = _cell_masses(hc, P)
    joint: dict[tuple[int, int], Any] = {}
    for a, w in enumerate(P.weights):
        key = (int(fc[a]), int(hc[a]))
        joint[key] = joint.get(key, 0) + w
    supp = {k for k, w in joint.items() if arith.positive(w, P.exact, 0.0)}
    sf = sorted({k[0] for k in supp})
    sh = sorted({k[1] for k in supp})
    tF = model.space.time(model.gen_F)
    tH = model.tau
    for u in sf:
        for v in sh:
            if (u, v) not in supp:
                au = int(np.flatnonzero(fc == u)[0])
                av = int(np.flatnonzero(hc == v)[0])
                return DecouplingResult(False, None, (tF.values[au], tH.values[av]))
    q = arith.zeros(len(P), P.exact)
    for a, w in enumerate(P.weights):
        key = (int(fc[a]), int(hc[a]))
        if key in supp:
            q[a] = pf[key[0]] * ph[key[1]] * w / joint[key]
    return DecouplingResult(True, MeasureVector("Q", q))


def decouples(model: JointModel, Q: MeasureVector, tol: float = arith.TOL) -> bool:
    """Q equivalent to P and F_T, H_T independent under Q."""
    P = model.measureP
    if not P.equivalent(Q):
        return False
    fT, hT = _terminal(model.filtF), _terminal(model.filtH)
    qf, qh = _cell_masses(fT, Q), _cell_masses(hT, Q)
    exact = Q.exact
    for u in range(len(qf)):
        for v in range(len(qh)):
            joint = Q.prob((fT == u) & (hT == v))
            if not arith.is_zero(joint - qf[u] * qh[v], exact, tol):
                return False
    return True


def martingale_preserving_measure(model: JointModel, Q: MeasureVector,
                                  name: str = "P*") -> MeasureVector:
    """dP* = (dP/dQ on F_T)(dP/dQ on H_T) dQ, atom by atom."""
    if not decouples(model, Q):
        raise ContractError("Q is not an equivalent decoupling measure")
    P = model.measureP
    fT, hT = _terminal(model.filtF), _terminal(model.filtH)
    pf, qf = _cell_masses(fT, P), _cell_masses(fT, Q)
    ph, qh = _cell_masses(hT, P), _cell_masses(hT, Q)
    exact = P.exact and Q.exact
    w = arith.zeros(len(P), exact)
    for a in range(len(P)):
        if arith.positive(Q.weights[a], exact, 0.0):
            w[a] = pf[fT[a]] / qf[fT[a]] * ph[hT[a]] / qh[hT[a]] * Q.weights[a]
    Pstar = MeasureVector(name, w)
    for cells in (fT, hT):
        if not arith.all_close(_cell_masses(cells, Pstar), _cell_masses(cells, P), exact):
            raise InternalConsistencyError("P* does not preserve the marginal laws")
    if not decouples(model, Pstar):
        raise InternalConsistencyError("P* does not decouple F and H")
    return Pstar


def product_of_marginals(model: JointModel, name: str = "P*") -> MeasureVector:
    """Independent route to P*: product of the P-marginals of the two terminal
    sigma-fields, split inside each (F_T, H_T) class in proportion to P."""
    P = model.measureP
    fT, hT = _terminal(model.filtF), _terminal(model.filtH)
    pf, ph = _cell_masses(fT, P), _cell_masses(hT, P)
    w = arith.zeros(len(P), P.exact)
    for a in range(len(P)):
        cls = (fT == fT[a]) & (hT == hT[a])
        mass = P.prob(cls)
        if arith.positive(mass, P.exact, 0.0):
            w[a] = pf[fT[a]] * ph[hT[a]] * P.weights[a] / mass
    return MeasureVector(name, w)


def pstar(model: JointModel) -> MeasureVector:
    dec = decoupling_exists(model)
    if not dec.exists:
        raise AssumptionError("D", f"no equivalent decoupling measure; certificate {dec.certificate}")
    Ps = martingale_preserving_measure(model, dec.Q)
    if not arith.all_close(Ps.weights, product_of_marginals(model).weights, Ps.exact):
        raise InternalConsistencyError("P* from Q differs from the product of marginals")
    return Ps


# --- density processes --------------------------------------------------------

@dataclass(frozen=True)
class DensityProcess:
    L: ProcessTable
    gamma: np.ndarray | None = None     # integrand of 1 - L against H, NaN/None where undefined
    driven_by_H: bool | None = None


def density_process(filt: Filtration, target: MeasureVector, base: MeasureVector) -> ProcessTable:
    """L_k = target(cell)/base(cell) on the partition at t_k."""
    exact = target.exact and base.exact
    n, K1 = len(base), len(filt)
    L = arith.zeros((n, K1), exact)
    for k in range(K1):
        cells = filt[k]
        tm, bm = _cell_masses(cells, target), _cell_masses(cells, base)
        for a in range(n):
            if arith.positive(bm[cells[a]], exact, 0.0):
                L[a, k] = tm[cells[a]] / bm[cells[a]]
    return ProcessTable(L, f"d{target.name}/d{base.name}")


def recover_gamma(L: ProcessTable, H: ProcessTable, filt: Filtration,
                  base: MeasureVector) -> DensityProcess:
    """Solve dL_k = -gamma_k L_{k-1} dH_k for a predictable gamma.

    driven_by_H is False when some increment of L is not a multiple of the
    increment of H within a node."""
    exact = L.exact and H.exact
    dL, dH = L.increments(), H.increments()
    n, K1 = L.shape
    gamma = np.full((n, K1), np.nan, dtype=object if exact else float)
    ok = True
    supp = base.support()
    for k in range(1, K1):
        prev = filt[k - 1]
        for c in range(int(prev.max()) + 1):
            atoms = np.flatnonzero((prev == c) & supp)
            if atoms.size == 0:
                continue
            g = None
            for a in atoms:
                if not arith.is_zero(dH[a, k], exact):
                    cand = -dL[a, k] / (L.values[a, k - 1] * dH[a, k])
                    if g is None:
                        g = cand
                    elif not arith.is_zero(cand - g, exact, 1e-10):
                        ok = False
                elif not arith.is_zero(dL[a, k], exact):
                    ok = False
            if g is not None:
                gamma[atoms, k] = g
    return DensityProcess(L, gamma, ok)


# --- G-compensator of tau -----------------------------------------------------

@dataclass(frozen=True)
class GCompensator:
    A: ProcessTable
    hazard_increments: np.ndarray       # second route, NaN where not applicable
    fallback: tuple[tuple[int, int], ...]   # (time index, F-cell) where the direct route was used
    routes_agree: bool

    def record(self) -> dict:
        from .report import jsonable
        return {"A": jsonable(self.A.values), "fallback": [list(f) for f in self.fallback],
                "routes_agree": self.routes_agree}


def g_compensator_of_tau(model: JointModel, measure: str | MeasureVector | None = None) -> GCompensator:
    """(P,G)-compensator of the occurrence of tau.

    Primary route: Doob decomposition in G. Second route, where it applies:
    with Z_k = P[tau <= t_k | F_k], if dZ_k is F_{k-1}-measurable then
    dA_k = 1{tau >= t_k} dZ_k / (1 - Z_{k-1}). Cells where dZ is not
    predictable or the denominator vanishes fall back to the primary route.
    """
    P = model.measure(measure)
    tau = model.tau
    F, G = model.filtF, model.G
    exact = P.exact
    A = compensator_of_occurrence(tau, G, P)
    dA = A.increments()
    occ = tau.occurrence(exact).values
    n, K1 = occ.shape
    Z = arith.zeros((n, K1), exact)
    for k in range(K1):
        Z[:, k] = cond_exp(occ[:, k], F[k], P, null="zero", time_index=k)
    hazard = np.full((n, K1), np.nan, dtype=object if exact else float)
    fallback = []
    agree = True
    supp = P.support()
    for k in range(1, K1):
        prev = F[k - 1]
        dZ = Z[:, k] - Z[:, k - 1]
        for c in range(int(prev.max()) + 1):
            atoms = np.flatnonzero((prev == c) & supp)
            if atoms.size == 0:
                continue
            vals = dZ[atoms]
            predictable = all(arith.is_zero(v - vals[0], exact) for v in vals)
            denom = 1 - Z[atoms[0], k - 1]
            if not predictable or not arith.positive(denom, exact):
                fallback.append((k, c))
                continue
            for a in atoms:
                alive = tau.index[a] >= k
                hazard[a, k] = (vals[0] / denom) if alive else 0 * vals[0]
                if not arith.is_zero(hazard[a, k] - dA[a, k], exact, 1e-10):
                    agree = False
    if not agree:
        raise InternalConsistencyError("hazard route and Doob route disagree on the G-compensator")
    return GCompensator(A.with_values(A.values, name="A^G"), hazard, tuple(fallback), agree)


@dataclass(frozen=True)
class CompensatedG:
    Hprime: ProcessTable
    H: ProcessTable
    A_H: ProcessTable
    A_G: ProcessTable

    def record(self) -> dict:
        from .report import jsonable
        return {"Hprime": jsonable(self.Hprime.values), "H": jsonable(self.H.values),
                "A_H": jsonable(self.A_H.values), "A_G": jsonable(self.A_G.values)}


def compensated_occurrence_G(model: JointModel, measure: str | MeasureVector | None = None) -> CompensatedG:
    """H' = 1{tau <= .} - A^{P,G}, with the identity H' = H + A^{P,H} - A^{P,G} checked."""
    P = model.measure(measure)
    tau = model.tau
    A_G = g_compensator_of_tau(model, P).A
    A_H = compensator_of_occurrence(tau, model.filtH, P)
    occ = tau.occurrence(P.exact).values
    H = ProcessTable(occ - A_H.values, "H", "adapted", model.H)
    Hp = ProcessTable(occ - A_G.values, "H'", "adapted", "G")
    if not arith.all_close(Hp.values, H.values + A_H.values - A_G.values, P.exact):
        raise InternalConsistencyError("H' != H + A^H - A^G")
    bad = martingale_violation(Hp, model.G, P)
    if bad is not None:
        raise InternalConsistencyError(f"H' is not a (P,G)-martingale at t_{bad[0]}")
    return CompensatedG(Hp, H, A_H, A_G)


# --- immersion and the minimal martingale measure -----------------------------

@dataclass(frozen=True)
class Verdict:
    holds: bool
    witness: Any = None
    evidence: dict = field(default_factory=dict)

    def record(self) -> dict:
        from .report import jsonable
        return {"holds": self.holds, "witness": jsonable(self.witness), **jsonable(self.evidence)}


def immersion_check(model: JointModel, measure: str | MeasureVector | None = None) -> Verdict:
    """Every (P,F)-martingale is a (P,G)-martingale.

    Tested on the spanning family k -> P(C | F_k) over the cells C of F_T."""
    P = model.measure(measure)
    F = model.filtF
    fT = _terminal(F)
    for c in range(int(fT.max()) + 1):
        X = model.space.terminal_rv_process(arith.coerce((fT == c).astype(int), P.exact), F, P,
                                            name=f"P(F_T cell {c} | F)")
        bad = martingale_violation(X, model.G, P)
        if bad is not None:
            return Verdict(False, {"F_T_cell": c, "time_index": bad[0], "G_cell": bad[1],
                                   "drift": bad[2]})
    return Verdict(True)


def _g_nodes(model: JointModel, measure: MeasureVector):
    from .representation import iter_nodes
    return iter_nodes(model.G, measure)


def is_minimal_martingale_measure(model: JointModel, candidate: str | MeasureVector | None = None,
                                  base: MeasureVector | None = None,
                                  Hprime: ProcessTable | None = None) -> Verdict:
    """Is `candidate` the minimal martingale measure for H' on (base, G)?

    Route (a): every (base,G)-martingale strongly orthogonal to H (the base
    martingale part of H') is a (candidate,G)-martingale, tested on a node-wise
    basis of the orthogonal complement of dH. Route (b): M and [M,H] are
    (candidate,G)-martingales. The two verdicts must agree.
    """
    P = model.measure(candidate)
    Ps = base if base is not None else pstar(model)
    exact = P.exact and Ps.exact
    if Hprime is None:
        Hprime = compensated_occurrence_G(model, P).Hprime
    # martingale part of H' under (P*, G) is H
    mart, _ = _doob(Hprime, model.G, Ps)
    H = compensated_occurrence(model.tau, model.filtH, P)
    if not arith.all_close(mart.values[Ps.support()], (H.values - H.values[:, :1])[Ps.support()], exact):
        raise InternalConsistencyError("martingale part of H' under P* is not H")

    witness_a = None
    dH = H.increments()
    for node in _g_nodes(model, Ps):
        if len(node.children) < 2:
            continue
        p = [ch.prob for ch in node.children]
        h = [dH[ch.atom, node.k + 1] for ch in node.children]
        # v mean-zero under p and orthogonal to h (p-weighted): rows [p], [p*h]
        cons = [p, [pi * hi for pi, hi in zip(p, h)]]
        basis = arith.nullspace(np.array(cons, dtype=object if exact else float), exact)
        pc = [P.prob(ch.mask) for ch in node.children]
        mass = sum(pc, Fraction(0) if exact else 0.0)
        if not arith.positive(mass, exact, 0.0):
            continue
        for j in range(basis.shape[1]):
            v = basis[:, j]
            drift = sum((pi * vi for pi, vi in zip(pc, v)), Fraction(0) if exact else 0.0) / mass
            if not arith.is_zero(drift, exact, 1e-10):
                witness_a = {"time_index": node.k + 1, "G_cell": node.cell, "drift": drift}
                break
        if witness_a is not None:
            break
    route_a = witness_a is None

    M = model.martingale_M(P)
    MH = covariation(M, H)
    MH = MH.with_values(MH.values, name="[M,H]")
    witness_b = None
    for X in (M, MH):
        bad = martingale_violation(X, model.G, P, 1e-10)
        if bad is not None:
            witness_b = {"process": X.name, "time_index": bad[0], "G_cell": bad[1], "drift": bad[2]}
            break
    route_b = witness_b is None
    if route_a != route_b:
        raise InternalConsistencyError(
            f"m.m.m. routes disagree: definition route {route_a} ({witness_a}), "
            f"martingale route {route_b} ({witness_b})")
    return Verdict(route_a, witness_b or witness_a,
                   {"definition_route": route_a, "martingale_route": route_b})


def _doob(X, filt, measure):
    from .calculus import doob_decomposition
    return doob_decomposition(X, filt, measure)


def girsanov_triplet(processes: list[ProcessTable], filt: Filtration, P: MeasureVector,
                     Pstar: MeasureVector) -> list[ProcessTable]:
    """X~ = X - sum (1/L_{k-1}) d<L, X>^{P*}_k with L = dP/dP* on filt: turns
    P*-martingales into P-martingales (discrete Girsanov)."""
    exact = P.exact and Pstar.exact
    L = density_process(filt, P, Pstar)
    dL = L.increments()
    out = []
    for X in processes:
        dX = arith.coerce(X.increments(), exact)
        corr = arith.zeros(X.shape, exact)
        for k in range(1, X.shape[1]):
            d = cond_exp(dL[:, k] * dX[:, k], filt[k - 1], Pstar, null="zero", time_index=k - 1)
            prevL = L.values[:, k - 1]
            for a in range(len(d)):
                if arith.positive(prevL[a], exact, 0.0):
                    corr[a, k] = d[a] / prevL[a]
        out.append(ProcessTable(arith.coerce(X.values, exact) - cumsum(corr, exact), f"{X.name}~"))
    return out
