"""Stochastic integrals, representation certificates, multiplicity and hedging.

A node is a positive-measure cell of the partition at t_k together with its
positive-measure children at t_{k+1}. Everything here is node-local linear
algebra; nodes are visited in lexicographic order (time, cell id).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import arith
from .calculus import (
    BracketMeasure,
    compensator_of_occurrence,
    covariation,
    cumsum,
    is_martingale,
    martingale_violation,
    mutually_singular,
    sharp_bracket,
    strongly_orthogonal,
    SingularityResult,
)
from .enlargement import (
    JointModel,
    Verdict,
    compensated_occurrence_G,
    decoupling_exists,
    immersion_check,
    is_minimal_martingale_measure,
    pstar,
)
from .errors import AssumptionError, ContractError, InternalConsistencyError, UnsupportedModelError
from .finite_space import Filtration, MeasureVector, ProcessTable, cond_exp, is_predictable


@dataclass(frozen=True)
class Child:
    cell: int
    mask: np.ndarray
    atom: int           # a positive-measure representative
    prob: Any           # conditional probability given the node


@dataclass(frozen=True)
class Node:
    k: int
    cell: int
    mask: np.ndarray
    mass: Any
    children: tuple[Child, ...]

    @property
    def id(self) -> tuple[int, int]:
        return (self.k, self.cell)


def iter_nodes(filt: Filtration, measure: MeasureVector) -> list[Node]:
    supp = measure.support()
    nodes = []
    for k in range(len(filt) - 1):
        cur, nxt = filt[k], filt[k + 1]
        for c in range(filt.n_cells(k)):
            mask = cur == c
            mass = measure.prob(mask)
            if not arith.positive(mass, measure.exact, 0.0):
                continue
            children = []
            for d in sorted(set(nxt[mask & supp].tolist())):
                cm = mask & (nxt == d)
                children.append(Child(d, cm, int(np.flatnonzero(cm & supp)[0]), measure.prob(cm) / mass))
            nodes.append(Node(k, c, mask, mass, tuple(children)))
    return nodes


def _require_martingales(processes, filt, measure):
    for X in processes:
        bad = martingale_violation(X, filt, measure, 1e-10)
        if bad is not None:
            raise ContractError(f"{X.name or 'candidate'} is not a martingale (t_{bad[0]}, cell {bad[1]})")


def _increment_matrix(node: Node, processes, exact: bool) -> np.ndarray:
    d = arith.zeros((len(node.children), len(processes)), exact)
    for j, X in enumerate(processes):
        inc = arith.coerce(X.increments()[:, node.k + 1], exact)
        for i, ch in enumerate(node.children):
            d[i, j] = inc[ch.atom]
    return d


# --- integrals ------------------------------------------------------------------

@dataclass(frozen=True)
class IntegrandVector:
    components: tuple[ProcessTable, ...]
    v0: Any = 0

    def record(self) -> dict:
        from .report import jsonable
        return {"v0": jsonable(self.v0), "components": [jsonable(c.values) for c in self.components]}


def stochastic_integral(xi: IntegrandVector, basis: Sequence[ProcessTable],
                        filt: Filtration | None = None) -> ProcessTable:
    """(xi . X)_k = sum_{j <= k} sum_i xi_i(t_j) dX^i(t_j), componentwise."""
    if len(xi.components) != len(basis):
        raise ContractError("integrand and basis dimensions differ")
    if not basis:
        raise ContractError("empty basis")
    exact = all(c.exact for c in xi.components) and all(b.exact for b in basis)
    if filt is not None:
        for c in xi.components:
            if not is_predictable(c, filt):
                raise ContractError(f"integrand {c.name or ''} is not predictable w.r.t. {filt.name}")
    total = arith.zeros(basis[0].shape, exact)
    for c, X in zip(xi.components, basis):
        total = total + arith.coerce(c.values, exact) * arith.coerce(X.increments(), exact)
    return ProcessTable(cumsum(total, exact), "integral")


# --- p.r.p. ---------------------------------------------------------------------

@dataclass(frozen=True)
class NodeCertificate:
    node: tuple[int, int]
    children: int
    probs: tuple
    increments: np.ndarray
    rank: int
    required: int

    @property
    def ok(self) -> bool:
        return self.rank == self.required

    def record(self) -> dict:
        from .report import jsonable
        return {"time_index": self.node[0], "cell": self.node[1], "children": self.children,
                "probs": jsonable(self.probs), "increments": jsonable(self.increments),
                "rank": self.rank, "required": self.required}


@dataclass(frozen=True)
class PRPResult:
    holds: bool
    certificates: tuple[NodeCertificate, ...]
    deficient: NodeCertificate | None = None

    def record(self) -> dict:
        return {"holds": self.holds,
                "deficient": None if self.deficient is None else self.deficient.record(),
                "nodes": len(self.certificates)}


def prp_check(candidates: Sequence[ProcessTable], filt: Filtration, measure: MeasureVector) -> PRPResult:
    """At every node the candidates' increments must span the mean-zero
    vectors on the children (dimension children - 1)."""
    _require_martingales(candidates, filt, measure)
    exact = measure.exact and all(c.exact for c in candidates)
    certs = []
    deficient = None
    for node in iter_nodes(filt, measure):
        d = _increment_matrix(node, candidates, exact)
        r = arith.rank(d, exact) if candidates else 0
        cert = NodeCertificate(node.id, len(node.children), tuple(ch.prob for ch in node.children),
                               d, r, len(node.children) - 1)
        certs.append(cert)
        if deficient is None and not cert.ok:
            deficient = cert
    return PRPResult(deficient is None, tuple(certs), deficient)


# --- multiplicity ---------------------------------------------------------------

@dataclass(frozen=True)
class MultiplicityReport:
    multiplicity: int
    basis: tuple[ProcessTable, ...]
    extremal_node: tuple[int, int] | None
    prp: PRPResult | None
    verdict: int | None = None
    clauses: dict = field(default_factory=dict)

    def record(self) -> dict:
        return {"multiplicity": self.multiplicity, "extremal_node": self.extremal_node,
                "basis_prp": None if self.prp is None else self.prp.holds,
                "verdict": self.verdict, "clauses": self.clauses}


def _gram_schmidt(p: Sequence, exact: bool) -> list:
    """p-orthogonal basis of the p-mean-zero vectors, from centred indicators."""
    n = len(p)
    basis = []
    for j in range(n - 1):
        v = [(1 if i == j else 0) - p[j] for i in range(n)]
        v = [arith.to_fraction(x) if exact else float(x) for x in v]
        for b in basis:
            num = sum(pi * vi * bi for pi, vi, bi in zip(p, v, b))
            den = sum(pi * bi * bi for pi, bi in zip(p, b))
            v = [vi - num / den * bi for vi, bi in zip(v, b)]
        if not exact:
            norm = float(np.sqrt(sum(pi * vi * vi for pi, vi in zip(p, v))))
            v = [vi / norm for vi in v]
        basis.append(v)
    return basis


def multiplicity(filt: Filtration, measure: MeasureVector) -> MultiplicityReport:
    """max over nodes of (children - 1), with a pairwise strongly orthogonal
    basis of that size built node by node."""
    exact = measure.exact
    nodes = iter_nodes(filt, measure)
    m = 0
    extremal = None
    for node in nodes:
        if len(node.children) - 1 > m:
            m, extremal = len(node.children) - 1, node.id
    n, K1 = len(measure), len(filt)
    incs = [arith.zeros((n, K1), exact) for _ in range(m)]
    for node in nodes:
        vecs = _gram_schmidt([ch.prob for ch in node.children], exact)
        for slot, v in enumerate(vecs):
            for ch, val in zip(node.children, v):
                incs[slot][ch.mask, node.k + 1] = val
    basis = tuple(ProcessTable(cumsum(d, exact), f"X{i + 1}", "adapted", filt.name)
                  for i, d in enumerate(incs))
    prp = prp_check(list(basis), filt, measure)
    if not prp.holds:
        raise InternalConsistencyError("constructed basis fails the p.r.p. check")
    return MultiplicityReport(m, basis, extremal, prp)


# --- the classifier -------------------------------------------------------------

@dataclass(frozen=True)
class ClassifierResult:
    verdict: int
    total: SingularityResult
    accessible: SingularityResult
    multiplicity: int
    brackets: tuple = ()

    def record(self) -> dict:
        return {"verdict": self.verdict, "multiplicity": self.multiplicity,
                "total_brackets_singular": self.total.record(),
                "accessible_brackets_singular": self.accessible.record()}


def _verdict(total: SingularityResult, acc: SingularityResult) -> int:
    if total.singular:
        return 1
    return 2 if acc.singular else 3


def own_filtration_checks(model: JointModel, P: MeasureVector | None = None) -> dict:
    """The A1 analogue: M has the p.r.p. in (P, F), N in (P, H), equivalently
    P is the only equivalent martingale measure for each on its own filtration."""
    P = P or model.measureP
    M, N = model.martingale_M(P), model.martingale_N(P)
    out = {}
    for label, X, filt in (("M", M, model.filtF), ("N", N, model.filtH)):
        u = uniqueness_check([X], filt, P)
        if not u.unique:
            raise AssumptionError("A1", f"{label} does not represent its own filtration: {u.record()}")
        out[label] = u
    return out


def classify_multiplicity(model, P: MeasureVector | None = None,
                          Pstar: MeasureVector | None = None) -> ClassifierResult:
    """1 if d<M>, d<N> are singular, 2 if only their accessible parts are, 3 otherwise.
    Cross-checked against a direct multiplicity computation under P*."""
    from .laws import MixedModel, mixed_brackets, mixed_multiplicity

    if isinstance(model, MixedModel):
        ok, cert = model.is_rectangular()
        if not ok:
            raise AssumptionError("D", f"joint law support is not a product set; missing {cert}")
        bm, bn = mixed_brackets(model)
        am, an = mixed_brackets(model, accessible_only=True)
        total, acc = mutually_singular(bm, bn), mutually_singular(am, an)
        mult = mixed_multiplicity(model).multiplicity
        verdict = _verdict(total, acc)
        if verdict != mult:
            raise InternalConsistencyError(f"classifier verdict {verdict} but local dimension {mult}")
        return ClassifierResult(verdict, total, acc, mult, (bm, bn))

    if not isinstance(model, JointModel):
        raise UnsupportedModelError(f"cannot classify {type(model).__name__}")
    P = P or model.measureP
    dec = decoupling_exists(model, P)
    if not dec.exists:
        raise AssumptionError("D", f"no equivalent decoupling measure; certificate {dec.certificate}")
    Ps = Pstar or pstar(model)
    own_filtration_checks(model, P)
    M, N = model.martingale_M(P), model.martingale_N(P)
    sp = model.space
    bm = BracketMeasure.from_process(sharp_bracket(M, M, model.filtF, P), sp, P, "<M>")
    bn = BracketMeasure.from_process(sharp_bracket(N, N, model.filtH, P), sp, P, "<N>")
    # on a finite grid every martingale is purely accessible: d<M^dp> = d<M>
    total = mutually_singular(bm, bn, model.filtF, P, sp.grid)
    acc = total
    rep = multiplicity(model.G, Ps)
    if rep.multiplicity == 0:
        raise UnsupportedModelError("degenerate model: neither filtration branches")
    verdict = _verdict(total, acc)
    if verdict != rep.multiplicity:
        raise InternalConsistencyError(f"classifier verdict {verdict} but multiplicity {rep.multiplicity}")
    return ClassifierResult(verdict, total, acc, rep.multiplicity, (bm, bn))


# --- uniqueness of the equivalent martingale measure -------------------------------

@dataclass(frozen=True)
class UniquenessResult:
    unique: bool
    dimension: int
    node_dimensions: dict
    lp_free_nodes: tuple
    prp_agrees: bool
    occurrence_route: dict | None = None

    def record(self) -> dict:
        return {"unique": self.unique, "dimension": self.dimension,
                "free_nodes": [list(n) for n in self.lp_free_nodes], "prp_agrees": self.prp_agrees,
                "occurrence_route": self.occurrence_route}


def _lp_free(d: np.ndarray, tol: float = 1e-9) -> bool:
    """Can some child probability move inside {q >= 0, sum q = 1, q @ d = 0}?"""
    from scipy.optimize import linprog

    k = d.shape[0]
    A = np.vstack([np.ones((1, k)), d.astype(float).T]) if d.size else np.ones((1, k))
    b = np.zeros(A.shape[0])
    b[0] = 1.0
    for j in range(k):
        c = np.zeros(k)
        c[j] = 1.0
        lo = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        hi = linprog(-c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
        if lo.status == 0 and hi.status == 0 and (-hi.fun - lo.fun) > tol:
            return True
    return False


def uniqueness_check(martingales: Sequence[ProcessTable], filt: Filtration,
                     measure: MeasureVector) -> UniquenessResult:
    """Is `measure` the only equivalent measure making all inputs martingales?

    Per node the conditional child laws q with sum q = 1 and q @ dX = 0 form
    an affine set through the strictly positive p, so its dimension
    children - 1 - rank is the local number of free directions. An LP on
    each node gives an independent decision.
    """
    _require_martingales(martingales, filt, measure)
    exact = measure.exact and all(m.exact for m in martingales)
    dims = {}
    free = []
    for node in iter_nodes(filt, measure):
        d = _increment_matrix(node, martingales, exact)
        r = arith.rank(d, exact) if martingales else 0
        dim = len(node.children) - 1 - r
        if dim:
            dims[node.id] = dim
        if len(node.children) > 1 and _lp_free(d):
            free.append(node.id)
    dimension = sum(dims.values())
    if (dimension == 0) != (not free):
        raise InternalConsistencyError("LP and rank routes disagree on uniqueness")
    prp = prp_check(martingales, filt, measure)
    return UniquenessResult(dimension == 0, dimension, dims, tuple(free), prp.holds == (dimension == 0))


def occurrence_route(tau, filt: Filtration, P: MeasureVector, Pprime: MeasureVector) -> dict:
    """Equal compensators of the occurrence of tau (and equal time-0 laws)
    force equal laws on the terminal sigma-field of filt."""
    from .calculus import law_from_compensator

    exact = P.exact and Pprime.exact
    A = compensator_of_occurrence(tau, filt, P)
    B = compensator_of_occurrence(tau, filt, Pprime)
    supp = P.support() & Pprime.support()
    same_comp = arith.all_close(A.values[supp], B.values[supp], exact, 1e-12)
    cells = filt[len(filt) - 1]
    same_law = all(arith.is_zero(P.prob(cells == c) - Pprime.prob(cells == c), exact, 1e-12)
                   for c in range(int(cells.max()) + 1))
    law = law_from_compensator(A, tau, P)
    counts = [P.prob(tau.index == k) for k in range(len(tau.grid) + 1)]
    if not arith.all_close(law, counts, exact, 1e-10):
        raise InternalConsistencyError("law rebuilt from the compensator differs from the law of tau")
    return {"compensators_equal": same_comp, "laws_equal": same_law}


# --- Kusuoka-type triplet ---------------------------------------------------------

@dataclass(frozen=True)
class TripletResult:
    M: ProcessTable
    Hprime: ProcessTable
    MH: ProcessTable
    prp: PRPResult
    mmm: Verdict
    immersion: Verdict
    M_Hprime_orthogonal: bool
    MH_vanishes: bool
    M_MH_orthogonal: bool
    Pstar: MeasureVector

    def record(self) -> dict:
        from .report import jsonable
        return {"prp_under_P": self.prp.holds, "mmm": self.mmm.record(),
                "immersion": self.immersion.record(),
                "M_Hprime_strongly_orthogonal": self.M_Hprime_orthogonal,
                "MH_identically_zero": self.MH_vanishes,
                "M_MH_strongly_orthogonal_under_P": self.M_MH_orthogonal,
                "M": jsonable(self.M.values), "Hprime": jsonable(self.Hprime.values),
                "MH": jsonable(self.MH.values)}


def kusuoka_triplet(model: JointModel, P: MeasureVector | None = None) -> TripletResult:
    """(M, H', [M,H]) and its (P, G) representation property.

    Refuses unless the decoupling condition, the own-filtration uniqueness
    condition and the minimal martingale measure condition all hold."""
    P = P or model.measureP
    Ps = pstar(model)
    own_filtration_checks(model, P)
    mmm = is_minimal_martingale_measure(model, P, Ps)
    if not mmm.holds:
        raise AssumptionError("m.m.m.", f"P is not the minimal martingale measure: {mmm.witness}")
    G = model.G
    M = model.martingale_M(P)
    H = model.martingale_N(P)
    Hp = compensated_occurrence_G(model, P).Hprime
    MH = covariation(M, H)
    MH = MH.with_values(MH.values, name="[M,H]")
    for X in (M, Hp, MH):
        if not is_martingale(X, G, P, 1e-10):
            raise InternalConsistencyError(f"{X.name} is not a (P,G)-martingale")
    imm = immersion_check(model, P)
    if not imm.holds:
        raise InternalConsistencyError(f"immersion fails: {imm.witness}")
    orth = strongly_orthogonal(M, Hp, G, P, 1e-10)
    if not orth:
        raise InternalConsistencyError("M and H' are not strongly orthogonal")
    prp = prp_check([M, Hp, MH], G, P)
    if not prp.holds:
        raise InternalConsistencyError(f"triplet fails the p.r.p. at {prp.deficient.node}")
    supp = P.support()
    vanishes = arith.all_zero(MH.values[supp], MH.exact, 1e-12)
    m_mh = strongly_orthogonal(M, MH, G, P, 1e-12)
    return TripletResult(M, Hp, MH, prp, mmm, imm, orth, vanishes, m_mh, Ps)


# --- hedging ----------------------------------------------------------------------

@dataclass(frozen=True)
class HedgeResult:
    v0: Any
    integrands: IntegrandVector
    value: ProcessTable
    replication: ProcessTable
    residual_sq: Any
    node_residuals: dict

    @property
    def residual_norm(self) -> float:
        return float(self.residual_sq) ** 0.5

    def record(self) -> dict:
        from .report import jsonable
        return {"v0": jsonable(self.v0), "residual_norm": self.residual_norm,
                "integrands": self.integrands.record(),
                "node_residuals": {f"{k}:{c}": jsonable(v) for (k, c), v in self.node_residuals.items()}}


def hedge(payoff, basis: Sequence[ProcessTable], filt: Filtration, measure: MeasureVector) -> HedgeResult:
    """Per-node weighted least squares of the value increment on the basis
    increments, minimum-norm solution."""
    _require_martingales(basis, filt, measure)
    exact = measure.exact and arith.is_exact_array(np.asarray(payoff)) and all(b.exact for b in basis)
    y = arith.coerce(payoff, exact)
    n, K1 = len(measure), len(filt)
    V = arith.zeros((n, K1), exact)
    V[:, K1 - 1] = y
    for k in range(K1 - 2, -1, -1):
        V[:, k] = cond_exp(V[:, k + 1], filt[k], measure, null="zero", time_index=k)
    xi = [arith.zeros((n, K1), exact) for _ in basis]
    resid = {}
    for node in iter_nodes(filt, measure):
        d = _increment_matrix(node, basis, exact)
        p = [ch.prob for ch in node.children]
        target = [V[ch.atom, node.k + 1] - V[ch.atom, node.k] for ch in node.children]
        if basis:
            w = np.diag(np.array(p, dtype=object if exact else float))
            dtw = d.T.dot(w)
            sol = arith.pinv(dtw.dot(d), exact).dot(dtw.dot(np.array(target, dtype=object if exact else float)))
        else:
            sol = []
        fitted = [sum((d[i, j] * sol[j] for j in range(len(basis))), Fraction(0) if exact else 0.0)
                  for i in range(len(p))]
        r = sum((pi * (t - f) ** 2 for pi, t, f in zip(p, target, fitted)), Fraction(0) if exact else 0.0)
        if not arith.is_zero(r, exact, 1e-20):
            resid[node.id] = r
        for j in range(len(basis)):
            xi[j][node.mask, node.k + 1] = sol[j]
    comps = tuple(ProcessTable(x, f"xi[{b.name}]", "predictable", filt.name) for x, b in zip(xi, basis))
    v0 = V[0, 0] if measure.support()[0] else cond_exp(y, filt[0], measure)[0]
    iv = IntegrandVector(comps, v0)
    if basis:
        rep = stochastic_integral(iv, basis, filt)
        rep = ProcessTable(rep.values + v0, "replication")
    else:
        rep = ProcessTable(arith.zeros((n, K1), exact) + v0, "replication")
    err = arith.coerce(y, exact) - rep.values[:, K1 - 1]
    residual_sq = measure.expect(err * err) if exact else float(np.sum(measure.weights.astype(float) * err * err))
    return HedgeResult(v0, iv, ProcessTable(V, "value"), rep, residual_sq, resid)
