"""Compensators, brackets and supports on finite filtered spaces.

Discrete-time conventions: the increment at grid index k is X_k - X_{k-1},
and "predictable at t_k" means measurable w.r.t. the partition at t_{k-1}.
"Almost surely" means "on every atom of positive measure".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import numpy as np

from . import arith
from .errors import ContractError, InternalConsistencyError, UnsupportedModelError
from .finite_space import (
    FiniteFilteredSpace,
    Filtration,
    MeasureVector,
    ProcessTable,
    RandomTimeTable,
    cond_exp,
    is_adapted,
    stopping_time_violation,
)


def _exact(*objs) -> bool:
    return all(getattr(o, "exact", True) for o in objs)


def _prev_partition(filt: Filtration, k: int) -> np.ndarray:
    if k == 0:
        return np.zeros(len(filt[0]), dtype=int)
    return filt[k - 1]


def predictable_projection_of_increments(X: ProcessTable, filt: Filtration,
                                         measure: MeasureVector) -> np.ndarray:
    """Column k: E[X_k - X_{k-1} | filt_{k-1}]; column 0 is zero."""
    exact = _exact(X, measure)
    dX = arith.coerce(X.increments(), exact)
    out = arith.zeros(X.shape, exact)
    for k in range(1, X.shape[1]):
        out[:, k] = cond_exp(dX[:, k], filt[k - 1], measure, null="zero", time_index=k - 1)
    return out


def martingale_violation(X: ProcessTable, filt: Filtration, measure: MeasureVector,
                         tol: float = arith.TOL) -> tuple[int, int, Any] | None:
    """First (time index, cell at k-1, conditional drift) breaking the martingale property."""
    if not is_adapted(X, filt):
        raise ContractError(f"{X.name or 'process'} is not adapted to {filt.name}")
    exact = _exact(X, measure)
    drift = predictable_projection_of_increments(X, filt, measure)
    support = measure.support()
    for k in range(1, X.shape[1]):
        for a in np.flatnonzero(support):
            if not arith.is_zero(drift[a, k], exact, tol):
                return k, int(filt[k - 1][a]), drift[a, k]
    return None


def is_martingale(X: ProcessTable, filt: Filtration, measure: MeasureVector,
                  tol: float = arith.TOL) -> bool:
    return martingale_violation(X, filt, measure, tol) is None


def doob_decomposition(X: ProcessTable, filt: Filtration,
                       measure: MeasureVector) -> tuple[ProcessTable, ProcessTable]:
    """X = X_0 + M + A with M a martingale, A predictable, M_0 = A_0 = 0."""
    if not is_adapted(X, filt):
        raise ContractError(f"{X.name or 'process'} is not adapted to {filt.name}")
    exact = _exact(X, measure)
    dA = predictable_projection_of_increments(X, filt, measure)
    A = np.cumsum(dA, axis=1) if not exact else _cumsum_exact(dA)
    x = arith.coerce(X.values, exact)
    M = x - x[:, :1] - A
    return (ProcessTable(M, f"mart[{X.name}]", "adapted", filt.name),
            ProcessTable(A, f"comp[{X.name}]", "predictable", filt.name))


def _cumsum_exact(a: np.ndarray) -> np.ndarray:
    out = arith.zeros(a.shape, True)
    acc = arith.zeros(a.shape[0], True)
    for k in range(a.shape[1]):
        acc = acc + a[:, k]
        out[:, k] = acc
    return out


def cumsum(a: np.ndarray, exact: bool) -> np.ndarray:
    return _cumsum_exact(a) if exact else np.cumsum(a.astype(float), axis=1)


def compensator_of_occurrence(tau: RandomTimeTable, filt: Filtration,
                              measure: MeasureVector) -> ProcessTable:
    bad = stopping_time_violation(tau, filt)
    if bad is not None:
        raise ContractError(f"{tau.name} is not a stopping time of {filt.name} (t_{bad[0]}, cell {bad[1]})")
    _, A = doob_decomposition(tau.occurrence(measure.exact), filt, measure)
    return A.with_values(A.values, name=f"A[{tau.name};{filt.name}]")


def compensated_occurrence(tau: RandomTimeTable, filt: Filtration,
                           measure: MeasureVector) -> ProcessTable:
    A = compensator_of_occurrence(tau, filt, measure)
    occ = tau.occurrence(measure.exact)
    return ProcessTable(occ.values - A.values, f"H[{tau.name};{filt.name}]", "adapted", filt.name)


def enveloping_compensator(Z: ProcessTable, filt: Filtration, measure: MeasureVector,
                           tol: float = arith.TOL) -> ProcessTable:
    """Compensator of a pure-jump increasing process summed jump by jump.

    For the n-th jump time zeta_n of Z and each enveloping constant time t_m,
    the mass at t_m is E[dZ_{t_m} 1{zeta_n = t_m} | filt_{m-1}], summed over n.
    The result is checked against the Doob decomposition.
    """
    exact = _exact(Z, measure)
    z = arith.coerce(Z.values, exact)
    if not arith.all_zero(z[:, 0], exact, tol):
        raise ContractError("pure-jump process must start at 0")
    dZ = arith.coerce(Z.increments(), exact)
    if any(v < (0 if exact else -tol) for v in dZ.flat):
        raise ContractError(f"{Z.name or 'process'} is not increasing")
    n_atoms, K1 = z.shape
    # jump_rank[a, m] = n if the jump at t_m is the n-th jump on atom a, else 0
    jumps = np.array([[not arith.is_zero(v, exact, tol) for v in row] for row in dZ])
    jump_rank = np.cumsum(jumps, axis=1) * jumps
    n_max = int(jump_rank.max()) if jump_rank.size else 0
    dB = arith.zeros(z.shape, exact)
    for n in range(1, n_max + 1):
        for m in range(1, K1):
            y = arith.zeros(n_atoms, exact)
            hit = jump_rank[:, m] == n
            y[hit] = dZ[hit, m]
            dB[:, m] = dB[:, m] + cond_exp(y, filt[m - 1], measure, null="zero", time_index=m - 1)
    B = cumsum(dB, exact)
    _, A = doob_decomposition(Z, filt, measure)
    supp = measure.support()
    if not arith.all_close(B[supp], A.values[supp], exact, 1e-10):
        raise InternalConsistencyError("enveloping compensator disagrees with the Doob compensator")
    return ProcessTable(B, f"B[{Z.name}]", "predictable", filt.name)


def covariation(X: ProcessTable, Y: ProcessTable) -> ProcessTable:
    """[X, Y]_t = sum_{s <= t} dX_s dY_s, pathwise, with [X, Y]_0 = 0."""
    if X.shape != Y.shape:
        raise ContractError("covariation needs processes on the same space and grid")
    exact = X.exact and Y.exact
    prod = arith.coerce(X.increments(), exact) * arith.coerce(Y.increments(), exact)
    return ProcessTable(cumsum(prod, exact), f"[{X.name},{Y.name}]")


def sharp_bracket(M: ProcessTable, N: ProcessTable, filt: Filtration,
                  measure: MeasureVector) -> ProcessTable:
    for X in (M, N):
        bad = martingale_violation(X, filt, measure)
        if bad is not None:
            raise ContractError(f"{X.name or 'input'} is not a martingale (t_{bad[0]}, cell {bad[1]})")
    C = covariation(M, N)
    if M is N:
        B = enveloping_compensator(C, filt, measure)
    else:
        _, B = doob_decomposition(C, filt, measure)
    return B.with_values(B.values, name=f"<{M.name},{N.name}>")


def strongly_orthogonal(M: ProcessTable, N: ProcessTable, filt: Filtration,
                        measure: MeasureVector, tol: float = arith.TOL) -> bool:
    B = sharp_bracket(M, N, filt, measure)
    return arith.all_zero(B.values[measure.support()], B.exact, tol)


# --- bracket measures, supports, singularity ---------------------------------

@dataclass(frozen=True)
class BracketMeasure:
    """Per key (atom or scenario): point masses (grid time, mass) plus a flag
    for an absolutely continuous part (used by the mixed model only)."""

    keys: tuple
    points: tuple[tuple[tuple[Any, Any], ...], ...]
    weights: tuple
    lebesgue: tuple[bool, ...] = ()
    name: str = ""
    exact: bool = True

    def __post_init__(self):
        if not self.lebesgue:
            object.__setattr__(self, "lebesgue", tuple(False for _ in self.keys))
        for pts in self.points:
            for _, mass in pts:
                if mass < 0:
                    raise ContractError("bracket masses must be nonnegative")

    @classmethod
    def from_process(cls, A: ProcessTable, space: FiniteFilteredSpace, measure: MeasureVector,
                     name: str = "") -> "BracketMeasure":
        dA = A.increments()
        exact = A.exact
        if not arith.all_zero(A.values[:, 0], exact):
            raise ContractError("bracket process must start at 0")
        points = []
        for row in dA:
            pts = tuple((space.grid[k], row[k]) for k in range(1, len(row))
                        if arith.positive(row[k], exact))
            points.append(pts)
        m = cls(space.atoms, tuple(points), tuple(measure.weights), name=name or A.name, exact=exact)
        if not arith.all_close(m.cumulative(space.grid), A.values, exact, 1e-12):
            raise InternalConsistencyError("bracket measure does not reconstruct its process")
        return m

    def mass_points(self, i: int, tol: float = arith.TOL) -> set:
        return {t for t, mass in self.points[i] if arith.positive(mass, self.exact, tol)}

    def cumulative(self, grid) -> np.ndarray:
        out = arith.zeros((len(self.keys), len(grid)), self.exact)
        pos = {g: k for k, g in enumerate(grid)}
        for i, pts in enumerate(self.points):
            for t, mass in pts:
                out[i, pos[t]:] = out[i, pos[t]:] + mass
        return out

    def is_atomic(self) -> bool:
        return not any(self.lebesgue)

    def record(self) -> dict:
        return {
            "name": self.name,
            "points": {str(k): [[_json(t), _json(m)] for t, m in pts]
                       for k, pts in zip(self.keys, self.points)},
            "lebesgue": {str(k): flag for k, flag in zip(self.keys, self.lebesgue) if flag},
        }


def _json(x):
    from .report import jsonable
    return jsonable(x)


@dataclass(frozen=True)
class PredictableRandomSet:
    member: np.ndarray          # bool, atoms x times
    cond_values: np.ndarray     # generating conditional expectations
    filtration: str

    def section(self, atom: int, grid) -> set:
        return {grid[k] for k in np.flatnonzero(self.member[atom])}

    def complement(self) -> "PredictableRandomSet":
        return PredictableRandomSet(~self.member, self.cond_values, self.filtration)

    def is_predictable(self, filt: Filtration) -> bool:
        ind = ProcessTable(self.member.astype(float))
        from .finite_space import is_predictable
        return is_predictable(ind, filt)


def predictable_support(A: ProcessTable, filt: Filtration,
                        measure: MeasureVector) -> PredictableRandomSet:
    """Membership at (w, t_k) iff E[1{dA_k > 0} | filt_{k-1}](w) > 0."""
    exact = A.exact and measure.exact
    dA = A.increments()
    raw = np.array([[arith.positive(v, A.exact) for v in row] for row in dA])
    raw[:, 0] = False
    vals = arith.zeros(A.shape, exact)
    for k in range(A.shape[1]):
        vals[:, k] = cond_exp(arith.coerce(raw[:, k].astype(int), exact), _prev_partition(filt, k),
                              measure, null="zero", time_index=k - 1)
    member = np.array([[arith.positive(v, exact) for v in row] for row in vals])
    C = PredictableRandomSet(member, vals, filt.name)
    # the section must carry all of dA(w) on every positive-measure atom
    supp = measure.support()
    outside = np.where(member, 0, 1) * np.where(raw, 1, 0)
    if np.any(outside[supp]):
        raise InternalConsistencyError("predictable support misses mass of dA")
    return C


def mass_outside(A: ProcessTable, C: PredictableRandomSet) -> np.ndarray:
    """Per atom: integral of dA over the complement of the section of C."""
    dA = A.increments()
    return np.sum(np.where(C.member, 0, 1) * dA, axis=1)


@dataclass(frozen=True)
class SingularityResult:
    singular: bool
    witness: tuple | None = None
    sets: tuple[PredictableRandomSet, PredictableRandomSet] | None = None

    def record(self) -> dict:
        return {"singular": self.singular,
                "witness": None if self.witness is None else [_json(w) for w in self.witness]}


def mutually_singular(a: BracketMeasure, b: BracketMeasure, filt: Filtration | None = None,
                      measure: MeasureVector | None = None, grid=None,
                      tol: float = arith.TOL) -> SingularityResult:
    """Per positive-measure key, the two measures must share no mass point and
    not both carry an absolutely continuous part.

    With `filt`, `measure` and `grid` given (finite engine), a singular pair
    also gets disjoint predictable supports built from the support of `a`.
    """
    if a.keys != b.keys:
        raise ContractError("bracket measures live on different key sets")
    exact = a.exact and b.exact
    for i, key in enumerate(a.keys):
        if not arith.positive(a.weights[i], exact, 0.0):
            continue
        if a.lebesgue[i] and b.lebesgue[i]:
            return SingularityResult(False, (key, "lebesgue"))
        common = sorted(a.mass_points(i, tol) & b.mass_points(i, tol))
        if common:
            return SingularityResult(False, (key, common[0]))
    if filt is None or measure is None or grid is None:
        return SingularityResult(True)
    A = ProcessTable(a.cumulative(grid), a.name)
    B = ProcessTable(b.cumulative(grid), b.name)
    CA = predictable_support(A, filt, measure)
    CB = CA.complement()
    supp = measure.support()
    if not (arith.all_zero(mass_outside(B, CB)[supp], exact, tol)
            and arith.all_zero(mass_outside(A, CA)[supp], exact, tol)):
        raise InternalConsistencyError("disjoint predictable supports do not carry the measures")
    return SingularityResult(True, None, (CA, CB))


# --- random times -------------------------------------------------------------

@dataclass(frozen=True)
class TimeDecomposition:
    accessible: Any
    totally_inaccessible: Any
    envelope: tuple = ()        # ((grid time, atom mask), ...) or atom times of a law

    def record(self) -> dict:
        env = [_json(t) for t, *_ in self.envelope] if self.envelope and isinstance(self.envelope[0], tuple) \
            else [_json(t) for t in self.envelope]
        return {"envelope": env}


def classify_time(tau, filt: Filtration | None = None) -> TimeDecomposition:
    """Split a random time into accessible and totally inaccessible parts.

    On a finite grid every finite stopping time is accessible, enveloped by the
    constant times t_k on {tau = t_k}. A RandomTimeLaw splits by atoms vs density.
    """
    from .laws import RandomTimeLaw

    if isinstance(tau, RandomTimeLaw):
        return TimeDecomposition(tau.atomic_part(), tau.density_part(), tuple(sorted(tau.atoms)))
    if not isinstance(tau, RandomTimeTable):
        raise UnsupportedModelError(f"cannot classify {type(tau).__name__}")
    if filt is None:
        raise ContractError("a filtration is needed to classify a discrete random time")
    bad = stopping_time_violation(tau, filt)
    if bad is not None:
        raise ContractError(f"{tau.name} is not a stopping time of {filt.name}")
    never = RandomTimeTable(f"{tau.name}^dq", np.full(len(tau.index), len(tau.grid)), tau.grid)
    env = tuple((tau.grid[k], tau.index == k) for k in range(len(tau.grid)) if np.any(tau.index == k))
    return TimeDecomposition(tau, never, env)


@dataclass(frozen=True)
class YoeurpParts:
    continuous: Any
    accessible: Any
    totally_inaccessible: Any
    notes: dict = field(default_factory=dict)


def yoeurp_parts(M, model=None, filt: Filtration | None = None,
                 measure: MeasureVector | None = None) -> YoeurpParts:
    """(continuous, accessible, totally inaccessible) martingale parts.

    Finite engine: everything is accessible. Mixed model: pass the channel
    name ("M" or "H") and the MixedModel; parts come back as batch evaluators.
    """
    if isinstance(M, ProcessTable):
        if filt is not None and measure is not None and not is_martingale(M, filt, measure):
            raise ContractError(f"{M.name or 'input'} is not a martingale")
        exact = M.exact
        zero = ProcessTable(arith.zeros(M.shape, exact), "0")
        v = M.values
        acc = ProcessTable(v - v[:, :1], f"{M.name}^dp")
        return YoeurpParts(zero, acc, zero)
    from .laws import MixedModel, mixed_yoeurp_parts

    if isinstance(model, MixedModel) and isinstance(M, str):
        return mixed_yoeurp_parts(model, M)
    raise UnsupportedModelError(
        "martingale parts are computable only for finite-space processes and mixed-model channels")


def yoeurp_check(parts: YoeurpParts, M: ProcessTable, filt: Filtration, measure: MeasureVector) -> bool:
    """Parts sum to M - M_0 and are pairwise strongly orthogonal."""
    v = M.values
    total = parts.continuous.values + parts.accessible.values + parts.totally_inaccessible.values
    if not arith.all_close(total, v - v[:, :1], M.exact):
        return False
    ps = (parts.continuous, parts.accessible, parts.totally_inaccessible)
    return all(strongly_orthogonal(ps[i], ps[j], filt, measure)
               for i in range(3) for j in range(i + 1, 3))


def law_from_compensator(A: ProcessTable, tau: RandomTimeTable,
                         measure: MeasureVector | None = None) -> list:
    """Law of tau on the grid (last entry: never occurs) rebuilt from its
    compensator in its own natural filtration: with hazard h_k read on any
    atom still alive at t_k, P(tau = t_k) = h_k prod_{j<k} (1 - h_j)."""
    dA = A.increments()
    alive_ok = measure.support() if measure is not None else np.ones(len(tau.index), bool)
    surv = Fraction(1) if A.exact else 1.0
    out = []
    for k in range(dA.shape[1]):
        alive = np.flatnonzero((tau.index >= k) & alive_ok)
        h = dA[alive[0], k] if alive.size else 0
        out.append(h * surv)
        surv = surv * (1 - h)
    out.append(surv)
    return out


def increments_matrix(processes: list[ProcessTable]) -> np.ndarray:
    return np.stack([p.increments() for p in processes], axis=-1)

