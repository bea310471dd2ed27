"""Continuous-time random-time laws and the mixed Brownian + jump model.

The mixed model has a Brownian motion W independent of a pair (eta, tau)
with a finite joint law. eta takes finitely many times (or +inf, "never");
tau takes finitely many times or DENSITY, meaning "drawn uniformly on (0, T]".
F is generated by W and the occurrence of eta, H by the occurrence of tau,
G = F v H. All compensators below are closed forms in terms of the joint law.

Reading of the conditional probabilities: at a time u the G-information on
eta is "eta = v" if v < u and "eta >= u" otherwise. So a hazard at an atom a
is conditioned on whether each eta-atom strictly before a has occurred.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .calculus import BracketMeasure, YoeurpParts
from .errors import ContractError

DENSITY = "density"
_COMMENSURATE_TOL = 1e-9


@dataclass(frozen=True)
class LawPart:
    kind: str                   # "atomic" or "density"
    support: tuple
    mass: float


@dataclass(frozen=True)
class RandomTimeLaw:
    """Atoms (time -> mass) plus a uniform density on (0, horizon]."""

    atoms: Mapping[float, float]
    density_mass: float = 0.0
    horizon: float = 1.0

    def __post_init__(self):
        atoms = {float(t): float(m) for t, m in self.atoms.items() if float(m) > 0}
        if any(m < 0 for m in self.atoms.values()) or self.density_mass < 0:
            raise ContractError("negative mass")
        if any(not 0 < t <= self.horizon for t in atoms):
            raise ContractError("atoms must lie in (0, T]")
        total = sum(atoms.values()) + self.density_mass
        if abs(total - 1) > 1e-12:
            raise ContractError(f"law has total mass {total}")
        object.__setattr__(self, "atoms", dict(sorted(atoms.items())))

    def atomic_part(self) -> LawPart:
        return LawPart("atomic", tuple(self.atoms), sum(self.atoms.values()))

    def density_part(self) -> LawPart:
        support = (0.0, self.horizon) if self.density_mass > 0 else ()
        return LawPart("density", support, float(self.density_mass))

    def is_atomic(self) -> bool:
        return self.density_mass == 0


@dataclass(frozen=True)
class _TauLaw:
    """Law of tau conditional on an eta-event, normalised."""

    atoms: dict
    rho: float

    def ge(self, x, horizon):
        """P(tau >= x), vectorised in x."""
        x = np.asarray(x, dtype=float)
        out = self.rho * np.clip(1 - x / horizon, 0, None)
        for a, p in self.atoms.items():
            out = out + p * (a >= x)
        return out

    def gt(self, x, horizon):
        x = np.asarray(x, dtype=float)
        out = self.rho * np.clip(1 - x / horizon, 0, None)
        for a, p in self.atoms.items():
            out = out + p * (a > x)
        return out

    def hazard(self, a, horizon) -> float:
        den = float(self.ge(a, horizon))
        return self.atoms.get(a, 0.0) / den if den > 0 else 0.0


@dataclass(frozen=True)
class MixedModel:
    joint: Mapping[tuple, float]
    horizon: float = 4.0
    dt: float = 1e-3
    brownian: bool = True
    name: str = ""
    cells: tuple = field(init=False, repr=False)

    def __post_init__(self):
        cells = []
        for key, p in self.joint.items():
            eta, tau = key
            p = float(p)
            if p < 0:
                raise ContractError(f"negative probability at {key}")
            if p == 0:
                continue
            eta = math.inf if eta in (None, "inf") else float(eta)
            if tau != DENSITY:
                tau = float(tau)
                self._check_time(tau, "tau")
            if not math.isinf(eta):
                self._check_time(eta, "eta")
            cells.append((eta, tau, p))
        total = sum(c[2] for c in cells)
        if abs(total - 1) > 1e-12:
            raise ContractError(f"joint law sums to {total}")
        cells.sort(key=lambda c: (c[0], math.inf if c[1] == DENSITY else c[1]))
        object.__setattr__(self, "cells", tuple(cells))

    def _check_time(self, v: float, what: str):
        if not 0 < v <= self.horizon + 1e-12:
            raise ContractError(f"{what} value {v} outside (0, T]")
        r = v / self.dt
        if abs(r - round(r)) > _COMMENSURATE_TOL * max(1.0, r):
            raise ContractError(f"{what} value {v} is not a multiple of dt={self.dt}")

    # --- laws ---------------------------------------------------------------

    @property
    def eta_values(self) -> list:
        return sorted({c[0] for c in self.cells})

    @property
    def eta_atoms(self) -> list:
        return [v for v in self.eta_values if not math.isinf(v)]

    @property
    def tau_atoms(self) -> list:
        return sorted({c[1] for c in self.cells if c[1] != DENSITY})

    @property
    def density_mass(self) -> float:
        return sum(p for _, t, p in self.cells if t == DENSITY)

    def tau_law(self) -> RandomTimeLaw:
        atoms: dict = {}
        for _, t, p in self.cells:
            if t != DENSITY:
                atoms[t] = atoms.get(t, 0.0) + p
        return RandomTimeLaw(atoms, self.density_mass, self.horizon)

    def prob(self, eta: Callable[[float], bool] | None = None,
             tau: Callable[[object], bool] | None = None) -> float:
        return sum(p for e, t, p in self.cells
                   if (eta is None or eta(e)) and (tau is None or tau(t)))

    def eta_hazard(self, e: float) -> float:
        den = self.prob(lambda v: v >= e)
        return self.prob(lambda v: v == e) / den if den > 0 else 0.0

    def _tau_given(self, eta_pred) -> _TauLaw:
        mass = self.prob(eta_pred)
        if mass <= 0:
            return _TauLaw({}, 0.0)
        atoms: dict = {}
        rho = 0.0
        for e, t, p in self.cells:
            if not eta_pred(e):
                continue
            if t == DENSITY:
                rho += p / mass
            else:
                atoms[t] = atoms.get(t, 0.0) + p / mass
        return _TauLaw(atoms, rho)

    def tau_given_info(self, v: float, u: float, strict: bool = True) -> _TauLaw:
        """Law of tau given the G-information on eta just before u (strict)
        or over an open interval starting at u (strict=False: eta <= u known)."""
        seen = v < u if strict else v <= u
        if seen:
            return self._tau_given(lambda e, v=v: e == v)
        return self._tau_given(lambda e, u=u: e >= u if strict else e > u)

    def g_hazard(self, v: float, a: float) -> float:
        return self.tau_given_info(v, a).hazard(a, self.horizon)

    def h_hazard(self, a: float) -> float:
        return self._tau_given(lambda e: True).hazard(a, self.horizon)

    def breakpoints(self) -> list:
        pts = {0.0, float(self.horizon)} | set(self.eta_atoms) | set(self.tau_atoms)
        return sorted(p for p in pts if p <= self.horizon)

    def is_rectangular(self) -> tuple[bool, tuple | None]:
        """Support of the joint law is a product set (the decoupling condition)."""
        supp = {(e, t) for e, t, _ in self.cells}
        for e in sorted({s[0] for s in supp}):
            for t in sorted({s[1] for s in supp}, key=str):
                if (e, t) not in supp:
                    return False, (e, t)
        return True, None


# --- closed-form compensators ---------------------------------------------------

def _continuous_part(model: MixedModel, law_on_piece: Callable[[float], _TauLaw], s: np.ndarray) -> np.ndarray:
    """sum over pieces (b_j, b_{j+1}] of log P(tau > b_j | I_j) / P(tau >= min(s, b_{j+1}) | I_j)."""
    T = model.horizon
    B = model.breakpoints()
    out = np.zeros_like(s, dtype=float)
    for b0, b1 in zip(B[:-1], B[1:]):
        law = law_on_piece(b0)
        if law.rho == 0:
            continue
        active = s > b0
        if not np.any(active):
            continue
        x = np.minimum(s[active], b1)
        num = float(law.gt(b0, T))
        den = law.ge(x, T)
        with np.errstate(divide="ignore"):
            out[active] += np.log(num) - np.log(den)
    return out


class TripletEvaluator:
    """Closed-form evaluators of M, H, H' and [M,H] on batches.

    Arguments are arrays: eta (n,), tau (n,) with nan for density draws
    replaced by their sampled value, tau_atom (n,) bool, t (R,).
    Outputs have shape (n, R).
    """

    def __init__(self, model: MixedModel):
        self.model = model
        self._eta_h = {e: model.eta_hazard(e) for e in model.eta_atoms}
        self._h_h = {a: model.h_hazard(a) for a in model.tau_atoms}
        self._g_h = {(v, a): model.g_hazard(v, a) for v in model.eta_values for a in model.tau_atoms}

    # eta side
    def A_eta(self, eta, t):
        out = np.zeros((len(eta), len(t)))
        for e, h in self._eta_h.items():
            out += h * np.outer(eta >= e, t >= e)
        return out

    def M(self, eta, W, t):
        occ = (eta[:, None] <= t[None, :]).astype(float)
        w = W if self.model.brownian else 0.0
        return w + occ - self.A_eta(eta, t)

    # tau side
    def A_H(self, tau, tau_atom, t):
        m = self.model
        s = np.minimum(t[None, :], tau[:, None])
        out = _continuous_part(m, lambda b: m._tau_given(lambda e: True), s.ravel()).reshape(s.shape)
        for a, h in self._h_h.items():
            out += h * np.outer(tau >= a, t >= a)
        return out

    def A_G(self, eta, tau, tau_atom, t):
        m = self.model
        s = np.minimum(t[None, :], tau[:, None])
        out = np.zeros(s.shape)
        for v in m.eta_values:
            rows = eta == v
            if not np.any(rows):
                continue
            piece = (lambda b, v=v: m.tau_given_info(v, b, strict=False))
            out[rows] = _continuous_part(m, piece, s[rows].ravel()).reshape(s[rows].shape)
            for a in m.tau_atoms:
                h = self._g_h[(v, a)]
                if h:
                    out[rows] += h * np.outer(tau[rows] >= a, t >= a)
        return out

    def H(self, tau, tau_atom, t):
        occ = (tau[:, None] <= t[None, :]).astype(float)
        return occ - self.A_H(tau, tau_atom, t)

    def Hprime(self, eta, tau, tau_atom, t):
        occ = (tau[:, None] <= t[None, :]).astype(float)
        return occ - self.A_G(eta, tau, tau_atom, t)

    def jump_eta(self, eta, e):
        return (eta == e).astype(float) - (eta >= e) * self._eta_h.get(e, 0.0)

    def jump_H(self, tau, tau_atom, a):
        return (tau_atom & (tau == a)).astype(float) - (tau >= a) * self._h_h.get(a, 0.0)

    def MH(self, eta, tau, tau_atom, t):
        """[M,H]: W is continuous and H has no Brownian part, so only
        simultaneous jumps at common atoms contribute."""
        out = np.zeros((len(eta), len(t)))
        for a in sorted(set(self.model.eta_atoms) & set(self.model.tau_atoms)):
            out += np.outer(self.jump_eta(eta, a) * self.jump_H(tau, tau_atom, a), t >= a)
        return out

    def readings(self) -> dict:
        """Conditional probabilities used by the evaluators, for the report."""
        def key(v):
            return "inf" if math.isinf(v) else v
        return {
            "eta_hazard": {str(e): h for e, h in self._eta_h.items()},
            "tau_hazard_H": {str(a): h for a, h in self._h_h.items()},
            "tau_hazard_G": {f"eta={key(v)},t={a}": h for (v, a), h in self._g_h.items()},
            "conditioning": "eta-information at t- is eta itself if eta < t, else the event {eta >= t}",
        }


def exact_triplet(model: MixedModel) -> TripletEvaluator:
    return TripletEvaluator(model)


def g_compensator_atoms(model: MixedModel, tol: float = 0.0) -> set:
    """Times where A^{P,G} can jump: atoms of tau with a nonzero G-hazard."""
    return {a for a in model.tau_atoms for v in model.eta_values if model.g_hazard(v, a) > tol}


def mixed_yoeurp_parts(model: MixedModel, channel: str) -> YoeurpParts:
    """Parts of M or H as batch evaluators f(eta, tau, tau_atom, W, t)."""
    ev = exact_triplet(model)
    zero = (lambda eta, tau, tau_atom, W, t: np.zeros((len(eta), len(t))))
    if channel == "M":
        cont = (lambda eta, tau, tau_atom, W, t: W if model.brownian else np.zeros((len(eta), len(t))))
        acc = (lambda eta, tau, tau_atom, W, t: (eta[:, None] <= t[None, :]) - ev.A_eta(eta, t))
        return YoeurpParts(cont, acc, zero, {"channel": "M"})
    if channel == "H":
        def acc(eta, tau, tau_atom, W, t):
            out = np.zeros((len(tau), len(t)))
            for a in model.tau_atoms:
                out += np.outer(ev.jump_H(tau, tau_atom, a), t >= a)
            return out

        def inacc(eta, tau, tau_atom, W, t):
            return ev.H(tau, tau_atom, t) - acc(eta, tau, tau_atom, W, t)
        return YoeurpParts(zero, acc, inacc, {"channel": "H"})
    raise ContractError(f"unknown mixed channel {channel!r}")


# --- brackets and the local-dimension multiplicity count -------------------------

def _scenario_keys(model: MixedModel):
    return tuple((e, t) for e, t, _ in model.cells), tuple(p for _, _, p in model.cells)


def mixed_brackets(model: MixedModel, accessible_only: bool = False) -> tuple[BracketMeasure, BracketMeasure]:
    """d<M>^{P,F} and d<H>^{P,H} per scenario (eta value, tau value).

    Atomic masses h(1-h) sit at atoms with hazard strictly inside (0,1);
    the Lebesgue flag marks the Brownian bracket and the density-driven
    part of tau's compensator."""
    keys, weights = _scenario_keys(model)
    T = model.horizon
    rho = model.density_mass
    pm, pn, lm, ln = [], [], [], []
    for e_val, t_val in keys:
        pts = []
        for e in model.eta_atoms:
            h = model.eta_hazard(e)
            if e <= e_val and 0 < h < 1:
                pts.append((e, h * (1 - h)))
        pm.append(tuple(pts))
        lm.append(model.brownian and not accessible_only)
        pts = []
        for a in model.tau_atoms:
            h = model.h_hazard(a)
            alive = (a < T) if t_val == DENSITY else (a <= t_val)
            if alive and 0 < h < 1:
                pts.append((a, h * (1 - h)))
        pn.append(tuple(pts))
        ln.append(rho > 0 and not accessible_only)
    tag = "^dp" if accessible_only else ""
    return (BracketMeasure(keys, tuple(pm), weights, tuple(lm), f"<M{tag}>", exact=False),
            BracketMeasure(keys, tuple(pn), weights, tuple(ln), f"<H{tag}>", exact=False))


@dataclass(frozen=True)
class LocalDimension:
    multiplicity: int
    diffusive: int
    at_atoms: dict


def mixed_multiplicity(model: MixedModel) -> LocalDimension:
    """Multiplicity of G under P* by counting local dimensions.

    Under P* eta and tau are independent with their own marginals. Between
    atoms the noise is the Brownian motion plus the density-driven jump of
    tau: dimension = brownian + [density mass > 0]. At an atom a the node
    has (branches of eta) x (branches of tau) children, a variable branching
    iff its hazard at a lies strictly in (0, 1); dimension = children - 1.
    """
    T = model.horizon
    diff = int(model.brownian) + int(model.density_mass > 0)
    tau_law = model._tau_given(lambda e: True)
    at = {}
    for a in sorted(set(model.eta_atoms) | set(model.tau_atoms)):
        he = model.eta_hazard(a) if a in model.eta_atoms else 0.0
        ht = tau_law.hazard(a, T) if a in model.tau_atoms else 0.0
        alive = model.prob(lambda v: v >= a) > 0 and float(tau_law.ge(a, T)) > 0
        if not alive:
            continue
        children = (2 if 0 < he < 1 else 1) * (2 if 0 < ht < 1 else 1)
        at[a] = children - 1
    return LocalDimension(max([diff, *at.values()]), diff, at)


MIXED_SCHEMA = "martrep.mixed/1"


def mixed_from_document(doc: dict) -> MixedModel:
    """{"schema": "martrep.mixed/1", "horizon": 4, "dt": 0.001, "brownian": true,
    "joint": [[eta, tau, p], ...]} with eta "inf" for never and tau "density"."""
    from .errors import StructuralError

    if doc.get("schema") != MIXED_SCHEMA:
        raise StructuralError(f"expected schema {MIXED_SCHEMA!r}", "schema")
    rows = doc.get("joint")
    if not isinstance(rows, list) or not rows:
        raise StructuralError("joint must be a non-empty list of [eta, tau, p]", "joint")
    joint = {}
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 3:
            raise StructuralError("expected [eta, tau, p]", f"joint[{i}]")
        e, t, p = row
        try:
            e = math.inf if e == "inf" else float(e)
            t = DENSITY if t == DENSITY else float(t)
            p = float(eval_fraction(p))
        except (TypeError, ValueError, ZeroDivisionError):
            raise StructuralError("bad entry", f"joint[{i}]") from None
        joint[(e, t)] = joint.get((e, t), 0.0) + p
    try:
        return MixedModel(joint, float(doc.get("horizon", 4.0)), float(doc.get("dt", 1e-3)),
                          bool(doc.get("brownian", True)), str(doc.get("name", "")))
    except ContractError as e:
        raise StructuralError(str(e), "joint") from None


def eval_fraction(x):
    from fractions import Fraction
    return Fraction(x) if isinstance(x, str) else x


def mixed_to_document(model: MixedModel) -> dict:
    return {"schema": MIXED_SCHEMA, "name": model.name, "horizon": model.horizon, "dt": model.dt,
            "brownian": model.brownian,
            "joint": [["inf" if math.isinf(e) else e, t, p] for e, t, p in model.cells]}
