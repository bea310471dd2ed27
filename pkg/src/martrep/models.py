"""Canonical models, presets and random model generators."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Mapping

import numpy as np

from . import arith
from .enlargement import JointModel
from .finite_space import (
    FiniteFilteredSpace,
    MeasureVector,
    RandomTimeTable,
    natural_filtration_of_occurrence,
)
from .laws import DENSITY, MixedModel
from .model_io import dump_model

F = Fraction


def _label(v) -> str:
    return "inf" if isinstance(v, float) and math.isinf(v) else f"{v:g}" if isinstance(v, float) else str(v)


def two_generator_model(joint: Mapping[tuple, object], grid, exact: bool = True, name: str = "") -> JointModel:
    """Atoms = pairs (eta, tau) of the joint law (keys with weight 0 are kept
    as null atoms); F and H are the natural filtrations of the occurrences."""
    keys = list(joint)
    atoms = [f"e{_label(e)}t{_label(t)}" for e, t in keys]
    grid = tuple(grid)
    eta = RandomTimeTable.from_values("eta", [e for e, _ in keys], grid)
    tau = RandomTimeTable.from_values("tau", [t for _, t in keys], grid)
    P = MeasureVector("P", arith.coerce([joint[k] for k in keys], exact))
    space = FiniteFilteredSpace(
        atoms, grid,
        {"F": natural_filtration_of_occurrence(eta, "F"), "H": natural_filtration_of_occurrence(tau, "H")},
        {"P": P}, {"eta": eta, "tau": tau})
    return JointModel(space, "F", "H", "P", "eta", "tau", name=name)


M2_JOINT = {(1, 1): F(1, 10), (1, 2): F(2, 10), (2, 1): F(3, 10), (2, 2): F(4, 10)}


def m2(exact: bool = True) -> JointModel:
    return two_generator_model(M2_JOINT, (0, 1, 2), exact, "m2")


def m2_diagonal(exact: bool = True) -> JointModel:
    """Support {(1,1), (2,2)}: no equivalent decoupling measure."""
    return two_generator_model({(1, 1): F(1, 2), (2, 2): F(1, 2)}, (0, 1, 2), exact, "m2-diagonal")


def independent_2x2(exact: bool = True) -> JointModel:
    pe, pt = (F(3, 10), F(7, 10)), (F(2, 5), F(3, 5))
    joint = {(e, t): pe[e - 1] * pt[t - 1] for e in (1, 2) for t in (1, 2)}
    return two_generator_model(joint, (0, 1, 2), exact, "independent")


def _product(pe: dict, cond: dict) -> dict:
    """Joint law from the law of eta and P(tau = . | eta)."""
    return {(e, t): pe[e] * q for e in pe for t, q in cond[e].items()}


# eta in {1,2,3}, tau in {2,4}; P(tau=2 | eta=2) = P(tau=2 | eta=3) != P(tau=2 | eta=1)
EQUAL_HAZARD_JOINT = _product({1: F(3, 10), 2: F(4, 10), 3: F(3, 10)},
                      {1: {2: F(1, 5), 4: F(4, 5)}, 2: {2: F(3, 5), 4: F(2, 5)}, 3: {2: F(3, 5), 4: F(2, 5)}})
# same eta law, P(tau=2 | eta=2) = 0.8 and P(tau=2 | eta=3) = 0.3
VIOLATING_JOINT = _product({1: F(3, 10), 2: F(4, 10), 3: F(3, 10)},
                           {1: {2: F(1, 5), 4: F(4, 5)}, 2: {2: F(4, 5), 4: F(1, 5)}, 3: {2: F(3, 10), 4: F(7, 10)}})
EXAMPLE_GRID = (0, 1, 2, 3, 4)


def with_density(joint: Mapping[tuple, object], mass) -> dict:
    """Move `mass` of tau's law onto the uniform density, independently of eta."""
    pe: dict = {}
    for (e, _), p in joint.items():
        pe[e] = pe.get(e, 0) + p
    out = {k: p * (1 - mass) for k, p in joint.items()}
    for e, p in pe.items():
        out[(e, DENSITY)] = p * mass
    return out


MIXED_PRESETS: dict[str, dict] = {
    "equal-hazard": dict(joint=EQUAL_HAZARD_JOINT),
    "unequal-hazard": dict(joint=VIOLATING_JOINT),
    "equal-hazard-density": dict(joint=with_density(EQUAL_HAZARD_JOINT, F(1, 5))),
    # M = W alone against an atomic tau: total brackets singular
    "verdict1": dict(joint={(math.inf, 2): F(1, 2), (math.inf, 4): F(1, 2)}),
    # W + H^eta (eta atoms {1,3}) against tau with atoms {2,4} and a density part
    "verdict2": dict(joint={(e, t): pe * pt for e, pe in ((1, F(1, 2)), (3, F(1, 2)))
                            for t, pt in ((2, F(2, 5)), (4, F(2, 5)), (DENSITY, F(1, 5)))}),
    "density-tau": dict(joint={(e, DENSITY): pe for e, pe in ((1, F(3, 10)), (2, F(2, 5)), (3, F(3, 10)))}),
}

FINITE_PRESETS = {
    "m2": m2,
    "m2-diagonal": m2_diagonal,
    "independent": independent_2x2,
    "equal-hazard": lambda exact=True: two_generator_model(EQUAL_HAZARD_JOINT, EXAMPLE_GRID, exact, "equal-hazard"),
    "unequal-hazard": lambda exact=True: two_generator_model(VIOLATING_JOINT, EXAMPLE_GRID, exact,
                                                              "unequal-hazard"),
}


def mixed_preset(name: str, dt: float = 1e-3, horizon: float = 4.0) -> MixedModel:
    from .errors import ContractError

    if name not in MIXED_PRESETS:
        raise ContractError(f"unknown preset {name!r}; known: {sorted(MIXED_PRESETS)}")
    spec = MIXED_PRESETS[name]
    joint = {k: float(v) for k, v in spec["joint"].items()}
    return MixedModel(joint, horizon, dt, spec.get("brownian", True), name)


def finite_preset(name: str, exact: bool = True) -> JointModel:
    from .errors import ContractError

    if name not in FINITE_PRESETS:
        raise ContractError(f"unknown preset {name!r}; known: {sorted(FINITE_PRESETS)}")
    return FINITE_PRESETS[name](exact)


def finite_from_mixed(model: MixedModel, exact: bool = False) -> JointModel:
    """Drop W; keep the atomic part of the law on the integer grid 0..T."""
    if model.density_mass > 0:
        from .errors import UnsupportedModelError
        raise UnsupportedModelError("the finite engine has no density part")
    grid = tuple(range(int(round(model.horizon)) + 1))
    joint = {(e, t): p for e, t, p in model.cells}
    return two_generator_model(joint, grid, exact, model.name)


def document(model: JointModel) -> dict:
    """JSON model document of a two-generator model."""
    return dump_model(model.space.__class__(model.space.atoms, model.space.grid,
                                            {k: model.space.filtrations[k] for k in (model.F, model.H)},
                                            model.space.measures, model.space.random_times),
                      {"F": model.F, "H": model.H, "P": model.P,
                       "generators": {"F": model.gen_F, "H": model.gen_H}})


# --- random models -------------------------------------------------------------

def _random_weights(rng: np.random.Generator, k: int, exact: bool):
    w = rng.integers(1, 10, size=k)
    if exact:
        tot = int(w.sum())
        return [F(int(x), tot) for x in w]
    return list(w / w.sum())


def _random_values(rng: np.random.Generator, K: int, allow_inf: bool, min_count: int = 2) -> list:
    pool = list(range(1, K + 1)) + ([math.inf] if allow_inf else [])
    count = int(rng.integers(min(min_count, len(pool)), min(3, len(pool)) + 1))
    return sorted(pool[i] for i in rng.choice(len(pool), size=count, replace=False))


def random_two_generator_model(rng: np.random.Generator, exact: bool = True,
                               rectangular: bool = True, max_time: int = 3) -> JointModel:
    """Random (eta, tau) law on a grid 0..K; full rectangle support unless
    rectangular=False, in which case one pair may be removed."""
    K = int(rng.integers(1, max_time + 1))
    ev = _random_values(rng, K, True)
    tv = _random_values(rng, K, True)
    keys = [(e, t) for e in ev for t in tv]
    if not rectangular and len(keys) > 2:
        keys.pop(int(rng.integers(len(keys))))
    w = _random_weights(rng, len(keys), exact)
    return two_generator_model(dict(zip(keys, w)), tuple(range(K + 1)), exact, "random")


def random_structured_model(rng: np.random.Generator, exact: bool = True, max_time: int = 4) -> JointModel:
    """Random model where eta and tau tend to branch at different times, so
    both verdicts 1 and 3 show up often."""
    K = int(rng.integers(2, max_time + 1))
    times = list(range(1, K + 1))
    split = int(rng.integers(1, K))
    e_pool = times[:split] + [math.inf]
    t_pool = times[split:] + [math.inf]
    if rng.random() < 0.5:
        t_pool = times + [math.inf]
    ev = sorted(e_pool[i] for i in rng.choice(len(e_pool), size=min(2, len(e_pool)), replace=False))
    tv = sorted(t_pool[i] for i in rng.choice(len(t_pool), size=min(2, len(t_pool)), replace=False))
    keys = [(e, t) for e in ev for t in tv]
    w = _random_weights(rng, len(keys), exact)
    return two_generator_model(dict(zip(keys, w)), tuple(range(K + 1)), exact, "random-structured")


def random_tau_space(rng: np.random.Generator, exact: bool = True, max_time: int = 5) -> tuple:
    """Space carrying only a random time with an atomic law on 1..K or +inf.

    Returns (space, tau, natural filtration, P)."""
    K = int(rng.integers(1, max_time + 1))
    pool = list(range(1, K + 1)) + [math.inf]
    count = int(rng.integers(1, len(pool) + 1))
    vals = sorted(pool[i] for i in rng.choice(len(pool), size=count, replace=False))
    grid = tuple(range(K + 1))
    tau = RandomTimeTable.from_values("tau", vals, grid)
    H = natural_filtration_of_occurrence(tau, "H")
    P = MeasureVector("P", arith.coerce(_random_weights(rng, count, exact), exact))
    space = FiniteFilteredSpace([f"t{_label(v)}" for v in vals], grid, {"H": H}, {"P": P}, {"tau": tau})
    return space, tau, H, P
