"""Finite filtered probability spaces.

Atoms are indexed 0..n-1. A partition of the atoms is stored as an integer
array of cell ids in first-appearance order, so two partitions are equal iff
their arrays are equal. A filtration is one partition per grid time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import arith
from .errors import ContractError, DegenerateCellError, StructuralError

INF = math.inf


def canonical_cells(labels) -> np.ndarray:
    """Relabel an arbitrary cell labelling to first-appearance ids 0,1,2,..."""
    seen: dict = {}
    out = np.empty(len(labels), dtype=int)
    for i, lab in enumerate(labels):
        out[i] = seen.setdefault(lab, len(seen))
    out.setflags(write=False)
    return out


def cells_from_blocks(blocks: Sequence[Sequence[int]], n_atoms: int, path: str = "") -> np.ndarray:
    labels = np.full(n_atoms, -1, dtype=int)
    for b, block in enumerate(blocks):
        for a in block:
            if labels[a] != -1:
                raise StructuralError(f"atom {a} belongs to two cells", path)
            labels[a] = b
    missing = np.flatnonzero(labels < 0)
    if missing.size:
        raise StructuralError(f"atoms {missing.tolist()} belong to no cell", path)
    return canonical_cells(labels)


def refines(fine: np.ndarray, coarse: np.ndarray) -> bool:
    """True iff every cell of `fine` lies inside one cell of `coarse`."""
    owner: dict[int, int] = {}
    for f, c in zip(fine, coarse):
        if owner.setdefault(int(f), int(c)) != c:
            return False
    return True


def common_refinement(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return canonical_cells(list(zip(a.tolist(), b.tolist())))


def blocks(cells: np.ndarray) -> list[list[int]]:
    out: list[list[int]] = [[] for _ in range(int(cells.max()) + 1)] if len(cells) else []
    for atom, c in enumerate(cells):
        out[c].append(atom)
    return out


@dataclass(frozen=True, eq=False)
class Filtration:
    """One partition of the atoms per grid time, each refining the previous one."""

    name: str
    partitions: tuple[np.ndarray, ...]

    def __post_init__(self):
        parts = tuple(canonical_cells(p) for p in self.partitions)
        object.__setattr__(self, "partitions", parts)
        for k in range(1, len(parts)):
            if len(parts[k]) != len(parts[0]):
                raise StructuralError("partition sizes differ", f"filtrations.{self.name}[{k}]")
            if not refines(parts[k], parts[k - 1]):
                raise StructuralError(
                    f"partition at t_{k} does not refine partition at t_{k - 1}",
                    f"filtrations.{self.name}[{k}]",
                )

    def __len__(self) -> int:
        return len(self.partitions)

    def __getitem__(self, k: int) -> np.ndarray:
        return self.partitions[k]

    @property
    def n_times(self) -> int:
        return len(self.partitions)

    def n_cells(self, k: int) -> int:
        return int(self.partitions[k].max()) + 1

    def is_trivial_at(self, k: int) -> bool:
        return self.n_cells(k) == 1

    def renamed(self, name: str) -> "Filtration":
        return Filtration(name, self.partitions)

    def same_as(self, other: "Filtration") -> bool:
        return len(self) == len(other) and all(
            np.array_equal(a, b) for a, b in zip(self.partitions, other.partitions)
        )

    def refines_filtration(self, other: "Filtration") -> bool:
        return all(refines(a, b) for a, b in zip(self.partitions, other.partitions))


@dataclass(frozen=True, eq=False)
class MeasureVector:
    name: str
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights)
        exact = arith.is_exact_array(w)
        w = arith.coerce(w, exact)
        if any(v < 0 for v in w):
            raise StructuralError("negative weight", f"measures.{self.name}")
        total = sum(w, Fraction(0) if exact else 0.0)
        if not arith.is_zero(total - 1, exact):
            raise StructuralError(f"weights sum to {total}, not 1", f"measures.{self.name}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def exact(self) -> bool:
        return self.weights.dtype == object

    def __len__(self) -> int:
        return len(self.weights)

    def support(self) -> np.ndarray:
        return np.array([arith.positive(v, self.exact) for v in self.weights])

    def equivalent(self, other: "MeasureVector") -> bool:
        return bool(np.array_equal(self.support(), other.support()))

    def as_float(self) -> "MeasureVector":
        return MeasureVector(self.name, self.weights.astype(float))

    def prob(self, mask) -> Fraction | float:
        return sum(self.weights[np.asarray(mask, dtype=bool)], Fraction(0) if self.exact else 0.0)

    def expect(self, values) -> Fraction | float:
        v = np.asarray(values)
        return sum(self.weights * v, Fraction(0) if self.exact else 0.0)

    def renamed(self, name: str) -> "MeasureVector":
        return MeasureVector(name, self.weights)


@dataclass(frozen=True, eq=False)
class RandomTimeTable:
    """Per-atom value of a random time: an index into the grid, or len(grid) for +inf."""

    name: str
    index: np.ndarray
    grid: tuple

    @classmethod
    def from_values(cls, name: str, values: Sequence, grid: Sequence) -> "RandomTimeTable":
        grid = tuple(grid)
        lookup = {g: k for k, g in enumerate(grid)}
        idx = np.empty(len(values), dtype=int)
        for a, v in enumerate(values):
            if v is None or (isinstance(v, float) and math.isinf(v)) or v == "inf":
                idx[a] = len(grid)
                continue
            key = next((g for g in grid if g == v), None)
            if key is None:
                raise StructuralError(f"value {v!r} is not a grid time", f"random_times.{name}[{a}]")
            idx[a] = lookup[key]
        return cls(name, idx, grid)

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=int).copy()
        idx.setflags(write=False)
        object.__setattr__(self, "index", idx)

    @property
    def values(self) -> list:
        return [self.grid[i] if i < len(self.grid) else INF for i in self.index]

    def occurrence(self, exact: bool = True) -> "ProcessTable":
        K = len(self.grid)
        vals = (self.index[:, None] <= np.arange(K)[None, :]).astype(int)
        return ProcessTable(arith.coerce(vals, exact), name=f"occ[{self.name}]")

    def is_stopping_time(self, filt: Filtration) -> bool:
        return stopping_time_violation(self, filt) is None


def stopping_time_violation(tau: RandomTimeTable, filt: Filtration) -> tuple[int, int] | None:
    """(time index, cell) where {tau <= t_k} splits a cell, or None."""
    for k in range(len(filt)):
        occurred = tau.index <= k
        cells = filt[k]
        for c in range(filt.n_cells(k)):
            m = occurred[cells == c]
            if m.any() and not m.all():
                return k, c
    return None


@dataclass(frozen=True, eq=False)
class ProcessTable:
    """A real value per (atom, grid index).

    `kind` is "adapted" or "predictable" and `filtration` names the filtration
    the flag refers to; both are declarative and checked by `validate`.
    """

    values: np.ndarray
    name: str = ""
    kind: str = "adapted"
    filtration: str | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=object if np.asarray(self.values).dtype == object else float)
        if v.ndim != 2:
            raise StructuralError("process table must be atoms x times", self.name)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def exact(self) -> bool:
        return self.values.dtype == object

    @property
    def shape(self):
        return self.values.shape

    def increments(self) -> np.ndarray:
        """Column k holds X_k - X_{k-1}; column 0 is zero."""
        v = self.values
        out = arith.zeros(v.shape, self.exact)
        out[:, 1:] = v[:, 1:] - v[:, :-1]
        return out

    def at(self, k: int) -> np.ndarray:
        return self.values[:, k]

    def with_values(self, values, name: str | None = None, kind: str | None = None,
                    filtration: str | None = None) -> "ProcessTable":
        return ProcessTable(values, name if name is not None else self.name,
                            kind or self.kind, filtration if filtration is not None else self.filtration)

    def __add__(self, other: "ProcessTable") -> "ProcessTable":
        return ProcessTable(self.values + other.values, f"({self.name}+{other.name})")

    def __sub__(self, other: "ProcessTable") -> "ProcessTable":
        return ProcessTable(self.values - other.values, f"({self.name}-{other.name})")

    def scaled(self, c) -> "ProcessTable":
        return ProcessTable(self.values * c, f"{c}*{self.name}")

    def is_zero(self, tol: float = arith.TOL) -> bool:
        return arith.all_zero(self.values, self.exact, tol)

    def validate(self, filt: Filtration) -> None:
        if self.kind == "predictable":
            ok = is_predictable(self, filt)
        else:
            ok = is_adapted(self, filt)
        if not ok:
            raise ContractError(f"{self.name or 'process'} is not {self.kind} w.r.t. {filt.name}")

    def as_float(self) -> "ProcessTable":
        return ProcessTable(self.values.astype(float), self.name, self.kind, self.filtration)


def _constant_on_cells(col: np.ndarray, cells: np.ndarray, exact: bool) -> bool:
    first: dict[int, object] = {}
    for c, v in zip(cells, col):
        ref = first.setdefault(int(c), v)
        if not arith.is_zero(v - ref, exact):
            return False
    return True


def is_adapted(X: ProcessTable, filt: Filtration) -> bool:
    return all(_constant_on_cells(X.values[:, k], filt[k], X.exact) for k in range(len(filt)))


def is_predictable(X: ProcessTable, filt: Filtration) -> bool:
    """Predictable at t_k means measurable at t_{k-1}; at t_0, deterministic."""
    n = X.shape[0]
    trivial = np.zeros(n, dtype=int)
    if not _constant_on_cells(X.values[:, 0], trivial, X.exact):
        return False
    return all(_constant_on_cells(X.values[:, k], filt[k - 1], X.exact) for k in range(1, len(filt)))


@dataclass(frozen=True, eq=False)
class FiniteFilteredSpace:
    atoms: tuple[str, ...]
    grid: tuple
    filtrations: Mapping[str, Filtration] = field(default_factory=dict)
    measures: Mapping[str, MeasureVector] = field(default_factory=dict)
    random_times: Mapping[str, RandomTimeTable] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "grid", tuple(self.grid))
        if len(set(self.atoms)) != len(self.atoms):
            raise StructuralError("duplicate atom ids", "atoms")
        if not self.grid or self.grid[0] != 0:
            raise StructuralError("grid must start at 0", "grid")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise StructuralError("grid must be strictly increasing", "grid")
        for name, f in self.filtrations.items():
            if len(f) != len(self.grid):
                raise StructuralError("one partition per grid time required", f"filtrations.{name}")
            if len(f[0]) != self.n_atoms:
                raise StructuralError("partition does not cover the atom set", f"filtrations.{name}")
        for name, m in self.measures.items():
            if len(m) != self.n_atoms:
                raise StructuralError("one weight per atom required", f"measures.{name}")
        for name, t in self.random_times.items():
            if len(t.index) != self.n_atoms:
                raise StructuralError("one value per atom required", f"random_times.{name}")
        object.__setattr__(self, "filtrations", dict(self.filtrations))
        object.__setattr__(self, "measures", dict(self.measures))
        object.__setattr__(self, "random_times", dict(self.random_times))

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_times(self) -> int:
        return len(self.grid)

    def filtration(self, label: str | Filtration) -> Filtration:
        if isinstance(label, Filtration):
            return label
        try:
            return self.filtrations[label]
        except KeyError:
            raise ContractError(f"unknown filtration {label!r}") from None

    def measure(self, label: str | MeasureVector) -> MeasureVector:
        if isinstance(label, MeasureVector):
            return label
        try:
            return self.measures[label]
        except KeyError:
            raise ContractError(f"unknown measure {label!r}") from None

    def time(self, label: str | RandomTimeTable) -> RandomTimeTable:
        if isinstance(label, RandomTimeTable):
            return label
        try:
            return self.random_times[label]
        except KeyError:
            raise ContractError(f"unknown random time {label!r}") from None

    def with_filtration(self, filt: Filtration) -> "FiniteFilteredSpace":
        return self._replace(filtrations={**self.filtrations, filt.name: filt})

    def with_measure(self, m: MeasureVector) -> "FiniteFilteredSpace":
        return self._replace(measures={**self.measures, m.name: m})

    def with_time(self, t: RandomTimeTable) -> "FiniteFilteredSpace":
        return self._replace(random_times={**self.random_times, t.name: t})

    def _replace(self, **kw) -> "FiniteFilteredSpace":
        args = dict(atoms=self.atoms, grid=self.grid, filtrations=self.filtrations,
                    measures=self.measures, random_times=self.random_times)
        args.update(kw)
        return FiniteFilteredSpace(**args)

    def trivial_filtration(self, name: str = "trivial") -> Filtration:
        z = np.zeros(self.n_atoms, dtype=int)
        return Filtration(name, tuple(z for _ in self.grid))

    def discrete_filtration(self, name: str = "discrete") -> Filtration:
        z = np.arange(self.n_atoms)
        return Filtration(name, tuple(z for _ in self.grid))

    def process(self, per_atom: Mapping[str, Sequence], name: str = "", exact: bool = True) -> ProcessTable:
        rows = [per_atom[a] for a in self.atoms]
        return ProcessTable(arith.coerce(rows, exact), name)

    def constant_process(self, c, exact: bool = True, name: str = "") -> ProcessTable:
        return ProcessTable(arith.coerce(np.full((self.n_atoms, self.n_times), c, dtype=object), exact), name)

    def terminal_rv_process(self, rv, filt: Filtration | str, measure: MeasureVector | str,
                            name: str = "") -> ProcessTable:
        """Doob martingale E[rv | filt_k] as a process table."""
        filt = self.filtration(filt)
        measure = self.measure(measure)
        cols = [cond_exp(rv, filt[k], measure, null="zero") for k in range(self.n_times)]
        return ProcessTable(np.stack(cols, axis=1), name)


def _cell_sums(cells: np.ndarray, values: np.ndarray, n_cells: int, exact: bool) -> np.ndarray:
    if exact:
        out = arith.zeros(n_cells, True)
        for c, v in zip(cells, values):
            out[c] += v
        return out
    return np.bincount(cells, weights=values.astype(float), minlength=n_cells)


def cond_exp(rv, partition: np.ndarray, measure: MeasureVector, null: str = "raise",
             time_index: int = -1) -> np.ndarray:
    """Measure-weighted cell average of `rv`, broadcast back to atoms.

    null="raise" raises DegenerateCellError on a zero-measure cell;
    null="zero" puts 0 there (values on null cells are irrelevant a.s.).
    """
    rv = np.asarray(rv)
    exact = measure.exact and arith.is_exact_array(rv)
    w = measure.weights if exact else measure.weights.astype(float)
    x = arith.coerce(rv, exact)
    n_cells = int(partition.max()) + 1
    mass = _cell_sums(partition, w, n_cells, exact)
    num = _cell_sums(partition, w * x, n_cells, exact)
    avg = arith.zeros(n_cells, exact)
    for c in range(n_cells):
        if arith.positive(mass[c], exact, 0.0):
            avg[c] = num[c] / mass[c]
        elif null == "raise":
            raise DegenerateCellError(time_index, c)
    return avg[partition]


def join_filtrations(F: Filtration, H: Filtration, name: str | None = None) -> Filtration:
    if len(F) != len(H) or len(F[0]) != len(H[0]):
        raise StructuralError(f"cannot join {F.name} and {H.name}: grids or atom sets differ")
    parts = tuple(common_refinement(a, b) for a, b in zip(F.partitions, H.partitions))
    return Filtration(name or f"{F.name}v{H.name}", parts)


def natural_filtration_of_occurrence(tau: RandomTimeTable, name: str | None = None) -> Filtration:
    """Partition at t_k generated by {tau = t_j}, j <= k, and {tau > t_k}."""
    K = len(tau.grid)
    parts = []
    for k in range(K):
        labels = [int(i) if i <= k else -1 for i in tau.index]
        parts.append(canonical_cells(labels))
    return Filtration(name or f"nat[{tau.name}]", tuple(parts))


def filtration_of_variable(values: Sequence, n_times: int, reveal_index: int = 0,
                           name: str = "sigma") -> Filtration:
    """Trivial before `reveal_index`, the level sets of `values` from then on."""
    lv = canonical_cells([repr(v) for v in values])
    z = np.zeros(len(values), dtype=int)
    return Filtration(name, tuple(z if k < reveal_index else lv for k in range(n_times)))


def measure_from_map(name: str, atoms: Sequence[str], weights: Mapping[str, object],
                     exact: bool = True) -> MeasureVector:
    return MeasureVector(name, arith.coerce([weights.get(a, 0) for a in atoms], exact))
