"""JSON model documents.

Schema (version "martrep.model/1")::

    {
      "schema": "martrep.model/1",
      "exact": true,
      "atoms": ["a1", "a2", ...],
      "grid": [0, 1, 2],
      "measures": {"P": {"a1": 0.1, "a2": "1/5", ...}},
      "filtrations": {"F": [[["a1", "a2", ...]], [["a1"], ["a2", ...]], ...]},
      "random_times": {
          "tau": {"a1": 1, "a2": "inf"},
          "eta": {"filtration": "F", "values": {"a1": 1, "a2": 2}}
      },
      "joint": {"F": "F", "H": "H", "P": "P",
                "generators": {"F": "eta", "H": "tau"}},
      "martingales": {"M": {"a1": [0, 0.7, 0.7], ...}}
    }

Weights may be JSON numbers or rational strings ("1/10"). With "exact"
(default true) every number is read as a rational, so 0.1 becomes 1/10.
Missing measure entries are weight 0. "joint" and "martingales" are
optional; "joint" is needed for the analysis pipeline. Filtrations named in
"joint" must be trivial at t_0.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from . import arith
from .errors import StructuralError
from .finite_space import (
    FiniteFilteredSpace,
    Filtration,
    MeasureVector,
    ProcessTable,
    RandomTimeTable,
    cells_from_blocks,
    stopping_time_violation,
)

SCHEMA = "martrep.model/1"


def _num(x, exact: bool, path: str):
    if isinstance(x, bool) or not isinstance(x, (int, float, str)):
        raise StructuralError(f"expected a number, got {x!r}", path)
    try:
        return arith.to_fraction(x) if exact else float(arith.to_fraction(x))
    except (ValueError, ZeroDivisionError):
        raise StructuralError(f"not a number: {x!r}", path) from None


def load_model(source: str | Path | dict) -> tuple[FiniteFilteredSpace, dict]:
    """Parse and validate a model document. Returns (space, extras).

    extras holds the parsed "joint" section and "martingales" processes.
    """
    if isinstance(source, dict):
        doc = source
    else:
        try:
            doc = json.loads(Path(source).read_text())
        except json.JSONDecodeError as e:
            raise StructuralError(f"invalid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise StructuralError("top level must be an object")
    if doc.get("schema", SCHEMA) != SCHEMA:
        raise StructuralError(f"unsupported schema {doc.get('schema')!r}", "schema")
    exact = bool(doc.get("exact", True))

    atoms = doc.get("atoms")
    if not isinstance(atoms, list) or not atoms or not all(isinstance(a, str) for a in atoms):
        raise StructuralError("atoms must be a non-empty list of strings", "atoms")
    if len(set(atoms)) != len(atoms):
        raise StructuralError("duplicate atom ids", "atoms")
    index = {a: i for i, a in enumerate(atoms)}

    def atom_index(a, path):
        if a not in index:
            raise StructuralError(f"unknown atom {a!r}", path)
        return index[a]

    grid_raw = doc.get("grid")
    if not isinstance(grid_raw, list) or not grid_raw:
        raise StructuralError("grid must be a non-empty list", "grid")
    grid = [_num(g, exact, f"grid[{i}]") for i, g in enumerate(grid_raw)]
    if grid[0] != 0:
        raise StructuralError("grid must start at 0", "grid[0]")
    for i in range(1, len(grid)):
        if grid[i] <= grid[i - 1]:
            raise StructuralError("grid must be strictly increasing", f"grid[{i}]")

    measures = {}
    for name, wmap in (doc.get("measures") or {}).items():
        path = f"measures.{name}"
        if not isinstance(wmap, dict):
            raise StructuralError("expected an atom -> weight map", path)
        w = arith.zeros(len(atoms), exact)
        for a, v in wmap.items():
            val = _num(v, exact, f"{path}.{a}")
            if val < 0:
                raise StructuralError("negative weight", f"{path}.{a}")
            w[atom_index(a, f"{path}.{a}")] = val
        measures[name] = MeasureVector(name, w)

    filtrations = {}
    for name, parts in (doc.get("filtrations") or {}).items():
        path = f"filtrations.{name}"
        if not isinstance(parts, list) or len(parts) != len(grid):
            raise StructuralError(f"need one partition per grid time ({len(grid)})", path)
        cells = []
        for k, part in enumerate(parts):
            p = f"{path}[{k}]"
            if not isinstance(part, list):
                raise StructuralError("partition must be a list of cells", p)
            blocks = [[atom_index(a, f"{p}[{b}]") for a in blk] for b, blk in enumerate(part)]
            cells.append(cells_from_blocks(blocks, len(atoms), p))
        filtrations[name] = Filtration(name, tuple(cells))

    times = {}
    declared = {}
    for name, spec in (doc.get("random_times") or {}).items():
        path = f"random_times.{name}"
        if isinstance(spec, dict) and "values" in spec:
            declared[name] = spec.get("filtration")
            spec = spec["values"]
        if not isinstance(spec, dict):
            raise StructuralError("expected an atom -> time map", path)
        vals: list[Any] = [None] * len(atoms)
        for a, v in spec.items():
            i = atom_index(a, f"{path}.{a}")
            vals[i] = math.inf if v in ("inf", None) else _num(v, exact, f"{path}.{a}")
        missing = [atoms[i] for i, v in enumerate(vals) if v is None and atoms[i] not in spec]
        if missing:
            raise StructuralError(f"no value for atoms {missing}", path)
        times[name] = RandomTimeTable.from_values(name, vals, grid)

    joint = doc.get("joint")
    if joint is not None:
        for key in ("F", "H", "P"):
            if key not in joint:
                raise StructuralError("missing key", f"joint.{key}")
        for key in ("F", "H"):
            if joint[key] not in filtrations:
                raise StructuralError(f"unknown filtration {joint[key]!r}", f"joint.{key}")
            if int(filtrations[joint[key]][0].max()) != 0:
                raise StructuralError("initial partition must be trivial", f"filtrations.{joint[key]}[0]")
        if joint["P"] not in measures:
            raise StructuralError(f"unknown measure {joint['P']!r}", "joint.P")
        for key, tname in (joint.get("generators") or {}).items():
            if tname not in times:
                raise StructuralError(f"unknown random time {tname!r}", f"joint.generators.{key}")
            declared.setdefault(tname, joint[key])

    for tname, fname in declared.items():
        if fname is None:
            continue
        if fname not in filtrations:
            raise StructuralError(f"unknown filtration {fname!r}", f"random_times.{tname}.filtration")
        bad = stopping_time_violation(times[tname], filtrations[fname])
        if bad is not None:
            raise StructuralError(
                f"not a stopping time of {fname}: event {{{tname} <= t_{bad[0]}}} splits cell {bad[1]}",
                f"random_times.{tname}",
            )

    martingales = {}
    for name, rows in (doc.get("martingales") or {}).items():
        path = f"martingales.{name}"
        table = arith.zeros((len(atoms), len(grid)), exact)
        if set(rows) != set(atoms):
            raise StructuralError("need a row for every atom", path)
        for a, row in rows.items():
            if not isinstance(row, list) or len(row) != len(grid):
                raise StructuralError("need one value per grid time", f"{path}.{a}")
            for k, v in enumerate(row):
                table[index[a], k] = _num(v, exact, f"{path}.{a}[{k}]")
        martingales[name] = ProcessTable(table, name)

    space = FiniteFilteredSpace(tuple(atoms), tuple(grid), filtrations, measures, times)
    return space, {"joint": joint, "martingales": martingales, "exact": exact}


def _jsonable(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, float):
        return x
    return str(x) if x.denominator != 1 else int(x)


def dump_model(space: FiniteFilteredSpace, joint: dict | None = None,
               martingales: dict[str, ProcessTable] | None = None) -> dict:
    from .finite_space import blocks

    exact = all(m.exact for m in space.measures.values()) if space.measures else True
    doc: dict[str, Any] = {
        "schema": SCHEMA,
        "exact": exact,
        "atoms": list(space.atoms),
        "grid": [_jsonable(g) for g in space.grid],
        "measures": {
            n: {a: _jsonable(w) for a, w in zip(space.atoms, m.weights) if w != 0}
            for n, m in space.measures.items()
        },
        "filtrations": {
            n: [[[space.atoms[i] for i in blk] for blk in blocks(p)] for p in f.partitions]
            for n, f in space.filtrations.items()
        },
        "random_times": {
            n: {a: _jsonable(v) for a, v in zip(space.atoms, t.values)}
            for n, t in space.random_times.items()
        },
    }
    if joint:
        doc["joint"] = joint
    if martingales:
        doc["martingales"] = {
            n: {a: [_jsonable(v) for v in row] for a, row in zip(space.atoms, p.values)}
            for n, p in martingales.items()
        }
    return doc
