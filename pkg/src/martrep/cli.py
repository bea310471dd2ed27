"""Command line: validate, analyze, simulate.

Exit codes: 0 success, 1 validation failure, 2 assumption refusal,
3 internal-consistency error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import report as rpt
from .errors import (
    AssumptionError,
    ContractError,
    DegenerateCellError,
    InternalConsistencyError,
    MartrepError,
    StructuralError,
    UnsupportedModelError,
)

EXIT_OK, EXIT_INVALID, EXIT_ASSUMPTION, EXIT_INTERNAL = 0, 1, 2, 3


def _exit_code(e: Exception) -> int:
    if isinstance(e, InternalConsistencyError):
        return EXIT_INTERNAL
    if isinstance(e, (AssumptionError, UnsupportedModelError)):
        return EXIT_ASSUMPTION
    return EXIT_INVALID


def _error_record(e: Exception) -> dict:
    rec = {"error": type(e).__name__, "message": str(e)}
    if isinstance(e, StructuralError) and e.path:
        rec["path"] = e.path
    if isinstance(e, AssumptionError):
        rec["assumption"] = e.assumption
    return rec


def _emit(report: dict, fmt: str, out: str | None, rows: list | None = None) -> None:
    if fmt == "json":
        text = rpt.dumps(report)
    elif fmt == "text":
        text = rpt.render_text(rpt.jsonable(report)) + "\n"
    else:
        text = rpt.table_csv(rows if rows is not None else _flatten(rpt.jsonable(report)))
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _flatten(obj, prefix: str = "") -> list[dict]:
    rows = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            rows += _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list) and obj and any(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            rows += _flatten(v, f"{prefix}[{i}]")
    else:
        rows.append({"key": prefix, "value": json.dumps(obj) if isinstance(obj, list) else obj})
    return rows


# --- model loading -------------------------------------------------------------

def _load_joint(path: str):
    from .enlargement import JointModel
    from .model_io import load_model

    space, extras = load_model(path)
    joint = extras["joint"]
    if joint is None:
        raise StructuralError("analysis needs a 'joint' section", "joint")
    gens = joint.get("generators") or {}
    if "H" not in gens:
        raise ContractError("joint.generators.H (the random time tau) is required")
    mart = extras["martingales"]
    return JointModel(space, joint["F"], joint["H"], joint["P"], gens.get("F"), gens["H"],
                      mart.get("M"), mart.get("N"), Path(path).stem)


def cmd_validate(args) -> int:
    from .model_io import load_model

    try:
        doc = json.loads(Path(args.model).read_text())
        if isinstance(doc, dict) and str(doc.get("schema", "")).startswith("martrep.mixed"):
            from .laws import mixed_from_document
            m = mixed_from_document(doc)
            rep = {"valid": True, "kind": "mixed", "cells": len(m.cells), "horizon": m.horizon, "dt": m.dt}
        else:
            space, extras = load_model(doc)
            rep = {"valid": True, "kind": "finite", "atoms": len(space.atoms), "grid": list(space.grid),
                   "filtrations": sorted(space.filtrations), "measures": sorted(space.measures),
                   "random_times": sorted(space.random_times)}
            if extras["joint"] is not None:
                _load_joint(args.model)
                rep["joint"] = True
    except json.JSONDecodeError as e:
        _emit({"valid": False, "error": "StructuralError", "message": f"invalid JSON: {e}"}, args.format, args.out)
        return EXIT_INVALID
    except (OSError, MartrepError) as e:
        _emit({"valid": False, **_error_record(e)}, args.format, args.out)
        return EXIT_INVALID
    _emit(rep, args.format, args.out)
    return EXIT_OK


def analyze_joint(model, measures: list[str] | None = None, payoff: str | None = None) -> tuple[dict, int]:
    """Run the finite pipeline. Returns (report, exit code)."""
    from . import arith
    from .calculus import BracketMeasure, covariation, mutually_singular, sharp_bracket
    from .enlargement import (
        compensated_occurrence_G,
        decoupling_exists,
        g_compensator_of_tau,
        immersion_check,
        is_minimal_martingale_measure,
        pstar,
    )
    from .payoff import evaluate
    from .representation import classify_multiplicity, hedge, kusuoka_triplet, multiplicity, own_filtration_checks

    sp = model.space
    P = model.measureP
    rep: dict = {
        "schema": rpt.REPORT_SCHEMA, "command": "analyze",
        "model": {"name": model.name, "atoms": list(sp.atoms), "grid": list(sp.grid),
                  "P": P.weights, "F": model.F, "H": model.H, "generators": [model.gen_F, model.gen_H]},
        "assumptions": {},
    }
    code = EXIT_OK
    dec = decoupling_exists(model)
    rep["assumptions"]["D"] = dec.record()
    if not dec.exists:
        rep["refused"] = {"assumption": "D", "certificate": dec.certificate}
        return rep, EXIT_ASSUMPTION
    Ps = pstar(model)
    rep["Pstar"] = Ps.weights
    try:
        own = own_filtration_checks(model, P)
        rep["assumptions"]["A1"] = {k: v.record() for k, v in own.items()}
    except AssumptionError as e:
        rep["assumptions"]["A1"] = _error_record(e)
        rep["refused"] = {"assumption": "A1"}
        return rep, EXIT_ASSUMPTION

    M, N = model.martingale_M(P), model.martingale_N(P)
    bm = BracketMeasure.from_process(sharp_bracket(M, M, model.filtF, P), sp, P, "<M>")
    bn = BracketMeasure.from_process(sharp_bracket(N, N, model.filtH, P), sp, P, "<N>")
    MN = covariation(M, N)
    rep["brackets"] = {"M": bm.record(), "N": bn.record(),
                       "singular": mutually_singular(bm, bn).record(),
                       "covariation_MN": MN.values,
                       "E_P[MN_T]": P.expect(MN.values[:, -1]),
                       "E_Pstar[MN_T]": Ps.expect(MN.values[:, -1])}
    cls = classify_multiplicity(model, P, Ps)
    mult = multiplicity(model.G, Ps)
    rep["multiplicity"] = {**mult.record(), "verdict": cls.verdict, "classifier": cls.record()}

    names = measures or [model.P]
    rep["measures"] = {}
    for name in names:
        Q = sp.measure(name)
        entry = {"weights": Q.weights}
        if not Q.equivalent(P):
            entry["note"] = "not equivalent to the reference measure"
        entry["immersion"] = immersion_check(model, Q).record()
        entry["mmm"] = is_minimal_martingale_measure(model, Q, Ps).record()
        gc = g_compensator_of_tau(model, Q)
        entry["g_compensator"] = gc.record()
        entry["Hprime"] = compensated_occurrence_G(model, Q).Hprime.values
        rep["measures"][name] = entry

    try:
        tr = kusuoka_triplet(model, P)
        rep["triplet"] = tr.record()
    except AssumptionError as e:
        rep["triplet"] = {"refused": e.assumption, "detail": str(e)}

    if payoff:
        env = {n: np.array([float(v) for v in t.values]) for n, t in sp.random_times.items()}
        y = evaluate(payoff, env, sp.n_atoms)
        exact = P.exact and bool(np.all(np.isfinite(y)) and np.all(y == np.round(y)))
        y = arith.coerce([int(v) for v in y], True) if exact else y
        MNp = MN.with_values(MN.values, name="[M,N]")
        h_star = hedge(y, [M, N, MNp], model.G, Ps)
        rep["hedging"] = {"payoff": payoff, "under_Pstar_M_N_MN": h_star.record()}
        if "refused" not in rep["triplet"]:
            h_p = hedge(y, [tr.M, tr.Hprime, tr.MH], model.G, P)
            rep["hedging"]["under_P_triplet"] = h_p.record()
    return rep, code


def cmd_analyze(args) -> int:
    from .models import FINITE_PRESETS, finite_preset

    t0 = time.perf_counter()
    try:
        if args.model:
            model = _load_joint(args.model)
        elif args.preset:
            if args.preset not in FINITE_PRESETS:
                raise ContractError(f"unknown preset {args.preset!r}; known: {sorted(FINITE_PRESETS)}")
            model = finite_preset(args.preset)
        else:
            raise ContractError("give --model or --preset")
        rep, code = analyze_joint(model, args.measure, args.payoff)
    except (OSError, json.JSONDecodeError) as e:
        _emit({"error": type(e).__name__, "message": str(e)}, args.format, args.out)
        return EXIT_INVALID
    except DegenerateCellError as e:
        _emit(_error_record(e), args.format, args.out)
        return EXIT_INVALID
    except MartrepError as e:
        _emit(_error_record(e), args.format, args.out)
        return _exit_code(e)
    if args.timing:
        rep["timing_seconds"] = round(time.perf_counter() - t0, 6)
    _emit(rep, args.format, args.out)
    return code


def cmd_simulate(args) -> int:
    from .default_sim import simulation_report
    from .laws import MixedModel, mixed_from_document
    from .models import mixed_preset

    t0 = time.perf_counter()
    try:
        if args.model:
            doc = json.loads(Path(args.model).read_text())
            base = mixed_from_document(doc)
            model = MixedModel(base.joint, base.horizon, args.dt if args.dt else base.dt, base.brownian,
                               base.name or Path(args.model).stem)
        elif args.preset:
            model = mixed_preset(args.preset, dt=args.dt or 1e-3)
        else:
            raise ContractError("give --preset or --model")
        rep, batch = simulation_report(model, args.paths, args.seed, args.payoff, args.grid)
        rep = {"schema": rpt.REPORT_SCHEMA, "command": "simulate", **rep}
        if args.export:
            batch.export(args.export, args.export_format)
            rep["export"] = {"path": str(args.export), "format": args.export_format}
    except (OSError, json.JSONDecodeError) as e:
        _emit({"error": type(e).__name__, "message": str(e)}, args.format, args.out)
        return EXIT_INVALID
    except MartrepError as e:
        _emit(_error_record(e), args.format, args.out)
        return _exit_code(e)
    if args.timing:
        rep["timing_seconds"] = round(time.perf_counter() - t0, 6)
    rows = None
    if args.format == "csv":
        rows = [{"channel": ch, **r} for ch, t in rep["ztests"].items() for r in t["rows"]]
    _emit(rep, args.format, args.out, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="martrep", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "text", "csv"), default="json")

    v = sub.add_parser("validate", help="check a model document")
    v.add_argument("--model", required=True)
    common(v)
    v.set_defaults(func=cmd_validate)

    a = sub.add_parser("analyze", help="run the finite-model pipeline")
    g = a.add_mutually_exclusive_group(required=True)
    g.add_argument("--model")
    g.add_argument("--preset")
    a.add_argument("--measure", action="append", help="measure name to assess (repeatable)")
    a.add_argument("--payoff", help="payoff expression over the random times")
    a.add_argument("--timing", action="store_true")
    common(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="Monte Carlo for the mixed model")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--preset")
    g.add_argument("--model")
    s.add_argument("--paths", type=int, default=10_000)
    s.add_argument("--dt", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--payoff")
    s.add_argument("--grid", choices=("events", "full"), default="events")
    s.add_argument("--export", help="write the path batch here")
    s.add_argument("--export-format", choices=("csv", "npz"), default="csv")
    s.add_argument("--timing", action="store_true")
    common(s)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InternalConsistencyError as e:
        sys.stderr.write(f"internal consistency error: {e}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
