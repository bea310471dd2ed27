"""Print the M2 quantities step by step, exact and in floating point."""
import argparse

from martrep.calculus import compensator_of_occurrence, covariation, sharp_bracket
from martrep.enlargement import g_compensator_of_tau, immersion_check, is_minimal_martingale_measure, pstar
from martrep.models import m2
from martrep.report import jsonable
from martrep.representation import classify_multiplicity


def show(label, value):
    print(f"{label:<28} {jsonable(value)}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--float", action="store_true", help="use floating point instead of rationals")
    args = ap.parse_args()
    model = m2(exact=not args.float)
    P = model.measureP
    M, N = model.martingale_M(), model.martingale_N()
    MN = covariation(M, N)
    Ps = pstar(model)
    show("atoms", list(model.space.atoms))
    show("P", P.weights)
    show("dA^H_1", compensator_of_occurrence(model.tau, model.filtH, P).increments()[:, 1])
    show("d<M>_1", sharp_bracket(M, M, model.filtF, P).values[:, 1])
    show("d<N>_1", sharp_bracket(N, N, model.filtH, P).values[:, 1])
    show("[M,N]_1", MN.values[:, 1])
    show("P*", Ps.weights)
    show("E_P[[M,N]_1]", P.expect(MN.values[:, 1]))
    show("E_P*[[M,N]_1]", Ps.expect(MN.values[:, 1]))
    show("A^G increments", g_compensator_of_tau(model).A.increments())
    show("immersion under P", immersion_check(model).holds)
    mmm = is_minimal_martingale_measure(model)
    show("P is m.m.m.", mmm.holds)
    show("m.m.m. witness", mmm.witness)
    show("multiplicity verdict", classify_multiplicity(model).verdict)


if __name__ == "__main__":
    main()
