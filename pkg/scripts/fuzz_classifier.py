"""Cross-check the bracket classifier against the multiplicity construction
on random two-generator models; print a verdict histogram and timings."""
import argparse
import time
from collections import Counter

import numpy as np

from martrep import arith
from martrep.calculus import covariation
from martrep.enlargement import pstar
from martrep.models import random_structured_model, random_two_generator_model
from martrep.representation import classify_multiplicity, multiplicity, prp_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--float", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    exact = not args.float
    hist, mismatches = Counter(), 0
    t0 = time.perf_counter()
    for i in range(args.n):
        m = random_structured_model(rng, exact) if i % 2 else random_two_generator_model(rng, exact)
        r = classify_multiplicity(m)
        Ps = pstar(m)
        mult = multiplicity(m.G, Ps).multiplicity
        M, N = m.martingale_M(), m.martingale_N()
        zero = arith.all_zero(covariation(M, N).values[m.measureP.support()], exact)
        single = prp_check([M + N], m.G, Ps).holds
        ok = r.verdict == mult and zero == r.accessible.singular and single == r.total.singular
        mismatches += not ok
        hist[r.verdict] += 1
    dt = time.perf_counter() - t0
    print(f"models={args.n} verdicts={dict(sorted(hist.items()))} mismatches={mismatches} "
          f"seconds={dt:.2f} per_model_ms={1000 * dt / args.n:.1f}")


if __name__ == "__main__":
    main()
