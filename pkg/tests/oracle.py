"""Brute-force reference computations on joint laws {(eta, tau): p}.

Written directly from definitions with dictionaries and Fractions, without
the partition machinery of the package.
"""
from fractions import Fraction
import math


def marginal(joint, which):
    out = {}
    for (e, t), p in joint.items():
        k = e if which == 0 else t
        out[k] = out.get(k, 0) + p
    return out


def prob(joint, pred):
    return sum((p for k, p in joint.items() if pred(*k)), Fraction(0))


def hazard(law, t):
    """P(X = t | X >= t) for a law {value: p}."""
    den = sum((p for v, p in law.items() if v >= t), Fraction(0))
    return law.get(t, 0) / den if den else Fraction(0)


def compensated(value, law, t_grid):
    """Compensated occurrence of a random time with `law`, in its natural
    filtration, evaluated on a path where it equals `value`."""
    out = []
    acc = Fraction(0)
    for t in t_grid:
        if t > 0 and value >= t:
            acc += hazard(law, t)
        out.append((1 if value <= t else 0) - acc)
    return out


def product_measure(joint):
    pe, pt = marginal(joint, 0), marginal(joint, 1)
    return {(e, t): pe[e] * pt[t] for (e, t) in joint}


def covariation(joint, grid):
    """[M, N] per scenario with M, N the compensated occurrences."""
    le, lt = marginal(joint, 0), marginal(joint, 1)
    out = {}
    for e, t in joint:
        m = compensated(e, le, grid)
        n = compensated(t, lt, grid)
        acc, vals = Fraction(0), [Fraction(0)]
        for k in range(1, len(grid)):
            acc += (m[k] - m[k - 1]) * (n[k] - n[k - 1])
            vals.append(acc)
        out[(e, t)] = vals
    return out


def expectation(weights, values):
    return sum((weights[k] * values[k] for k in weights), Fraction(0))


def g_hazard(joint, grid, k, e_seen, alive_eta):
    """P(tau = t_k | G_{k-1}) on a G-cell described by the eta-information
    (e_seen: eta value if eta <= t_{k-1} else None) and tau alive."""
    tk, tprev = grid[k], grid[k - 1]

    def in_cell(e, t):
        eta_ok = (e == e_seen) if e_seen is not None else (e > tprev)
        return eta_ok and t > tprev
    den = prob(joint, in_cell)
    num = prob(joint, lambda e, t: in_cell(e, t) and t == tk)
    return num / den if den else Fraction(0)


INF = math.inf
