"""Dual-mode arithmetic: exact rationals (object arrays of Fraction) or doubles.

A computation runs in exact mode when every numeric input is exact. Mixing a
float into an exact computation silently demotes it to float, which is what
numpy does with object arrays anyway.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import numpy as np

TOL = 1e-12
RANK_TOL = 1e-9


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x)
    # repr() keeps 0.1 as 1/10 instead of the nearest binary fraction
    return Fraction(repr(float(x)))


def is_exact_array(a) -> bool:
    a = np.asarray(a)
    if a.dtype != object:
        return a.dtype.kind in "iub"
    return all(isinstance(v, (Rational, int)) for v in a.flat)


def exact_array(values) -> np.ndarray:
    a = np.asarray(values, dtype=object)
    out = np.empty(a.shape, dtype=object)
    for idx, v in np.ndenumerate(a):
        out[idx] = to_fraction(v)
    return out


def float_array(values) -> np.ndarray:
    return np.asarray(values, dtype=float)


def coerce(values, exact: bool) -> np.ndarray:
    return exact_array(values) if exact else float_array(values)


def zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape)


def is_zero(x, exact: bool, tol: float = TOL) -> bool:
    if exact:
        return x == 0
    return abs(float(x)) <= tol


def all_zero(a, exact: bool, tol: float = TOL) -> bool:
    a = np.asarray(a)
    if exact:
        return all(v == 0 for v in a.flat)
    return bool(np.all(np.abs(a.astype(float)) <= tol))


def all_close(a, b, exact: bool, tol: float = TOL) -> bool:
    return all_zero(np.asarray(a) - np.asarray(b), exact, tol)


def positive(x, exact: bool, tol: float = TOL) -> bool:
    return x > 0 if exact else float(x) > tol


def _rref(m: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    m = [row[:] for row in m]
    rows = len(m)
    cols = len(m[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(rows):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def rank(matrix, exact: bool, tol: float = RANK_TOL) -> int:
    a = np.asarray(matrix)
    if a.size == 0:
        return 0
    if exact:
        _, piv = _rref([[to_fraction(v) for v in row] for row in a])
        return len(piv)
    a = a.astype(float)
    return int(np.linalg.matrix_rank(a, tol=tol * max(1.0, np.abs(a).max())))


def nullspace(matrix, exact: bool, tol: float = RANK_TOL) -> np.ndarray:
    """Columns spanning {x : matrix @ x = 0}."""
    a = np.asarray(matrix)
    n = a.shape[1]
    if exact:
        if a.shape[0] == 0:
            return exact_array(np.eye(n, dtype=int))
        r, piv = _rref([[to_fraction(v) for v in row] for row in a])
        free = [c for c in range(n) if c not in piv]
        basis = zeros((n, len(free)), True)
        for j, f in enumerate(free):
            basis[f, j] = Fraction(1)
            for i, p in enumerate(piv):
                basis[p, j] = -r[i][f]
        return basis
    a = a.astype(float)
    if a.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(a)
    k = int(np.sum(s > tol * max(1.0, s.max() if s.size else 0.0)))
    return vt[k:].T.copy()


def _inverse(m: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(m)
    aug = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    r, piv = _rref(aug)
    if piv[:n] != list(range(n)):
        raise ZeroDivisionError("singular matrix")
    return [row[n:] for row in r]


def _matmul(a, b):
    return [[sum((a[i][k] * b[k][j] for k in range(len(b))), Fraction(0))
             for j in range(len(b[0]))] for i in range(len(a))]


def _transpose(a):
    return [list(col) for col in zip(*a)]


def pinv(matrix, exact: bool) -> np.ndarray:
    """Moore-Penrose pseudo-inverse; exact via a full-rank factorisation."""
    a = np.asarray(matrix)
    if not exact:
        return np.linalg.pinv(a.astype(float))
    rows, cols = a.shape
    if rows == 0 or cols == 0:
        return zeros((cols, rows), True)
    fa = [[to_fraction(v) for v in row] for row in a]
    r, piv = _rref(fa)
    if not piv:
        return zeros((cols, rows), True)
    c = [[fa[i][p] for p in piv] for i in range(rows)]
    rr = r[:len(piv)]
    ct = _transpose(c)
    rt = _transpose(rr)
    left = _matmul(rt, _inverse(_matmul(rr, rt)))
    right = _matmul(_inverse(_matmul(ct, c)), ct)
    return np.array(_matmul(left, right), dtype=object)
