"""Payoff expressions over terminal values.

Grammar: numbers, names, + - * /, unary minus, parentheses, comparisons
(== != < <= > >=) which evaluate to 0/1 indicators, and `and`/`or` on
indicators. Example: "(tau == 2) * (eta == 2)".
"""
from __future__ import annotations

import ast
import operator
from typing import Mapping

import numpy as np

from .errors import ContractError

_BIN = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_CMP = {ast.Eq: np.equal, ast.NotEq: np.not_equal, ast.Lt: np.less, ast.LtE: np.less_equal,
        ast.Gt: np.greater, ast.GtE: np.greater_equal}


def parse(expr: str) -> ast.Expression:
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as e:
        raise ContractError(f"bad payoff expression {expr!r}: {e.msg}") from None
    for node in ast.walk(tree):
        ok = isinstance(node, (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Compare, ast.BoolOp,
                               ast.Name, ast.Constant, ast.Load, ast.USub, ast.UAdd, ast.And, ast.Or,
                               *_BIN, *_CMP))
        if not ok or (isinstance(node, ast.Constant) and not isinstance(node.value, (int, float))):
            raise ContractError(f"unsupported syntax in payoff: {type(node).__name__}")
    return tree


def names(expr: str) -> set[str]:
    return {n.id for n in ast.walk(parse(expr)) if isinstance(n, ast.Name)}


def evaluate(expr: str, env: Mapping[str, np.ndarray], size: int | None = None) -> np.ndarray:
    tree = parse(expr)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ContractError(f"unknown name {node.id!r} in payoff; known: {sorted(env)}")
            return env[node.id]
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            return _BIN[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.BoolOp):
            vals = [np.asarray(ev(v)) != 0 for v in node.values]
            f = np.logical_and if isinstance(node.op, ast.And) else np.logical_or
            out = vals[0]
            for v in vals[1:]:
                out = f(out, v)
            return out.astype(float)
        if isinstance(node, ast.Compare):
            left = ev(node.left)
            out = None
            for op, right in zip(node.ops, node.comparators):
                r = ev(right)
                c = _CMP[type(op)](left, r)
                out = c if out is None else np.logical_and(out, c)
                left = r
            return np.asarray(out).astype(float)
        raise ContractError(f"unsupported syntax in payoff: {type(node).__name__}")

    out = np.asarray(ev(tree), dtype=float)
    if size is not None and out.ndim == 0:
        out = np.full(size, float(out))
    return out
