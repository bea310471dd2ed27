import json
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from martrep.errors import ContractError
from martrep.payoff import evaluate, names
from martrep.report import dumps, jsonable, render_text, table_csv

ENV = {"eta": np.array([1.0, 2.0, 3.0]), "tau": np.array([2.0, 4.0, 2.0])}


def test_indicator_product():
    assert list(evaluate("(tau == 2) * (eta == 2)", ENV)) == [0, 0, 0]
    assert list(evaluate("(tau == 2) * (eta >= 2)", ENV)) == [0, 0, 1]


def test_boolean_and_chained_comparison():
    assert list(evaluate("eta == 1 or tau == 4", ENV)) == [1, 1, 0]
    assert list(evaluate("1 < eta <= 2", ENV)) == [0, 1, 0]


def test_arithmetic_and_constant_broadcast():
    assert list(evaluate("-eta / 2 + 1", ENV)) == [0.5, 0.0, -0.5]
    assert list(evaluate("3", ENV, 3)) == [3, 3, 3]
    assert names("eta * (tau > 1)") == {"eta", "tau"}


@pytest.mark.parametrize("expr", ["__import__('os')", "eta.real", "eta[0]", "'a'", "lambda: 1", "eta ** 2"])
def test_rejects_unsupported_syntax(expr):
    with pytest.raises(ContractError):
        evaluate(expr, ENV)


def test_unknown_name_and_syntax_error():
    with pytest.raises(ContractError):
        evaluate("zeta", ENV)
    with pytest.raises(ContractError):
        evaluate("(eta", ENV)


@given(st.fractions())
def test_jsonable_fraction_round_trips(x):
    out = jsonable(x)
    assert F(out) == x if isinstance(out, str) else out == x


def test_jsonable_special_values():
    out = jsonable({"a": np.array([F(1, 2), F(2)], dtype=object), "b": math.inf, "c": float("nan"),
                    "d": {3, 1}, "e": np.int64(4), "f": np.bool_(True)})
    assert out == {"a": ["1/2", 2], "b": "inf", "c": None, "d": [1, 3], "e": 4, "f": True}
    assert json.loads(dumps({"x": F(1, 3)})) == {"x": "1/3"}


def test_text_and_csv_rendering():
    rep = {"a": 1, "b": {"c": 0.123456789}, "rows": [{"x": 1, "y": 2}]}
    text = render_text(rep)
    assert "a: 1" in text and "  c: 0.123457" in text and "- x=1, y=2" in text
    assert table_csv([{"a": 1}, {"a": 2, "b": 3}]) == "a,b\n1,\n2,3\n"
    assert table_csv([]) == ""
