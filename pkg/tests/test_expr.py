import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psasaki.expr import (
    ArityError,
    DomainError,
    ExprSyntaxError,
    UnboundIdentifierError,
    derivative_oracle,
    eval_jet2,
    eval_jet2_many,
    evaluate,
    parse,
    to_text,
)

from conftest import random_expression_text


def test_parse_examples():
    assert evaluate(parse("sin(x0)*x1", d=2), [[math.pi / 2, 3.0]])[0] == pytest.approx(3.0, abs=1e-15)
    assert evaluate(parse("x0^2 + 1", d=1), [[0.0]])[0] == 1.0


def test_exp_is_its_own_derivative():
    j = eval_jet2(parse("exp(x0)", d=1), [1.0])
    assert j.value == pytest.approx(math.e, rel=1e-15)
    assert j.partials[0] == pytest.approx(math.e, rel=1e-15)
    assert j.second_partials[0, 0] == pytest.approx(math.e, rel=1e-15)


def test_jet_examples():
    j = eval_jet2(parse("x0*x1", d=2), [2.0, 3.0])
    assert j.value == 6.0
    np.testing.assert_array_equal(j.partials, [3.0, 2.0])
    assert j.second_partials[0, 1] == 1.0 and j.second_partials[1, 0] == 1.0
    j = eval_jet2(parse("cos(x0)", d=1), [0.0])
    assert (j.value, j.partials[0], j.second_partials[0, 0]) == (1.0, 0.0, -1.0)
    j = eval_jet2(parse("x0^3", d=1), [2.0])
    assert (j.value, j.partials[0], j.second_partials[0, 0]) == pytest.approx((8.0, 12.0, 12.0), rel=1e-15)


def test_oracle_examples():
    grad, _ = derivative_oracle(parse("sin(x0)", d=1), [1.0], h=1e-3)
    assert abs(grad[0] - math.cos(1.0)) < 1e-10
    grad, hess = derivative_oracle(parse("5", d=2), [0.3, 0.4])
    assert not grad.any() and not hess.any()
    _, hess = derivative_oracle(parse("x0^2", d=1), [3.0], h=1e-2)
    assert abs(hess[0, 0] - 2.0) < 1e-8
    with pytest.raises(ValueError):
        derivative_oracle(parse("x0", d=1), [0.0], h=0.0)


def test_power_is_right_associative():
    assert evaluate(parse("2^3^2", d=0), np.zeros((1, 0)))[0] == 512.0
    assert evaluate(parse("-x0^2", d=1), [[3.0]])[0] == -9.0


def test_errors_carry_position():
    with pytest.raises(ExprSyntaxError) as exc:
        parse("x0 + * x1", d=2)
    assert exc.value.position == 5
    with pytest.raises(UnboundIdentifierError):
        parse("x0 + y", d=1)
    with pytest.raises(ArityError):
        parse("sin(x0, x0)", d=1)
    with pytest.raises(ExprSyntaxError):
        parse("x0 ^ x0", d=1)


def test_domain_error_reports_the_point():
    with pytest.raises(DomainError) as exc:
        evaluate(parse("ln(x0)", d=1), [[1.0], [-0.5]])
    assert exc.value.point == (-0.5,)
    with pytest.raises(DomainError):
        eval_jet2(parse("sqrt(x0)", d=1), [-1.0])
    with pytest.raises(DomainError):
        evaluate(parse("1 / x0", d=1), [[0.0]])


def test_aliases_and_names():
    e = parse("theta * z", names=["theta", "z"])
    assert evaluate(e, [[2.0, 4.0]])[0] == 8.0
    e = parse("t + x0", d=1, aliases={"t": "x0"})
    assert evaluate(e, [[1.5]])[0] == 3.0


def test_hessian_exactly_symmetric(rng):
    for _ in range(50):
        e = parse(random_expression_text(rng, 3), d=3)
        H = eval_jet2(e, rng.uniform(-1, 1, 3)).second_partials
        np.testing.assert_array_equal(H, H.T)


def test_jets_match_oracle_on_random_expressions(rng):
    """1000 random expressions: jet partials agree with the difference oracle."""
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 4))
        e = parse(random_expression_text(rng, d, depth=int(rng.integers(1, 5))), d=d)
        p = rng.uniform(-1, 1, d)
        j = eval_jet2(e, p)
        grad, hess = derivative_oracle(e, p, h=1e-3)
        scale_g = 1.0 + np.max(np.abs(j.partials))
        scale_h = 1.0 + np.max(np.abs(j.second_partials))
        worst = max(worst, np.max(np.abs(grad - j.partials)) / scale_g, np.max(np.abs(hess - j.second_partials)) / scale_h)
    assert worst < 1e-6


def test_round_trip_is_exact(rng):
    for _ in range(200):
        d = int(rng.integers(1, 4))
        e = parse(random_expression_text(rng, d), d=d)
        again = parse(to_text(e), d=d)
        pts = rng.uniform(-1, 1, (100, d))
        np.testing.assert_array_equal(evaluate(e, pts), evaluate(again, pts))


_finite = st.floats(-3, 3, allow_nan=False)
_exprs = st.sampled_from(["sin(x0)*x1", "exp(x0 - x1)", "x0^3 + cos(x1)", "sqrt(2 + x0*x1)", "x1 / (3 + x0)"])


@settings(max_examples=60, deadline=None)
@given(_exprs, _exprs, _finite, _finite, st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_linearity(t1, t2, a, b, x, y):
    e1, e2 = parse(t1, d=2), parse(t2, d=2)
    combo = parse(f"({a!r}) * ({t1}) + ({b!r}) * ({t2})", d=2)
    (j1, j2, jc) = eval_jet2_many([e1, e2, combo], [[x, y]])
    for part in ("val", "grad", "hess"):
        lhs = getattr(jc, part)
        rhs = a * getattr(j1, part) + b * getattr(j2, part)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * (1 + np.max(np.abs(rhs)))


@settings(max_examples=60, deadline=None)
@given(_exprs, _exprs, st.floats(-0.9, 0.9), st.floats(-0.9, 0.9))
def test_leibniz(t1, t2, x, y):
    e1, e2 = parse(t1, d=2), parse(t2, d=2)
    prod = parse(f"({t1}) * ({t2})", d=2)
    j1, j2, jp = eval_jet2_many([e1, e2, prod], [[x, y]])
    u, v = j1.val[0], j2.val[0]
    gu, gv = j1.grad[0], j2.grad[0]
    hess = j1.hess[0] * v + np.outer(gu, gv) + np.outer(gv, gu) + u * j2.hess[0]
    scale = 1 + np.max(np.abs(hess))
    assert abs(jp.val[0] - u * v) <= 1e-12 * (1 + abs(u * v))
    assert np.max(np.abs(jp.grad[0] - (gu * v + u * gv))) <= 1e-12 * scale
    assert np.max(np.abs(jp.hess[0] - hess)) <= 1e-12 * scale
