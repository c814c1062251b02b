#!/usr/bin/env python3
"""
Tests for the expression core: grammar, canonical forms, zero testing,
formal integrals and evaluation.
"""

import os
import random
import sys

import mpmath
import pytest
import sympy

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config  # noqa: E402
from expr_core import (  # noqa: E402
    NU,
    FormalIntegral,
    NormalizationError,
    ParseError,
    RationalFunction,
    canonical_parts,
    choose_basepoint,
    differentiate,
    evaluate,
    formal_integral,
    is_scalar,
    is_zero,
    normalize,
    parse_expression,
    same_value,
    substitute,
    symbol,
    to_scalar,
    to_text,
    x,
    y,
)

CORPUS = [
    "(alpha*x + 1/x + 1/x^3)*y^3 + y^2",
    "2*(x^2 - alpha)*y^3 + 2*(x + 1)*y^2",
    "alpha*(1 - x^2)*y^3/(2*x) + (alpha - 1)*y^2 - alpha*y/(2*x)",
    "-y^3/x - (alpha + x^2)*y^2/x^2",
    "(3*y*(1 + y) - 4*x)/(x*(8*y - 1))",
    "y^3 - 2*x*y^2",
    "y^3/(4*x^2) - y^2",
    "y^3 - (x + 1)*y^2/x",
    "(y^2 + 1)*(1 - 2*y*x)/(x^2 + 1)",
    "-1/(y + x)",
    "(x + y - 1)*exp(y)",
    "x*exp(-y) + log(y^2 + 1)/3",
    "atan(x)*y + 1/2",
    "Int(exp(y^2), y)",
    "x^(1/2)*y + x",
    "(1 + I)*x - I*y^2",
    "s1*x*y + s0*y + r1*x + r0",
    "k3*y^3 + k2*y^2 + k1*y + k0",
    "(2*t - k1)/2",
    "sqrt(3 - 6*t)",
    "-(a3*y^3 + a2*y^2 + a1*y + a0)/((s1*x + s0)*y + r1*x + r0)",
    "kappa^2/2",
    "exp(2*x)*y^2 - exp(x)",
    "log(x)/x",
    "1/(x^2 + 1)^3",
    "(x - 1)^5*(y + 2)^2",
    "beta/(alpha*x^2 + beta*x + gamma)",
    "-y^3/(x^2*(x - 1)^2)",
    "(4*x^4 + 5*x^2 + 1)*y^3/(2*x^3)",
    "3/7*x - 5/11",
    "pi*x + E",
]


def test_parse_print_parse_is_stable():
    for text in CORPUS:
        once = parse_expression(text)
        twice = parse_expression(to_text(once))
        assert to_text(twice) == to_text(once), text


def test_caret_is_power():
    assert parse_expression("x^3") == x**3
    assert to_text(x**3) == "x^3"


def test_rationals_are_exact():
    value = parse_expression("0.5*x")
    assert value == sympy.Rational(1, 2) * x


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse_expression("x + $")
    assert info.value.position == 4


def test_unbalanced_parentheses():
    with pytest.raises(ParseError):
        parse_expression("(x + 1")
    with pytest.raises(ParseError):
        parse_expression("x + 1)")


def test_empty_expression():
    with pytest.raises(ParseError):
        parse_expression("   ")


def test_scalars():
    assert to_scalar("3/4") == sympy.Rational(3, 4)
    assert to_scalar(2 + 3 * sympy.I) == 2 + 3 * sympy.I
    assert not is_scalar(sympy.sqrt(2))
    assert not is_scalar(x)


def test_canonical_parts_monic_denominator():
    num, den = canonical_parts((2 * x + 2) / (4 * x * y + 4))
    assert den == x * y + 1
    assert sympy.expand(num - (x + 1) / 2) == 0


def test_gaussian_denominators_normalize():
    assert is_zero(normalize(parse_expression("1/(x + I)")) - 1 / (x + sympy.I))
    e = parse_expression("(x + I*y)/(2*I*x + 1)")
    num, den = canonical_parts(e)
    assert den == x - sympy.I / 2
    assert is_zero(num / den - e)


def test_division_by_zero_is_reported():
    with pytest.raises(NormalizationError):
        substitute(1 / x, {"x": 0})


def test_reciprocal_substitution():
    u = sympy.Symbol("u")
    moved = substitute(y**3 / (x * y + 1), {"y": 1 / u})
    assert is_zero(moved - 1 / (u**2 * (x + u)))


def test_product_rule_with_exp():
    assert is_zero(differentiate((y - 1) * sympy.exp(y), y) - y * sympy.exp(y))
    assert parse_expression("0") == 0


def test_normalize_cancels():
    e = parse_expression("(x^2 - y^2)/(x - y)")
    assert is_zero(normalize(e) - (x + y))
    assert normalize(e - e) == 0


def test_normalize_cancels_random_common_factors():
    rng = random.Random(config.SEED)
    for _ in range(20):
        p = sum(rng.randint(-4, 4) * x**i * y**j for i in range(3) for j in range(3 - i))
        q = 0
        while q == 0:
            q = sum(rng.randint(-4, 4) * x**i * y**j for i in range(2) for j in range(3 - i))
        num, den = canonical_parts(normalize(sympy.expand(p * q) / q))
        assert den == 1
        assert sympy.expand(num - p) == 0


def test_rational_function_arithmetic():
    a = RationalFunction.from_expr(1 / (x + 1))
    b = RationalFunction.from_expr(x / (x + 1))
    total = a + b
    assert total.numer == 1 and total.denom == 1
    assert (a * (x + 1)).as_expr() == 1
    assert a.degrees(x) == (0, 1)
    with pytest.raises(NormalizationError):
        a / (x - x)


def test_exact_zero_with_transcendentals():
    e1 = sympy.exp(x) * (x + 1) - sympy.exp(x) * x - sympy.exp(x)
    assert is_zero(e1)
    assert not is_zero(sympy.exp(x) - x)
    assert is_zero(sympy.diff(sympy.log(x**2 + 1), x) - 2 * x / (x**2 + 1))


def test_sampled_mode_agrees():
    assert is_zero((x + y)**2 - x**2 - 2 * x * y - y**2, mode="sampled")
    assert not is_zero(x - y, mode="sampled")


def test_formal_integral_derivative():
    F = formal_integral(sympy.exp(y**2), y)
    assert isinstance(F, FormalIntegral)
    assert differentiate(F, y) == sympy.exp(y**2)
    assert differentiate(F, x) == 0


def test_formal_integral_prints_and_parses():
    F = formal_integral(sympy.exp(y**2), y)
    assert to_text(F) == "Int(exp(y^2), y)"
    assert parse_expression(to_text(F)) == F


def test_formal_integral_chain_rule():
    F = formal_integral(sympy.exp(y**2), y, at=x**2)
    assert is_zero(differentiate(F, x) - 2 * x * sympy.exp(x**4))


def test_substitution_respects_bound_variable():
    F = formal_integral(sympy.exp(y**2), y)
    moved = substitute(F, {"y": x + 1}, normalize_result=False)
    assert moved.args[2] == x + 1
    assert differentiate(moved, x) == sympy.exp((x + 1)**2)


def test_evaluate_first_integral():
    psi = parse_expression("(x + y - 1)*exp(y)")
    value = evaluate(psi, {x: mpmath.mpf(1), y: mpmath.mpf(1)})
    assert abs(value - mpmath.e) < 1e-15


def test_evaluate_formal_integral_from_basepoint():
    F = formal_integral(y * sympy.exp(y), y)
    basepoints = {}
    with mpmath.workdps(25):
        assert evaluate(F, {y: mpmath.mpf(0)}, basepoints) == 0
        value = evaluate(F, {y: mpmath.mpf(1)}, basepoints)
    assert abs(value - 1) < 1e-15


def test_basepoint_scan_skips_poles():
    assert choose_basepoint(NU * sympy.exp(NU)) == 0
    assert choose_basepoint(1 / NU) == 1
    assert choose_basepoint(1 / (NU * (NU - 1) * (NU + 1))) == 2


def test_evaluate_atan():
    value = evaluate(sympy.atan(x), {x: mpmath.mpf(1)})
    assert abs(value - mpmath.pi / 4) < 1e-15


def test_derivative_matches_finite_differences():
    h = mpmath.mpf("1e-12")
    points = [(mpmath.mpf("0.7"), mpmath.mpf("1.3")), (mpmath.mpf("1.9"), mpmath.mpf("0.4")),
              (mpmath.mpf("2.6"), mpmath.mpf("3.1"))]
    with mpmath.workdps(40):
        for text in CORPUS:
            e = parse_expression(text)
            if e.free_symbols - {x, y} or e.has(FormalIntegral) or e.has(sympy.I):
                continue
            for px, py in points:
                point = {x: px, y: py}
                for var in (x, y):
                    exact = evaluate(differentiate(e, var), point)
                    plus = evaluate(e, {**point, var: point[var] + h})
                    minus = evaluate(e, {**point, var: point[var] - h})
                    approx = (plus - minus) / (2 * h)
                    assert abs(exact - approx) <= 1e-6 * max(1, abs(exact)), (text, var)


def test_same_value_and_symbols():
    alpha = symbol("alpha")
    assert alpha == parse_expression("alpha")
    assert same_value((alpha + 1)**2, alpha**2 + 2 * alpha + 1)


def run_all_tests():
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    passed = 0
    for name, fn in tests:
        try:
            fn()
            print(f"✅ PASSED: {name}")
            passed += 1
        except Exception as e:
            print(f"❌ FAILED: {name}")
            print(f"   {type(e).__name__}: {str(e)[:200]}")
    print(f"\nPassed: {passed}/{len(tests)}")
    return 0 if passed == len(tests) else 1


if __name__ == "__main__":
    sys.exit(run_all_tests())
