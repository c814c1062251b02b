#!/usr/bin/env python3
"""
Tests for the AIL quadrature solver, first-integral verification and the
AIR <-> Riccati correspondence.
"""

import os
import random
import sys

import pytest
import sympy

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config  # noqa: E402
from expr_core import FamilyError, FormalIntegral, differentiate, is_zero, x, y  # noqa: E402
from ode_model import Family, FamilyParams, construct_family, parse, random_params  # noqa: E402
from solver import (  # noqa: E402
    air_to_riccati,
    check_first_integral,
    residual,
    riccati_to_air,
    solve_ail,
    verify_first_integral,
)

LINEAR_IMAGE = {"s1": 0, "s0": 1, "r1": 1, "r0": 0, "a3": 0, "a2": 0, "a1": 0, "a0": 1}


def test_linear_image_first_integral():
    solution = solve_ail(FamilyParams(Family.AIL8, LINEAR_IMAGE))
    assert solution.verified
    assert solution.method == "partial-fractions"
    reference = (x + y - 1) * sympy.exp(y)
    difference = solution.psi - reference
    assert is_zero(differentiate(difference, x))
    assert is_zero(differentiate(difference, y))


def test_formal_method_keeps_integrals():
    solution = solve_ail(FamilyParams(Family.AIL8, LINEAR_IMAGE), method="formal")
    assert solution.verified
    assert solution.psi.has(FormalIntegral)


def test_symbolic_parameters_are_solved_formally():
    solution = solve_ail(FamilyParams(Family.AIL8))
    assert solution.verified
    assert solution.method == "formal"


def test_random_instances_verify():
    rng = random.Random(config.SEED)
    done = 0
    while done < 4:
        p = random_params(Family.AIL8, rng)
        if all(p[f"a{i}"] == 0 for i in range(4)):
            continue
        if is_zero(p["r1"] * p["s0"] - p["r0"] * p["s1"]):
            continue
        assert solve_ail(p).verified
        done += 1


def test_degenerate_instance():
    p = FamilyParams(Family.AIL8, {"s1": 0, "s0": 0, "r1": 0, "r0": 0,
                                   "a3": 0, "a2": 0, "a1": 0, "a0": 1})
    solution = solve_ail(p)
    assert solution.psi == x
    assert solution.verdict == "dx/dy"


def test_solver_needs_ail8():
    with pytest.raises(FamilyError):
        solve_ail(FamilyParams(Family.AIL4, {"k0": 1}))


def test_wrong_first_integral_is_rejected():
    e = parse("y' = -1/(y + x)")
    assert verify_first_integral(e, (x + y - 1) * sympy.exp(y))
    ok, _ = check_first_integral(e, x * sympy.exp(y))
    assert not ok


def test_non_elementary_j_is_reported_formal():
    # g = 2y, f = 1: E = exp(y^2) and J = Int(exp(y^2)) has no closed form
    p = FamilyParams(Family.AIL8, {"s1": 2, "s0": 0, "r1": 0, "r0": 1,
                                   "a3": 0, "a2": 0, "a1": 0, "a0": 1})
    solution = solve_ail(p)
    assert solution.verified
    assert solution.method == "formal"
    assert solution.psi.has(FormalIntegral)
    assert not solution.psi.has(sympy.Integral)


def test_exact_verdict_is_not_overridden_by_sampling():
    ok, how = check_first_integral(parse("y' = 0"), x / 10**20)
    assert not ok
    assert how == "exact"
    assert not verify_first_integral(parse("y' = 0"), x / 10**20)


def test_residual_of_constant_is_zero():
    assert residual(parse("y' = y^3 + x"), 1) == 0


def test_air_to_riccati():
    p = FamilyParams(Family.AIR10, {"s2": 0, "s1": 0, "s0": 1, "r2": 1, "r1": 0, "r0": 0,
                                    "a3": 0, "a2": 0, "a1": 0, "a0": 1})
    form = air_to_riccati(p)
    assert form.h == 1 and form.g == 0 and is_zero(form.f - x)
    assert not form.linear
    assert riccati_to_air(form).same_equation(construct_family(p))


def test_air_without_quadratic_part_is_linear():
    p = FamilyParams(Family.AIR10, {"s2": 0, "r2": 0, "s1": 1, "s0": 0, "r1": 0, "r0": 1,
                                    "a3": 1, "a2": 0, "a1": 0, "a0": 1})
    assert air_to_riccati(p).linear


def test_first_integral_json():
    data = solve_ail(FamilyParams(Family.AIL8, LINEAR_IMAGE)).to_json()
    assert data["verified"] is True
    assert data["method"] == "partial-fractions"
    assert "exp(y)" in data["first_integral"]


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
