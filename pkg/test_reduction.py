#!/usr/bin/env python3
"""
Tests for parameter reduction: root-pattern reduction, AIL8 -> AIL4 splitting
and the AIL4 -> AIL2 / AIL1 branches.
"""

import os
import random
import sys

import pytest
import sympy

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import config  # noqa: E402
from expr_core import ReductionError, is_zero, symbol, x, y  # noqa: E402
from ode_model import Family, FamilyParams, construct_family, parse, random_params  # noqa: E402
from reduction import (  # noqa: E402
    RootProfile,
    ail8_to_ail4_coefficients,
    ail_branch,
    ail_reduce,
    ail_split,
    reduce_by_roots,
    root_profile,
)
from transform import apply  # noqa: E402


def _numer_degree(e):
    numer, _ = e.parts()
    return sympy.Poly(numer, y).degree() if y in numer.free_symbols else 0


def test_root_patterns():
    assert root_profile(parse("y' = (y - 1)^3/(x*y + 1)")).pattern == "triple"
    assert root_profile(parse("y' = y^2*(y - 1)/(x*y + 1)")).pattern == "double+simple"
    assert root_profile(parse("y' = (y^3 - y)/(x*y + 1)")).pattern == "three-distinct"


def test_double_root_is_listed_first():
    profile = RootProfile.from_roots([1, 0, 0])
    assert profile.roots == (0, 0, 1)


def test_reduce_triple_root():
    reduced, chain = reduce_by_roots(parse("y' = (y - 1)^3/(x*y + 1)"))
    assert _numer_degree(reduced) == 0
    assert apply(chain, parse("y' = (y - 1)^3/(x*y + 1)")).same_equation(reduced)


def test_reduce_double_root():
    reduced, _ = reduce_by_roots(parse("y' = y^2*(y - 1)/(x*y + 1)"))
    assert is_zero(reduced.rhs - y / (x + y + 1))


def test_reduce_three_distinct_roots():
    reduced, _ = reduce_by_roots(parse("y' = (y^3 - y)/(x*y + 1)"))
    numer, _ = reduced.parts()
    assert sympy.Poly(numer, y).degree() == 2
    assert is_zero(numer.subs(y, 0)) and is_zero(numer.subs(y, 1))


def test_reduce_with_gaussian_roots():
    reduced, _ = reduce_by_roots(parse("y' = (y^3 + y)/(x*y + 1)"), roots=[0, sympy.I, -sympy.I])
    assert _numer_degree(reduced) == 2


def test_reduce_rejects_x_in_numerator():
    with pytest.raises(ReductionError):
        reduce_by_roots(parse("y' = (x*y^3 + 1)/(x*y + 1)"))
    with pytest.raises(ReductionError):
        RootProfile.from_roots([0, 1])


def test_pinned_split_coefficients():
    a3, a2, a1, a0 = (symbol(n) for n in ("a3", "a2", "a1", "a0"))
    p = FamilyParams(Family.AIL8, {"s1": 1, "s0": 0, "r1": 0, "r0": 1})
    k = ail8_to_ail4_coefficients(p)
    assert all(is_zero(v - w) for v, w in zip(k, (-a3, a2, -a1, a0)))
    result = ail_split(p)
    assert result.normal_form == "AIL_4"


def test_random_split_chain_reproduces_ail4():
    rng = random.Random(config.SEED)
    done = 0
    while done < 50:
        p = random_params(Family.AIL8, rng)
        if p["s1"] == 0 or is_zero(p["r1"] * p["s0"] - p["r0"] * p["s1"]):
            continue
        if all(p[f"a{i}"] == 0 for i in range(4)):
            continue
        result = ail_split(p, verify=False)
        target = construct_family(FamilyParams(Family.AIL4, result.params))
        assert apply(result.chain, construct_family(p)).same_equation(target)
        done += 1


def test_split_with_s1_zero():
    p = FamilyParams(Family.AIL8, {"s1": 0, "s0": 1, "r1": 1, "r0": 0,
                                   "a3": 2, "a2": -1, "a1": 0, "a0": 3})
    result = ail_split(p)
    assert result.k == (-3, 0, 1, -2)


def test_split_omega_zero_is_constant_invariant():
    p = FamilyParams(Family.AIL8, {"s1": 1, "s0": 2, "r1": 3, "r0": 6})
    assert ail_split(p).normal_form == "constant-invariant"


def test_split_rejects_denominator_without_y():
    p = FamilyParams(Family.AIL8, {"s1": 0, "s0": 0})
    with pytest.raises(ReductionError):
        ail_split(p)


def test_branch_to_ail2():
    result = ail_branch((1, 2, 3, -4))
    assert result.normal_form == "AIL_2"
    assert result.params["k4"] == 2


def test_branch_to_ail1():
    result = ail_branch((1, 2, 3, 0))
    assert result.normal_form == "AIL_1"
    assert result.params["alpha"] == 2


def test_split_of_zero_numerator():
    p = FamilyParams(Family.AIL8, {"s1": 1, "s0": 0, "r1": 0, "r0": 1,
                                   "a3": 0, "a2": 0, "a1": 0, "a0": 0})
    result = ail_split(p)
    assert result.normal_form == "AIL_4"
    assert all(is_zero(v) for v in result.k)


def test_branch_quadratic_without_linear_term_gives_alpha_zero():
    result = ail_branch((0, 0, 1, 0))
    assert result.normal_form == "AIL_1"
    assert result.params["alpha"] == 0


def test_branch_constant_invariant():
    assert ail_branch((1, 2, 0, 0)).normal_form == "constant-invariant"
    with pytest.raises(ReductionError):
        ail_branch((0, 0, 0, 0))


def test_branch_with_symbolic_k3_names_kappa():
    result = ail_branch({"k0": 1, "k1": 0, "k2": 0, "k3": symbol("k3")}, verify=False)
    assert result.normal_form == "AIL_2"
    assert result.params["kappa"] == symbol("kappa")


def test_branch_with_non_square_k3_names_kappa():
    result = ail_branch((1, 0, 0, -2))
    assert result.normal_form == "AIL_2"
    assert result.params["k4"] == symbol("kappa")
    assert result.params["kappa_squared"] == 2
    assert not any(v.has(sympy.sqrt(2)) for v in result.params.values())
    assert result.k == (1, 0, 0, -2)


def test_full_reduction_ends_in_normal_form():
    p = FamilyParams(Family.AIL8, {"s1": 1, "s0": 0, "r1": 0, "r0": 1,
                                   "a3": 1, "a2": 1, "a1": 1, "a0": -1})
    result = ail_reduce(p)
    assert result.normal_form == "AIL_2"
    assert apply(result.chain, construct_family(p)).same_equation(result.equation)


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
