#!/usr/bin/env python3
"""
Tests for the numeric cross-checks: RK45 trajectories, fixed-step RK4
order, mpmath evaluation and first-integral drift.
"""

import math
import os
import sys
import tempfile

import pandas as pd
import pytest
import sympy

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from expr_core import NumericError, formal_integral, parse_expression, x, y  # noqa: E402
from numeric import (  # noqa: E402
    NumericConfig,
    constancy_check,
    convergence_ratio,
    eval_expression,
    export_csv,
    integrate_ode,
    solve_implicit,
)
from ode_model import Family, FamilyParams, parse  # noqa: E402
from solver import solve_ail  # noqa: E402

LINEAR_IMAGE = parse("y' = -1/(y + x)")
PSI = parse_expression("(x + y - 1)*exp(y)")


def _exact_y_at(x1):
    return solve_implicit(PSI, x1, eval_expression(PSI, (1.0, 1.0)), (0.0, 1.0))


def test_eval_first_integral():
    assert abs(eval_expression(PSI, (1.0, 1.0)) - math.e) < 1e-14


def test_eval_formal_integral_from_basepoint():
    cfg = NumericConfig()
    F = formal_integral(y * sympy.exp(y), y)
    assert eval_expression(F, (0.0, 0.0), cfg) == 0.0
    assert abs(eval_expression(F, (0.0, 1.0), cfg) - 1.0) < 1e-12


def test_formal_integral_basepoint_is_fixed_without_config():
    F = parse_expression("Int(y*exp(y), y)")
    assert abs(eval_expression(F, (0.0, 1.0)) - 1.0) < 1e-12
    assert abs(eval_expression(F, (5.0, 1.0)) - 1.0) < 1e-12


def test_formal_integral_basepoint_avoids_poles():
    F = parse_expression("Int(1/y, y)")
    assert abs(eval_expression(F, (0.0, math.e)) - 1.0) < 1e-12
    with pytest.raises(NumericError):
        eval_expression(F, (0.0, -1.0))


def test_eval_atan():
    assert abs(eval_expression(sympy.atan(x), (1.0, 0.0)) - math.pi / 4) < 1e-15


def test_eval_rejects_free_parameters_and_poles():
    with pytest.raises(NumericError):
        eval_expression(parse_expression("alpha*x"), (1.0, 1.0))
    with pytest.raises(NumericError):
        eval_expression(1 / x, (0.0, 1.0))


def test_linear_image_drift_is_tiny():
    report = constancy_check(LINEAR_IMAGE, PSI, 1.0, 1.0, 2.0)
    assert report.max_drift < 1e-8
    assert report.passed()


def test_solver_first_integrals_are_constant_along_trajectories():
    linear = solve_ail(FamilyParams(Family.AIL8, {"s1": 0, "s0": 1, "r1": 1, "r0": 0,
                                                 "a3": 0, "a2": 0, "a1": 0, "a0": 1}))
    assert constancy_check(linear.equation, linear.psi, 1.0, 1.0, 2.0).passed()
    # psi = x*exp(y^2) + Int(exp(y^2), y)
    formal = solve_ail(FamilyParams(Family.AIL8, {"s1": 2, "s0": 0, "r1": 0, "r0": 1,
                                                 "a3": 0, "a2": 0, "a1": 0, "a0": 1}))
    assert constancy_check(formal.equation, formal.psi, 1.0, 0.5, 1.5).passed()


def test_constant_psi_has_no_drift():
    report = constancy_check(LINEAR_IMAGE, sympy.S.One, 1.0, 1.0, 2.0)
    assert report.max_drift == 0.0


def test_wrong_first_integral_drifts():
    report = constancy_check(LINEAR_IMAGE, x * sympy.exp(y), 1.0, 1.0, 2.0)
    assert report.max_drift > 1e-3
    assert not report.passed()


def test_trajectory_stats():
    traj = integrate_ode(LINEAR_IMAGE, 1.0, 1.0, 2.0)
    assert traj.final[0] == pytest.approx(2.0)
    assert traj.stats["steps"] > 0
    assert traj.stats["nfev"] > traj.stats["steps"]
    assert traj.stats["rejected"] >= 0
    assert not traj.pole_stop


def test_zero_rhs_gives_constant_trajectory():
    traj = integrate_ode(parse("y' = 0"), 0.0, 3.0, 1.0)
    assert all(v == 3.0 for v in traj.ys)


def test_rk45_matches_implicit_solution():
    traj = integrate_ode(LINEAR_IMAGE, 1.0, 1.0, 2.0)
    assert abs(traj.final[1] - _exact_y_at(2.0)) < 1e-8


def test_tighter_tolerance_reduces_error():
    exact = _exact_y_at(2.0)
    loose = integrate_ode(LINEAR_IMAGE, 1.0, 1.0, 2.0, NumericConfig(rtol=1e-6, atol=1e-9))
    tight = integrate_ode(LINEAR_IMAGE, 1.0, 1.0, 2.0, NumericConfig(rtol=1e-8, atol=1e-11))
    assert abs(tight.final[1] - exact) * 10 <= abs(loose.final[1] - exact)


def test_rk4_order():
    ratio = convergence_ratio(LINEAR_IMAGE, 1.0, 1.0, 2.0, _exact_y_at(2.0), n_steps=16)
    assert 16 * 0.8 <= ratio <= 16 * 1.2


def test_pole_proximity_stops_integration():
    traj = integrate_ode(parse("y' = -1/y"), 0.0, 1.0, 1.0, NumericConfig(pole_radius=1e-2))
    assert traj.pole_stop
    assert traj.final[0] < 0.5


def test_start_at_pole_is_an_error():
    with pytest.raises(NumericError):
        integrate_ode(parse("y' = 1/(y + x)"), 1.0, -1.0, 2.0)


def test_complex_and_symbolic_instances_are_excluded():
    with pytest.raises(NumericError):
        integrate_ode(parse("y' = I*y^3"), 0.0, 1.0, 1.0)
    with pytest.raises(NumericError):
        integrate_ode(parse("y' = alpha*y^3"), 0.0, 1.0, 1.0)


def test_csv_export():
    traj = integrate_ode(LINEAR_IMAGE, 1.0, 1.0, 1.5)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "trajectory.csv")
        export_csv(traj, path, PSI)
        frame = pd.read_csv(path)
    assert list(frame.columns) == ["x", "y", "psi"]
    assert len(frame) == len(traj)
    assert (frame["psi"] - math.e).abs().max() < 1e-7


def test_invalid_config():
    with pytest.raises(ValueError):
        NumericConfig(rtol=0)


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
