"""
NUMERIC CROSS-CHECKS
====================

Floating-point witnesses for the symbolic results:
- integrate_ode: adaptive RK45 (scipy) with a pole-proximity stop
- integrate_fixed: classic fixed-step RK4, used for convergence-order checks
- eval_expression: mpmath evaluation of first integrals (formal integrals by quadrature)
- constancy_check: drift of a first integral along a trajectory
- trajectory_frame / export_csv: pandas tables, CSV header x,y,psi
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import mpmath
import numpy as np
import pandas as pd
import sympy
from scipy.integrate import RK45
from scipy.optimize import brentq

import config
from expr_core import NU, NumericError, UnsupportedExpressionError, evaluate, x, y
from ode_model import as_ode

logger = logging.getLogger(__name__)


@dataclass
class NumericConfig:
    rtol: float = config.RTOL
    atol: float = config.ATOL
    digits: int = config.NUMERIC_DIGITS
    pole_radius: float = config.POLE_RADIUS
    max_step: float = np.inf
    basepoints: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0 or self.pole_radius <= 0:
            raise ValueError("tolerances and pole radius must be positive")


@dataclass
class Trajectory:
    xs: np.ndarray
    ys: np.ndarray
    stats: Dict[str, float]
    pole_stop: bool = False
    message: str = ""

    @property
    def final(self) -> Tuple[float, float]:
        return float(self.xs[-1]), float(self.ys[-1])

    def __len__(self):
        return len(self.xs)


# =========================
# 1) RIGHT-HAND SIDES
# =========================
def _require_real_bound(expr) -> None:
    extra = expr.free_symbols - {x, y, NU}
    if extra:
        raise NumericError(f"parameters must be bound for numeric work: {sorted(s.name for s in extra)}")
    if expr.has(sympy.I):
        raise NumericError("complex-parameter instances are excluded from numeric checks")


def _callables(e) -> Tuple[Callable, Callable]:
    """(rhs, denominator) as float functions of (x, y)."""
    e = as_ode(e)
    _require_real_bound(e.rhs)
    if e.is_rational:
        numer, denom = e.parts()
        f_num = sympy.lambdify((x, y), numer, "math")
        f_den = sympy.lambdify((x, y), denom, "math")

        def rhs(xv, yv):
            return f_num(xv, yv) / f_den(xv, yv)

        return rhs, f_den

    def rhs(xv, yv):
        value = evaluate(e.rhs, {x: mpmath.mpf(xv), y: mpmath.mpf(yv)})
        return float(mpmath.re(value))

    return rhs, lambda xv, yv: 1.0


# =========================
# 2) INTEGRATORS
# =========================
def integrate_ode(e, x0: float, y0: float, x1: float, cfg: Optional[NumericConfig] = None) -> Trajectory:
    cfg = cfg or NumericConfig()
    rhs, denom = _callables(e)
    if abs(denom(x0, y0)) < cfg.pole_radius:
        raise NumericError(f"start point ({x0}, {y0}) is a pole of the right-hand side")

    def fun(t, state):
        with np.errstate(all="ignore"):
            try:
                return np.array([rhs(t, state[0])])
            except ZeroDivisionError:
                return np.array([np.inf])

    solver = RK45(fun, x0, np.array([float(y0)]), x1, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step)
    xs, ys = [float(x0)], [float(y0)]
    max_err, pole_stop, message = 0.0, False, ""
    while solver.status == "running":
        msg = solver.step()
        if solver.status == "failed":
            message = msg or "step size underflow"
            logger.warning("integrate_ode stopped at x=%.6g: %s", solver.t, message)
            break
        xs.append(float(solver.t))
        ys.append(float(solver.y[0]))
        local = np.abs(solver.h_previous * (solver.K.T @ solver.E))
        max_err = max(max_err, float(local[0]))
        if not np.isfinite(ys[-1]) or abs(denom(xs[-1], ys[-1])) < cfg.pole_radius:
            pole_stop = True
            message = "solution approached a pole of the right-hand side"
            logger.warning("integrate_ode: pole proximity at x=%.6g", xs[-1])
            break
    steps = len(xs) - 1
    attempts = max((solver.nfev - 2) // 6, steps)
    stats = {"steps": steps, "nfev": int(solver.nfev), "rejected": attempts - steps,
             "max_local_error": max_err}
    logger.info("integrate_ode: %d steps, %d evaluations", steps, solver.nfev)
    return Trajectory(np.array(xs), np.array(ys), stats, pole_stop, message)


def integrate_fixed(e, x0: float, y0: float, x1: float, n_steps: int) -> Trajectory:
    """Classic RK4 with n_steps equal steps."""
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    rhs, _ = _callables(e)
    h = (x1 - x0) / n_steps
    xs = np.linspace(x0, x1, n_steps + 1)
    ys = np.empty(n_steps + 1)
    ys[0] = y0
    yv = float(y0)
    try:
        for i in range(n_steps):
            xv = xs[i]
            k1 = rhs(xv, yv)
            k2 = rhs(xv + h / 2, yv + h * k1 / 2)
            k3 = rhs(xv + h / 2, yv + h * k2 / 2)
            k4 = rhs(xv + h, yv + h * k3)
            yv = yv + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
            ys[i + 1] = yv
    except ZeroDivisionError:
        raise NumericError(f"fixed-step integration hit a pole near x={xv}")
    return Trajectory(xs, ys, {"steps": n_steps, "nfev": 4 * n_steps, "rejected": 0})


def convergence_ratio(e, x0: float, y0: float, x1: float, exact_y1: float, n_steps: int = 16) -> float:
    """Global error at n steps over global error at 2n steps (about 16 for RK4)."""
    err_n = abs(integrate_fixed(e, x0, y0, x1, n_steps).final[1] - exact_y1)
    err_2n = abs(integrate_fixed(e, x0, y0, x1, 2 * n_steps).final[1] - exact_y1)
    if err_2n == 0:
        raise NumericError("error vanished at the finer step; pick a coarser step count")
    return err_n / err_2n


def solve_implicit(psi, xv: float, level: float, bracket: Tuple[float, float],
                   cfg: Optional[NumericConfig] = None) -> float:
    """y with Psi(xv, y) = level, by bracketing root search."""
    cfg = cfg or NumericConfig()
    return brentq(lambda yv: eval_expression(psi, (xv, yv), cfg) - level, *bracket, xtol=1e-15, rtol=1e-15)


# =========================
# 3) EVALUATION
# =========================
def eval_expression(psi, point: Tuple[float, float], cfg: Optional[NumericConfig] = None) -> float:
    cfg = cfg or NumericConfig()
    psi = sympy.sympify(psi)
    _require_real_bound(psi)
    env = {x: mpmath.mpf(point[0]), y: mpmath.mpf(point[1])}
    with mpmath.workdps(cfg.digits):
        try:
            value = evaluate(psi, env, cfg.basepoints)
        except ZeroDivisionError:
            raise NumericError(f"pole at {point}")
        except UnsupportedExpressionError as err:
            raise NumericError(str(err))
        if not mpmath.isfinite(value):
            raise NumericError(f"non-finite value at {point}")
        value = mpmath.mpc(value)
        if abs(value.imag) > 1e-8 * max(1.0, abs(value.real)):
            raise NumericError(f"complex value {mpmath.nstr(value, 8)} at {point}")
        return float(value.real)


@dataclass
class ConstancyReport:
    max_drift: float
    psi0: float
    samples: int
    trajectory: Trajectory

    def passed(self, threshold: float = 1e-6) -> bool:
        return self.max_drift < threshold

    def to_json(self) -> dict:
        return {"max_drift": self.max_drift, "psi0": self.psi0, "samples": self.samples,
                "stats": self.trajectory.stats, "pole_stop": self.trajectory.pole_stop}


def _sample_indices(n: int, limit: int) -> np.ndarray:
    if n <= limit:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, limit).round().astype(int))


def constancy_check(e, psi, x0: float, y0: float, x1: float, cfg: Optional[NumericConfig] = None,
                    max_samples: int = 60) -> ConstancyReport:
    cfg = cfg or NumericConfig()
    traj = integrate_ode(e, x0, y0, x1, cfg)
    idx = _sample_indices(len(traj), max_samples)
    values = np.array([eval_expression(psi, (traj.xs[i], traj.ys[i]), cfg) for i in idx])
    psi0 = values[0]
    scale = max(abs(psi0), cfg.atol)
    drift = float(np.max(np.abs(values - psi0)) / scale)
    logger.info("constancy_check: drift %.3g over %d samples", drift, len(idx))
    return ConstancyReport(drift, float(psi0), len(idx), traj)


# =========================
# 4) TABLES
# =========================
def trajectory_frame(traj: Trajectory, psi=None, cfg: Optional[NumericConfig] = None) -> pd.DataFrame:
    frame = pd.DataFrame({"x": traj.xs, "y": traj.ys})
    if psi is not None:
        cfg = cfg or NumericConfig()
        frame["psi"] = [eval_expression(psi, (a, b), cfg) for a, b in zip(traj.xs, traj.ys)]
    else:
        frame["psi"] = math.nan
    return frame


def export_csv(traj: Trajectory, path: str, psi=None, cfg: Optional[NumericConfig] = None) -> pd.DataFrame:
    frame = trajectory_frame(traj, psi, cfg)
    frame.to_csv(path, index=False, columns=["x", "y", "psi"])
    return frame
