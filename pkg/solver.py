"""
QUADRATURE SOLVER
=================

AIL8 is the x <-> y image of a linear equation

    dx/dy = -(g(y) x + f(y)),   g = (s1 y + r1)/A(y),   f = (s0 y + r0)/A(y)

so Psi = x E(y) + J(y), E = exp(Int(g)), J = Int(E f), is a first integral.

Also here: first-integral verification (exact tower test, sampled fallback
only when the tower cannot represent the residual)
and the AIR10 <-> Riccati correspondence.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import sympy
from sympy.integrals.rationaltools import ratint

import config
from expr_core import (
    FamilyError,
    FormalIntegral,
    NormalizationError,
    UnsupportedExpressionError,
    VerificationError,
    differentiate,
    formal_integral,
    is_zero,
    normalize,
    sampled_zero,
    to_text,
    x,
    y,
)
from ode_model import Family, FamilyParams, RationalODE, as_ode, construct_family, shape_classify
from transform import invert_xy

logger = logging.getLogger(__name__)


# =========================
# 1) FIRST INTEGRALS
# =========================
@dataclass(frozen=True)
class FirstIntegral:
    psi: sympy.Expr
    equation: Optional[RationalODE] = None
    method: str = "formal"                  # partial-fractions | formal | degenerate
    verified: bool = False
    verdict: str = "exact"                  # exact | sampled | dx/dy
    provenance: Dict[str, object] = field(default_factory=dict)

    def text(self) -> str:
        return to_text(self.psi)

    def to_json(self) -> dict:
        data = {"first_integral": self.text(), "verified": self.verified,
                "method": self.method, "verdict": self.verdict}
        if self.equation is not None:
            data["equation"] = self.equation.text()
        if self.provenance:
            data["provenance"] = {k: (v if isinstance(v, (str, int, float, bool, list, dict)) else str(v))
                                  for k, v in self.provenance.items()}
        return data


def residual(e, psi) -> sympy.Expr:
    """dPsi/dx + dPsi/dy * Phi(x, y)."""
    psi = sympy.sympify(psi)
    return differentiate(psi, x) + differentiate(psi, y) * as_ode(e).rhs


def check_first_integral(e, psi) -> Tuple[bool, str]:
    """(verdict, how): the exact tower test decides; sampling only when it cannot."""
    res = residual(e, psi)
    try:
        exact = is_zero(res)
    except UnsupportedExpressionError as err:
        logger.debug("exact zero test unavailable (%s), sampling", err)
        try:
            return sampled_zero(res), "sampled"
        except NormalizationError as err:
            logger.warning("sampled check failed: %s", err)
            return False, "sampled"
    if config.CROSSCHECK and not res.has(FormalIntegral):
        try:
            if sampled_zero(res) != exact:
                logger.warning("exact and sampled zero tests disagree (exact=%s) for %s", exact, to_text(psi)[:200])
        except (NormalizationError, UnsupportedExpressionError) as err:
            logger.debug("sampled cross-check skipped: %s", err)
    return exact, "exact"


def verify_first_integral(e, psi) -> bool:
    return check_first_integral(e, psi)[0]


# =========================
# 2) AIL SOLUTION
# =========================
def _ail_slots(p: FamilyParams):
    cubic = sum(p[f"a{i}"] * y**i for i in range(4))
    g = (p["s1"] * y + p["r1"]) / cubic
    f = (p["s0"] * y + p["r0"]) / cubic
    return cubic, normalize(g), normalize(f)


def _closed_integral(expr) -> Optional[sympy.Expr]:
    """Rational integral in y with log/atan terms, or None when it needs a root sum."""
    result = ratint(expr, y, real=True)
    if result.has(sympy.RootSum) or result.has(sympy.Lambda):
        return None
    return result.replace(sympy.Abs, lambda arg: arg)


def _elementary_integral(expr) -> Optional[sympy.Expr]:
    """Risch integration of exp-polynomial integrands; None if not elementary or not handled."""
    if any(p.exp.is_Rational and not p.exp.is_Integer for p in expr.atoms(sympy.Pow)):
        return None
    try:
        result = sympy.integrate(expr, y, risch=True)
    except NotImplementedError:
        return None
    if result.has(sympy.Integral):
        return None
    return result


def _exp_of(integral: sympy.Expr) -> sympy.Expr:
    """exp(sum c_i log(l_i) + rest) -> prod l_i^c_i * exp(rest) for rational c_i."""
    powers, rest = sympy.S.One, sympy.S.Zero
    for term in sympy.Add.make_args(sympy.expand(integral)):
        coeff, logs = term.as_coeff_mul()
        if len(logs) == 1 and isinstance(logs[0], sympy.log) and coeff.is_Rational:
            powers *= logs[0].args[0] ** coeff
        else:
            rest += term
    return powers * sympy.exp(rest) if rest != 0 else powers


def solve_ail(p: FamilyParams, method: str = "auto", verify: bool = True) -> FirstIntegral:
    """
    method: auto (closed form when the parameters are numbers) or formal.
    A residual that fails to vanish raises VerificationError.
    """
    if p.family != Family.AIL8:
        raise FamilyError(f"solve_ail expects AIL8 parameters, got {p.family.value}")
    cubic, g, f = _ail_slots(p)
    if is_zero(cubic):
        raise FamilyError("A(y) vanishes identically")
    provenance = {"family": p.family.value, "params": p.to_json()["params"]}

    if g == 0 and f == 0:
        # dx/dy = 0: x is constant along solutions
        logger.info("solve_ail: degenerate f = g = 0, psi = x")
        return FirstIntegral(x, None, "degenerate", True, "dx/dy", provenance)

    numeric = not ((g.free_symbols | f.free_symbols) - {y})
    int_g = _closed_integral(g) if (numeric and method == "auto") else None
    if int_g is not None:
        E = _exp_of(int_g)
        integrand = normalize(E * f)
        J = None
        if integrand.is_rational_function(y):
            J = _closed_integral(integrand)
        elif integrand.has(sympy.exp):
            J = _elementary_integral(integrand)
        used = "partial-fractions"
        if J is None:
            J = formal_integral(E * f, y)
            used = "formal"
    else:
        E = sympy.exp(formal_integral(g, y))
        J = formal_integral(E * f, y)
        used = "formal"

    psi = x * E + J
    e = construct_family(p)
    result = FirstIntegral(psi, e, used, False, "exact", provenance)
    if not verify:
        return result
    ok, how = check_first_integral(e, psi)
    if not ok:
        raise VerificationError(f"solve_ail residual does not vanish for {e.text()[:200]}")
    logger.info("solve_ail: %s first integral verified (%s)", used, how)
    return FirstIntegral(psi, e, used, True, how, provenance)


# =========================
# 3) AIR <-> RICCATI
# =========================
RICCATI_ORIENTATION = "after x <-> y the equation reads y' = -(h(x) y^2 + g(x) y + f(x))"


@dataclass(frozen=True)
class RiccatiForm:
    h: sympy.Expr
    g: sympy.Expr
    f: sympy.Expr
    linear: bool = False
    orientation: str = RICCATI_ORIENTATION

    @property
    def rhs(self) -> sympy.Expr:
        return normalize(-(self.h * y**2 + self.g * y + self.f))

    def to_ode(self) -> RationalODE:
        return RationalODE(self.rhs)

    def to_json(self) -> dict:
        return {"h": to_text(self.h), "g": to_text(self.g), "f": to_text(self.f),
                "linear": self.linear, "orientation": self.orientation}


def air_to_riccati(p: FamilyParams) -> RiccatiForm:
    if p.family != Family.AIR10:
        raise FamilyError(f"air_to_riccati expects AIR10 parameters, got {p.family.value}")
    cubic = sum(p[f"a{i}"] * x**i for i in range(4))
    if is_zero(cubic):
        raise FamilyError("A vanishes identically")
    h = normalize((p["s2"] * x + p["r2"]) / cubic)
    g = normalize((p["s1"] * x + p["r1"]) / cubic)
    f = normalize((p["s0"] * x + p["r0"]) / cubic)
    form = RiccatiForm(h, g, f, linear=is_zero(h))
    inverted = invert_xy(construct_family(p))
    if not is_zero(inverted.rhs - form.rhs):
        raise VerificationError(f"AIR inversion mismatch: {inverted.text()[:200]}")
    if not form.linear and "riccati" not in shape_classify(inverted).tags:
        raise VerificationError(f"AIR inversion is not Riccati: {inverted.text()[:200]}")
    if form.linear:
        logger.info("air_to_riccati: s2 = r2 = 0, inverse-linear (AIL) case")
    return form


def riccati_to_air(form: RiccatiForm) -> RationalODE:
    """The AIR equation whose x <-> y image is the given Riccati form."""
    return invert_xy(form.to_ode())
