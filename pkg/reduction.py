"""
PARAMETER REDUCTION
===================

- reduce_by_roots: shift by a root of the numerator cubic, then a Moebius
  map chosen by the root multiplicity pattern (triple / double+simple /
  three distinct); the reduced forms carry four fewer parameters.
- ail_split: AIL8 -> AIL4 with the k0..k3 parameters.
- ail_branch: AIL4 -> AIL2 (k3 != 0), AIL1 (k3 = 0, k2 != 0) or
  constant-invariant (k3 = k2 = 0).
- ail_reduce: ail_split followed by ail_branch.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from expr_core import (
    ReductionError,
    VerificationError,
    is_scalar,
    is_zero,
    normalize,
    symbol,
    t,
    to_scalar,
    to_text,
    x,
    y,
)
from ode_model import Family, FamilyParams, RationalODE, as_ode, construct_family
from transform import (
    ChangeOfVariables,
    apply,
    composition,
    kind_shift,
    point,
    rational_linear,
)

logger = logging.getLogger(__name__)


# =========================
# 1) ROOT PROFILES
# =========================
@dataclass(frozen=True)
class RootProfile:
    roots: Tuple[sympy.Expr, sympy.Expr, sympy.Expr]
    pattern: str                 # triple | double+simple | three-distinct

    @property
    def delta10(self) -> sympy.Expr:
        return normalize(self.roots[1] - self.roots[0])

    @property
    def delta20(self) -> sympy.Expr:
        return normalize(self.roots[2] - self.roots[0])

    @classmethod
    def from_roots(cls, roots: Sequence) -> "RootProfile":
        if len(roots) != 3:
            raise ReductionError(f"a cubic has three roots, got {len(roots)}")
        r = [sympy.sympify(v) for v in roots]
        eq01, eq02, eq12 = is_zero(r[0] - r[1]), is_zero(r[0] - r[2]), is_zero(r[1] - r[2])
        if eq01 and eq02:
            return cls((r[0], r[0], r[0]), "triple")
        if eq01 or eq02 or eq12:
            # alpha0 = alpha1 is the double root
            double = r[0] if (eq01 or eq02) else r[1]
            simple = r[2] if eq01 else (r[1] if eq02 else r[0])
            return cls((double, double, simple), "double+simple")
        return cls(tuple(r), "three-distinct")


def _cubic_parts(e: RationalODE):
    numer, denom = e.parts()
    if x in numer.free_symbols:
        raise ReductionError("numerator must not depend on x")
    if numer == 0 or sympy.Poly(numer, y).degree() != 3:
        raise ReductionError("numerator is not cubic in y")
    if y in denom.free_symbols and sympy.Poly(denom, y).degree() > 1:
        raise ReductionError("denominator must be linear in y")
    return numer, denom


def root_profile(e) -> RootProfile:
    """Roots of the numerator cubic over QQ(i)."""
    numer, _ = _cubic_parts(as_ode(e))
    found = sympy.roots(sympy.Poly(numer, y), multiple=True)
    if len(found) != 3 or not all(is_scalar(r) for r in found):
        raise ReductionError(f"roots of {to_text(numer)} are not Gaussian rationals; pass them explicitly")
    found = sorted((to_scalar(r) for r in found), key=sympy.default_sort_key)
    return RootProfile.from_roots(found)


def reduce_by_roots(e, roots: Optional[Sequence] = None) -> Tuple[RationalODE, ChangeOfVariables]:
    e = as_ode(e)
    _cubic_parts(e)
    profile = RootProfile.from_roots(roots) if roots is not None else root_profile(e)
    shift = point(t, 1, profile.roots[0])
    if profile.pattern == "triple":
        moebius = kind_shift(1, 0)
    elif profile.pattern == "double+simple":
        moebius = kind_shift(1, normalize(1 / profile.delta20))
    else:
        d10, d20 = profile.delta10, profile.delta20
        moebius = kind_shift(normalize(1 / d20 - 1 / d10), normalize(1 / d10))
    chain = composition([shift, moebius])
    reduced = apply(chain, e)
    _check_reduced_pattern(reduced, profile.pattern)
    logger.info("reduce_by_roots: %s case", profile.pattern)
    return reduced, chain


def _check_reduced_pattern(e: RationalODE, pattern: str) -> None:
    numer, denom = e.parts()
    expected = {"triple": sympy.S.One, "double+simple": y, "three-distinct": y * (y - 1)}[pattern]
    ratio = sympy.cancel(numer / expected)
    if ratio.free_symbols & {x, y} or (y in denom.free_symbols and sympy.Poly(denom, y).degree() > 1):
        raise VerificationError(f"{pattern} reduction produced {e.text()[:200]}")


# =========================
# 2) AIL SPLITTING
# =========================
@dataclass(frozen=True)
class SplitResult:
    k: Optional[Tuple[sympy.Expr, ...]]      # (k0, k1, k2, k3)
    normal_form: str                         # AIL_4 | AIL_2 | AIL_1 | constant-invariant
    chain: Optional[ChangeOfVariables] = None
    params: Dict[str, sympy.Expr] = field(default_factory=dict)
    equation: Optional[RationalODE] = None

    def to_json(self) -> dict:
        return {
            "k": [to_text(v) for v in self.k] if self.k is not None else None,
            "normal_form": self.normal_form,
            "params": {n: to_text(v) for n, v in self.params.items()},
            "chain": self.chain.to_json() if self.chain is not None else [],
            "equation": self.equation.text() if self.equation is not None else None,
        }


def ail8_to_ail4_coefficients(p: FamilyParams) -> Tuple[sympy.Expr, ...]:
    s1, s0, r1, r0 = p["s1"], p["s0"], p["r1"], p["r0"]
    a0, a1, a2, a3 = p["a0"], p["a1"], p["a2"], p["a3"]
    omega2 = (r1 * s0 - r0 * s1) ** 2
    k0 = ((a2 * r0**2 + (s0 * a0 - a1 * r0) * s0) * s0 - a3 * r0**3) * s1**2 / omega2
    k1 = ((a2 * s1 - 3 * a3 * r1) * r0**2
          + ((2 * r1 * a2 - 2 * a1 * s1) * r0 + (3 * a0 * s1 - a1 * r1) * s0) * s0) / omega2
    k2 = (((2 * a2 * s1 - 3 * a3 * r1) * r1 - a1 * s1**2) * r0
          + (3 * s1**2 * a0 + (r1 * a2 - 2 * a1 * s1) * r1) * s0) / (s1**2 * omega2)
    k3 = (a0 * s1**3 + ((a2 * s1 - a3 * r1) * r1 - a1 * s1**2) * r1) / (s1**4 * omega2)
    return tuple(normalize(k) for k in (k0, k1, k2, k3))


def _ail4(k: Sequence) -> FamilyParams:
    return FamilyParams(Family.AIL4, {f"k{i}": k[i] for i in range(4)})


def _verify_chain(source: RationalODE, chain: ChangeOfVariables, target: RationalODE, what: str) -> RationalODE:
    image = apply(chain, source)
    if not is_zero(image.rhs - target.rhs):
        raise VerificationError(f"{what}: chain image {image.text()[:200]} != {target.text()[:200]}")
    return image


def ail_split(p: FamilyParams, verify: bool = True) -> SplitResult:
    if p.family != Family.AIL8:
        raise ReductionError(f"ail_split expects AIL8 parameters, got {p.family.value}")
    s1, s0, r1, r0 = p["s1"], p["s0"], p["r1"], p["r0"]
    if is_zero(s1) and is_zero(s0):
        raise ReductionError("s1 = s0 = 0: denominator free of y, not a second-kind Abel equation")
    if is_zero(r1 * s0 - r0 * s1):
        logger.info("ail_split: omega = 0, constant invariant")
        return SplitResult(None, "constant-invariant")

    if is_zero(s1):
        if is_zero(r1) or is_zero(s0):
            raise ReductionError("s1 = 0 with r1 = 0 or s0 = 0 is degenerate")
        chain = point(t / r1, 1 / s0, -r0 / s0)
        # du/dt = -(s0/r1) A((u - r0)/s0) / (u + t)
        cubic = sum(p[f"a{i}"] * ((y - r0) / s0) ** i for i in range(4))
        poly = sympy.Poly(sympy.expand(-(s0 / r1) * cubic), y)
        k = tuple(normalize(poly.coeff_monomial(y**i)) for i in range(4))
    else:
        chain = rational_linear(-t / s1**2, -r1, -r0 * s1**2, s1, s1**2 * s0)
        k = ail8_to_ail4_coefficients(p)

    target = construct_family(_ail4(k))
    image = target
    if verify:
        image = _verify_chain(construct_family(p), chain, target, "ail_split")
    logger.info("ail_split: k = %s", [to_text(v) for v in k])
    return SplitResult(k, "AIL_4", chain, {f"k{i}": k[i] for i in range(4)}, image)


def _k_values(k) -> Tuple[sympy.Expr, ...]:
    if isinstance(k, FamilyParams):
        return tuple(k[f"k{i}"] for i in range(4))
    if isinstance(k, dict):
        return tuple(sympy.sympify(k.get(f"k{i}", symbol(f"k{i}"))) for i in range(4))
    return tuple(sympy.sympify(v) for v in k)


def ail_branch(k, verify: bool = True) -> SplitResult:
    """AIL4 -> AIL2 / AIL1 / constant-invariant."""
    k0, k1, k2, k3 = _k_values(k)
    if all(is_zero(v) for v in (k0, k1, k2, k3)):
        raise ReductionError("all k vanish: AIL4 has zero right-hand side")
    extra: Dict[str, sympy.Expr] = {}
    k3_chain = k3
    if not is_zero(k3):
        root = sympy.sqrt(-k3) if k3.is_number else None
        if root is not None and is_scalar(root):
            k4 = to_scalar(root)
        else:
            # kappa^2 = -k3 names the square root
            kappa = symbol("kappa")
            k4 = kappa
            k3_chain = -kappa**2
            extra["kappa"] = kappa
            extra["kappa_squared"] = normalize(-k3)
        chain = rational_linear(-(k2 + 3 * t * k4) / (3 * k4**2),
                                (k2 + 3 * t * k4) / (3 * k4), -1, k4, 0)
        alpha = normalize(k1 + k2**2 / (3 * k4**2))
        beta = normalize(-(k0 * k4 + k1 * k2 / (3 * k4) + 2 * k2**3 / (27 * k4**3)))
        gamma = normalize(-beta / k4)
        params = {"alpha": alpha, "beta": beta, "gamma": gamma, "k4": k4, **extra}
        target = construct_family(FamilyParams(Family.AIL2, {"alpha": alpha, "beta": beta}))
        form = "AIL_2"
    elif not is_zero(k2):
        chain = rational_linear((k1 - 2 * t) / (2 * k2), (2 * t - k1) / 2, -1, k2, 0)
        alpha = normalize(k2 * k0 - k1**2 / 4)
        params = {"alpha": alpha}
        target = construct_family(FamilyParams(Family.AIL1, {"alpha": alpha}))
        form = "AIL_1"
    else:
        logger.info("ail_branch: k3 = k2 = 0, constant invariant")
        return SplitResult((k0, k1, k2, k3), "constant-invariant")

    image = target
    if verify:
        source = construct_family(_ail4((k0, k1, k2, k3_chain)))
        image = _verify_chain(source, chain, target, "ail_branch")
    logger.info("ail_branch: %s with %s", form, {n: to_text(v) for n, v in params.items()})
    return SplitResult((k0, k1, k2, k3), form, chain, params, image)


def ail_reduce(p: FamilyParams, verify: bool = True) -> SplitResult:
    """AIL8 straight to its minimal normal form, chain concatenated."""
    split = ail_split(p, verify=verify)
    if split.normal_form == "constant-invariant":
        return split
    if all(is_zero(v) for v in split.k):
        return split
    branch = ail_branch(split.k, verify=verify)
    if branch.chain is None:
        return SplitResult(split.k, branch.normal_form, split.chain, split.params, split.equation)
    chain = composition([split.chain, branch.chain])
    params = {**split.params, **branch.params}
    return SplitResult(split.k, branch.normal_form, chain, params, branch.equation)
