"""
ABEL EQUATION MODEL
===================

Equation values and the parametric families built on them.

Types:
- RationalODE: y' = rhs(x, y), normalized, with the transform chain that produced it
- AbelFirstKind: y' = f3 y^3 + f2 y^2 + f1 y + f0
- AbelSecondKind: y' = (tf3 y^3 + tf2 y^2 + tf1 y + tf0) / (g1 y + g0)
- FamilyParams: family tag + parameter assignment (unbound parameters stay symbolic)

Families: AIL8, GTIB, AIR10, AIA16, AIL4, AIL_FirstKind, AIL2, AIL1.
"""

import json
import logging
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import sympy

from expr_core import (
    FamilyError,
    ParseError,
    canonical_parts,
    differentiate,
    is_zero,
    normalize,
    ode_text,
    parse_expression,
    split_ode_text,
    symbol,
    to_text,
    x,
    y,
)

logger = logging.getLogger(__name__)


# =========================
# 1) FAMILIES
# =========================
class Family(str, Enum):
    AIL8 = "AIL8"
    GTIB = "GTIB"
    AIR10 = "AIR10"
    AIA16 = "AIA16"
    AIL4 = "AIL4"
    AIL_FIRST_KIND = "AIL_FirstKind"
    AIL2 = "AIL2"
    AIL1 = "AIL1"


def _names(prefix: str, top: int) -> List[str]:
    return [f"{prefix}{i}" for i in range(top, -1, -1)]


FAMILY_PARAMETERS: Dict[Family, List[str]] = {
    Family.AIL8: ["s1", "s0", "r1", "r0"] + _names("a", 3),
    Family.GTIB: ["s1", "s0", "r1", "r0"] + _names("a", 3) + ["lam"],
    Family.AIR10: _names("s", 2) + _names("r", 2) + _names("a", 3),
    Family.AIA16: _names("a", 3) + _names("b", 3) + _names("s", 3) + _names("r", 3),
    Family.AIL4: _names("k", 3),
    Family.AIL_FIRST_KIND: _names("k", 3),
    Family.AIL2: ["alpha", "beta"],
    Family.AIL1: ["alpha"],
}


def parse_family(tag: str) -> Family:
    for fam in Family:
        if fam.value.lower() == str(tag).lower():
            return fam
    raise FamilyError(f"unknown family tag {tag!r}; expected one of {[f.value for f in Family]}")


@dataclass(frozen=True)
class FamilyParams:
    family: Family
    values: Dict[str, sympy.Expr] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.family, Family):
            object.__setattr__(self, "family", parse_family(self.family))
        allowed = FAMILY_PARAMETERS[self.family]
        extras = sorted(set(self.values) - set(allowed))
        if extras:
            raise FamilyError(f"{self.family.value} has no parameters {extras}; expected {allowed}")
        clean = {}
        for name, value in self.values.items():
            expr = parse_expression(value) if isinstance(value, str) else sympy.sympify(value, rational=True)
            if expr.free_symbols & {x, y}:
                raise FamilyError(f"parameter {name} must not depend on x or y: {to_text(expr)}")
            clean[name] = expr
        object.__setattr__(self, "values", clean)

    def value(self, name: str) -> sympy.Expr:
        """Bound value, or the parameter symbol itself when unbound."""
        return self.values.get(name, symbol(name))

    def __getitem__(self, name: str) -> sympy.Expr:
        return self.value(name)

    def bound(self) -> Dict[str, sympy.Expr]:
        return dict(self.values)

    def to_json(self) -> dict:
        return {
            "family": self.family.value,
            "params": {n: (to_text(self.values[n]) if n in self.values else "sym")
                       for n in FAMILY_PARAMETERS[self.family]},
        }

    @classmethod
    def from_json(cls, data: dict) -> "FamilyParams":
        params = {k: v for k, v in (data.get("params") or {}).items() if v != "sym"}
        return cls(parse_family(data["family"]), params)


def random_params(family: Family, rng: random.Random, span: int = 9) -> FamilyParams:
    """Random small rational assignment of every parameter of the family."""
    values = {}
    for name in FAMILY_PARAMETERS[family]:
        if name == "lam":
            continue
        values[name] = sympy.Rational(rng.randint(-span, span), rng.randint(1, 4))
    return FamilyParams(family, values)


# =========================
# 2) EQUATIONS
# =========================
@dataclass(frozen=True)
class RationalODE:
    """y' = rhs(x, y) with rhs normalized; provenance lists the applied transforms."""

    rhs: sympy.Expr
    provenance: Tuple = ()

    @classmethod
    def from_rhs(cls, rhs, provenance: Tuple = ()) -> "RationalODE":
        return cls(normalize(rhs), tuple(provenance))

    def to_ode(self) -> "RationalODE":
        return self

    @property
    def is_rational(self) -> bool:
        return self.rhs.is_rational_function(x, y)

    def parts(self) -> Tuple[sympy.Expr, sympy.Expr]:
        return canonical_parts(self.rhs)

    def text(self) -> str:
        return ode_text(self.rhs)

    def same_equation(self, other) -> bool:
        return is_zero(self.rhs - _rhs_of(other))

    def __str__(self):
        return self.text()


@dataclass(frozen=True)
class AbelFirstKind:
    f3: sympy.Expr
    f2: sympy.Expr
    f1: sympy.Expr
    f0: sympy.Expr

    def __post_init__(self):
        if is_zero(self.f3):
            raise FamilyError("f3 vanishes: the equation is Riccati or linear, not Abel")

    @property
    def rhs(self) -> sympy.Expr:
        return normalize(self.f3 * y**3 + self.f2 * y**2 + self.f1 * y + self.f0)

    def to_ode(self, provenance: Tuple = ()) -> RationalODE:
        return RationalODE(self.rhs, tuple(provenance))

    def slots(self) -> Dict[str, sympy.Expr]:
        return {"f3": self.f3, "f2": self.f2, "f1": self.f1, "f0": self.f0}

    def text(self) -> str:
        return ode_text(self.rhs)


@dataclass(frozen=True)
class AbelSecondKind:
    tf3: sympy.Expr
    tf2: sympy.Expr
    tf1: sympy.Expr
    tf0: sympy.Expr
    g1: sympy.Expr
    g0: sympy.Expr

    def __post_init__(self):
        if is_zero(self.g1):
            raise FamilyError("g1 vanishes: not a second-kind Abel equation")

    @property
    def rhs(self) -> sympy.Expr:
        numer = self.tf3 * y**3 + self.tf2 * y**2 + self.tf1 * y + self.tf0
        return normalize(numer / (self.g1 * y + self.g0))

    def to_ode(self, provenance: Tuple = ()) -> RationalODE:
        return RationalODE(self.rhs, tuple(provenance))

    def slots(self) -> Dict[str, sympy.Expr]:
        return {"tf3": self.tf3, "tf2": self.tf2, "tf1": self.tf1, "tf0": self.tf0,
                "g1": self.g1, "g0": self.g0}

    def text(self) -> str:
        return ode_text(self.rhs)


AbelEquation = Union[RationalODE, AbelFirstKind, AbelSecondKind]


def _rhs_of(e) -> sympy.Expr:
    if isinstance(e, (RationalODE, AbelFirstKind, AbelSecondKind)):
        return e.rhs
    return sympy.sympify(e)


def as_ode(e) -> RationalODE:
    if isinstance(e, RationalODE):
        return e
    if isinstance(e, (AbelFirstKind, AbelSecondKind)):
        return e.to_ode()
    return RationalODE.from_rhs(e)


def parse(text: str):
    """
    Parse an expression, or an ODE "y' = ...". ODEs come back as the most
    specific typed view (first kind, second kind, or RationalODE).
    """
    rhs_text = split_ode_text(text)
    if rhs_text is None:
        if "'" in text:
            raise ParseError("derivative only allowed as the left side \"y' = ...\"", text.index("'"))
        return normalize(parse_expression(text))
    offset = len(text) - len(rhs_text)
    try:
        rhs = parse_expression(rhs_text)
    except ParseError as e:
        if e.position is None:
            raise
        raise ParseError(str(e).rsplit(" (at position", 1)[0], e.position + offset)
    return typed_view(RationalODE.from_rhs(rhs))


def typed_view(e: RationalODE):
    if not e.is_rational:
        return e
    report = shape_classify(e)
    if "abel-first-kind" in report.tags:
        return AbelFirstKind(**extract_slots(e, "abel-first-kind"))
    if "abel-second-kind" in report.tags:
        return AbelSecondKind(**extract_slots(e, "abel-second-kind"))
    return e


# =========================
# 3) FAMILY CONSTRUCTION
# =========================
def _cubic(p: FamilyParams, prefix: str):
    return sum(p[f"{prefix}{i}"] * y**i for i in range(4))


def family_rhs(p: FamilyParams) -> sympy.Expr:
    """Right-hand side of the family display, parameters substituted, not normalized."""
    fam = p.family
    if fam == Family.AIL8:
        return -_cubic(p, "a") / ((p["s1"] * x + p["s0"]) * y + p["r1"] * x + p["r0"])
    if fam == Family.GTIB:
        xl = x ** p["lam"]
        return -_cubic(p, "a") / ((p["s1"] * x + p["s0"] * xl) * y + p["r1"] * x + p["r0"] * xl)
    if fam == Family.AIR10:
        s_poly = p["s2"] * x**2 + p["s1"] * x + p["s0"]
        r_poly = p["r2"] * x**2 + p["r1"] * x + p["r0"]
        return -_cubic(p, "a") / (s_poly * y + r_poly)
    if fam == Family.AIA16:
        numer = sum((p[f"a{i}"] * x + p[f"b{i}"]) * y**i for i in range(4))
        s_poly = sum(p[f"s{i}"] * x**i for i in range(4))
        r_poly = sum(p[f"r{i}"] * x**i for i in range(4))
        return -numer / (s_poly * y + r_poly)
    if fam == Family.AIL4:
        return sum(p[f"k{i}"] * y**i for i in range(4)) / (y + x)
    if fam == Family.AIL_FIRST_KIND:
        k0, k1, k2, k3 = (p[f"k{i}"] for i in range(4))
        return ((k3 * x**3 - k2 * x**2 + k1 * x - k0) * y**3
                - (3 * k3 * x**2 - 2 * k2 * x + k1 + 1) * y**2
                + (3 * k3 * x - k2) * y - k3)
    if fam == Family.AIL2:
        alpha, beta = p["alpha"], p["beta"]
        return (x * alpha - beta - x**3) * y**3 + (3 * x**2 - 1 - alpha) * y**2 - 3 * x * y + 1
    if fam == Family.AIL1:
        alpha = p["alpha"]
        return (alpha + x**2) * y**3 - (2 * x + 1) * y**2 + y
    raise FamilyError(f"unknown family {fam}")


def construct_family(p: FamilyParams) -> RationalODE:
    if not isinstance(p, FamilyParams):
        raise FamilyError(f"FamilyParams expected, got {type(p).__name__}")
    raw = family_rhs(p)
    numer, denom = sympy.fraction(sympy.together(raw))
    if sympy.expand(denom) == 0:
        raise FamilyError(f"{p.family.value}: denominator vanishes for {p.to_json()['params']}")
    e = RationalODE.from_rhs(raw, provenance=(("family", p.family.value),))
    logger.info("constructed %s: %s", p.family.value, e.text()[:200])
    return e


# =========================
# 4) SHAPE RECOGNITION
# =========================
SHAPE_ORDER = ("AIL-form", "AIR-form", "AIA-form", "abel-first-kind",
               "abel-second-kind", "riccati", "linear")


@dataclass(frozen=True)
class ShapeReport:
    tags: Tuple[str, ...]
    primary: str
    slots: Dict[str, sympy.Expr] = field(default_factory=dict)

    def __contains__(self, tag: str) -> bool:
        return tag in self.tags

    def to_json(self) -> dict:
        return {"tags": list(self.tags), "primary": self.primary,
                "slots": {k: to_text(v) for k, v in self.slots.items()}}


def _degree(poly_expr, var) -> int:
    if poly_expr == 0:
        return -1
    if var not in poly_expr.free_symbols:
        return 0
    return sympy.Poly(poly_expr, var).degree()


def _is_poly(expr, *gens) -> bool:
    return sympy.sympify(expr).is_polynomial(*gens)


def shape_classify(e) -> ShapeReport:
    """Every matching shape tag; slots for the first tag in SHAPE_ORDER that matches."""
    e = as_ode(e)
    if not e.is_rational:
        return ShapeReport((), "none")
    numer, denom = e.parts()
    if not (_is_poly(numer, x, y) and _is_poly(denom, x, y)):
        return ShapeReport((), "none")
    ny, nx = _degree(numer, y), _degree(numer, x)
    dy, dx = _degree(denom, y), _degree(denom, x)
    # x-degree of each y-coefficient of the numerator
    n_coeff_x = max((_degree(c, x) for c in sympy.Poly(numer, y).all_coeffs()), default=-1) if numer != 0 else -1

    tags = []
    aia = ny <= 3 and n_coeff_x <= 1 and dy <= 1 and dx <= 3
    if aia and nx <= 0 and dx <= 1:
        tags.append("AIL-form")
    if aia and nx <= 0 and dx <= 2:
        tags.append("AIR-form")
    if aia:
        tags.append("AIA-form")
    if dy <= 0:
        if ny == 3:
            tags.append("abel-first-kind")
        elif ny == 2:
            tags.append("riccati")
        else:
            tags.append("linear")
    elif dy == 1 and ny <= 3:
        tags.append("abel-second-kind")
    ordered = tuple(t for t in SHAPE_ORDER if t in tags)
    if not ordered:
        return ShapeReport((), "none")
    primary = ordered[0]
    return ShapeReport(ordered, primary, extract_slots(e, primary))


def _coeff(poly_expr, var, k):
    return sympy.expand(poly_expr).coeff(var, k)


def extract_slots(e, tag: str) -> Dict[str, sympy.Expr]:
    """Coefficient slots of a normalized rhs for a shape tag (see reconstruct)."""
    e = as_ode(e)
    numer, denom = e.parts()
    if tag in ("abel-first-kind", "riccati", "linear"):
        if _degree(denom, y) > 0:
            raise FamilyError(f"{tag}: denominator depends on y")
        return {f"f{i}": normalize(_coeff(numer, y, i) / denom) for i in range(3, -1, -1)}
    if tag == "abel-second-kind":
        g1, g0 = _coeff(denom, y, 1), _coeff(denom, y, 0)
        slots = {f"tf{i}": _coeff(numer, y, i) for i in range(3, -1, -1)}
        slots.update(g1=g1, g0=g0)
        return slots
    if tag in ("AIL-form", "AIR-form", "AIA-form"):
        top = {"AIL-form": 1, "AIR-form": 2, "AIA-form": 3}[tag]
        neg = sympy.expand(-numer)
        slots = {}
        for i in range(3, -1, -1):
            ci = _coeff(neg, y, i)
            if tag == "AIA-form":
                slots[f"a{i}"] = _coeff(ci, x, 1)
                slots[f"b{i}"] = _coeff(ci, x, 0)
            else:
                slots[f"a{i}"] = ci
        d1, d0 = _coeff(denom, y, 1), _coeff(denom, y, 0)
        for i in range(top, -1, -1):
            slots[f"s{i}"] = _coeff(d1, x, i)
            slots[f"r{i}"] = _coeff(d0, x, i)
        return slots
    raise FamilyError(f"no slot layout for shape {tag!r}")


def reconstruct(tag: str, slots: Dict[str, sympy.Expr]) -> RationalODE:
    """Inverse of extract_slots."""
    s = {k: sympy.sympify(v) for k, v in slots.items()}
    if tag in ("abel-first-kind", "riccati", "linear"):
        return RationalODE.from_rhs(sum(s[f"f{i}"] * y**i for i in range(4)))
    if tag == "abel-second-kind":
        return AbelSecondKind(**s).to_ode()
    if tag in ("AIL-form", "AIR-form", "AIA-form"):
        top = {"AIL-form": 1, "AIR-form": 2, "AIA-form": 3}[tag]
        if tag == "AIA-form":
            numer = sum((s[f"a{i}"] * x + s[f"b{i}"]) * y**i for i in range(4))
        else:
            numer = sum(s[f"a{i}"] * y**i for i in range(4))
        s_poly = sum(s[f"s{i}"] * x**i for i in range(top + 1))
        r_poly = sum(s[f"r{i}"] * x**i for i in range(top + 1))
        return RationalODE.from_rhs(-numer / (s_poly * y + r_poly))
    raise FamilyError(f"no slot layout for shape {tag!r}")


def first_kind_view(e) -> AbelFirstKind:
    """Typed first-kind view; second-kind equations are converted with g1 y + g0 = 1/u."""
    if isinstance(e, AbelFirstKind):
        return e
    if isinstance(e, AbelSecondKind):
        from transform import to_first_kind
        return to_first_kind(e)
    e = as_ode(e)
    report = shape_classify(e)
    if "abel-first-kind" in report.tags:
        return AbelFirstKind(**extract_slots(e, "abel-first-kind"))
    if "abel-second-kind" in report.tags:
        from transform import to_first_kind
        return to_first_kind(AbelSecondKind(**extract_slots(e, "abel-second-kind")))
    raise FamilyError(f"not an Abel equation: {e.text()[:200]}")


# =========================
# 5) INVARIANTS
# =========================
def abel_invariants(e) -> Tuple[sympy.Expr, sympy.Expr, Optional[sympy.Expr]]:
    """
    Relative invariants (s3, s5) of the first-kind form and the absolute
    invariant s5^3 / s3^5 (None when s3 vanishes).
    """
    fk = first_kind_view(e)
    f3, f2, f1, f0 = fk.f3, fk.f2, fk.f1, fk.f0
    d = lambda v: differentiate(v, x)  # noqa: E731
    s3 = normalize(f0 * f3**2 - f1 * f2 * f3 / 3 + 2 * f2**3 / 27
                   + (d(f2) * f3 - f2 * d(f3)) / 3)
    if is_zero(s3):
        return sympy.S.Zero, sympy.S.Zero, None
    big_f1 = f1 - f2**2 / (3 * f3)
    s5 = normalize(f3 * d(s3) - 3 * d(f3) * s3 - 3 * big_f1 * f3 * s3)
    return s3, s5, normalize(s5**3 / s3**5)


def is_constant_invariant(e) -> bool:
    _, _, invariant = abel_invariants(e)
    if invariant is None:
        return True
    return is_zero(differentiate(invariant, x))


# =========================
# 6) JSON
# =========================
def equation_to_json(e, params: Optional[FamilyParams] = None) -> dict:
    e_ode = as_ode(e)
    report = shape_classify(e_ode)
    data = {
        "kind": report.primary,
        "vars": ["x", "y"],
        "rhs": to_text(e_ode.rhs),
        "slots": {k: to_text(v) for k, v in report.slots.items()},
        "params": {},
    }
    if params is not None:
        data["family"] = params.family.value
        data["params"] = params.to_json()["params"]
    else:
        free = sorted(e_ode.rhs.free_symbols - {x, y}, key=lambda s: s.name)
        data["params"] = {s.name: "sym" for s in free}
    return data


def equation_from_json(data) -> RationalODE:
    if isinstance(data, str):
        data = json.loads(data)
    if "family" in data:
        return construct_family(FamilyParams.from_json(data))
    if "rhs" in data:
        return RationalODE.from_rhs(parse_expression(data["rhs"]))
    slots = {k: parse_expression(v) for k, v in data.get("slots", {}).items()}
    return reconstruct(data["kind"], slots)
