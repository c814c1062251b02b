"""
CHANGE-OF-VARIABLES ENGINE
==========================

Transforms act on y' = Phi(x, y) by introducing new variables (t, u) and
renaming them back to (x, y) afterwards.

Kinds:
- point:           x = F(t), y = P(t) u + Q(t)                (first-kind class group)
- rational-linear: x = F(t), y = (P1 u + Q1) / (P2 u + Q2)    (second-kind class group)
- kind-shift:      x = t,    y = 1 / (g1 u + g0)
- inversion:       x <-> y
- composition:     list of the above, applied left to right

Slots are written in t; x in a slot is read as t.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import sympy

from expr_core import (
    FamilyError,
    NormalizationError,
    SingularTransformError,
    is_zero,
    normalize,
    parse_expression,
    t,
    to_text,
    u,
    x,
    y,
)
from ode_model import (
    AbelFirstKind,
    AbelSecondKind,
    Family,
    FamilyParams,
    RationalODE,
    as_ode,
    construct_family,
    extract_slots,
    shape_classify,
)

logger = logging.getLogger(__name__)


class TransformKind(str, Enum):
    POINT = "point"
    RATIONAL_LINEAR = "rational-linear"
    KIND_SHIFT = "kind-shift"
    INVERSION = "inversion"
    COMPOSITION = "composition"


SLOT_NAMES = {
    TransformKind.POINT: ("F", "P", "Q"),
    TransformKind.RATIONAL_LINEAR: ("F", "P1", "Q1", "P2", "Q2"),
    TransformKind.KIND_SHIFT: ("g1", "g0"),
    TransformKind.INVERSION: (),
    TransformKind.COMPOSITION: (),
}


def _slot(value) -> sympy.Expr:
    expr = parse_expression(value) if isinstance(value, str) else sympy.sympify(value, rational=True)
    return expr.subs(x, t)


def _dt(expr) -> sympy.Expr:
    return sympy.diff(expr, t)


@dataclass(frozen=True)
class ChangeOfVariables:
    kind: TransformKind
    slots: Dict[str, sympy.Expr] = field(default_factory=dict)
    steps: Tuple["ChangeOfVariables", ...] = ()

    def __getitem__(self, name: str) -> sympy.Expr:
        return self.slots[name]

    def describe(self) -> str:
        s = {k: to_text(v) for k, v in self.slots.items()}
        if self.kind == TransformKind.POINT:
            return f"{{x = {s['F']}, y = ({s['P']})*u + ({s['Q']})}}"
        if self.kind == TransformKind.RATIONAL_LINEAR:
            return f"{{x = {s['F']}, y = (({s['P1']})*u + ({s['Q1']}))/(({s['P2']})*u + ({s['Q2']}))}}"
        if self.kind == TransformKind.KIND_SHIFT:
            return f"{{x = t, y = 1/(({s['g1']})*u + ({s['g0']}))}}"
        if self.kind == TransformKind.INVERSION:
            return "{x <-> y}"
        return " then ".join(step.describe() for step in self.steps)

    def to_json(self):
        if self.kind == TransformKind.COMPOSITION:
            return [step.to_json() for step in self.steps]
        data = {"kind": self.kind.value}
        data.update({k: to_text(v) for k, v in self.slots.items()})
        return data

    def __str__(self):
        return self.describe()


# =========================
# 1) CONSTRUCTORS
# =========================
def point(F, P=1, Q=0) -> ChangeOfVariables:
    F, P, Q = _slot(F), _slot(P), _slot(Q)
    if is_zero(_dt(F)):
        raise SingularTransformError(f"point transform needs F' != 0, got F = {to_text(F)}")
    if is_zero(P):
        raise SingularTransformError("point transform needs P != 0")
    return ChangeOfVariables(TransformKind.POINT, {"F": F, "P": P, "Q": Q})


def rational_linear(F, P1, Q1, P2, Q2) -> ChangeOfVariables:
    F, P1, Q1, P2, Q2 = (_slot(v) for v in (F, P1, Q1, P2, Q2))
    if is_zero(_dt(F)):
        raise SingularTransformError(f"rational-linear transform needs F' != 0, got F = {to_text(F)}")
    if is_zero(P1 * Q2 - Q1 * P2):
        raise SingularTransformError("rational-linear transform needs P1*Q2 - P2*Q1 != 0")
    return ChangeOfVariables(TransformKind.RATIONAL_LINEAR,
                             {"F": F, "P1": P1, "Q1": Q1, "P2": P2, "Q2": Q2})


def kind_shift(g1, g0=0) -> ChangeOfVariables:
    g1, g0 = _slot(g1), _slot(g0)
    if is_zero(g1):
        raise SingularTransformError("kind shift needs g1 != 0")
    return ChangeOfVariables(TransformKind.KIND_SHIFT, {"g1": g1, "g0": g0})


def inversion() -> ChangeOfVariables:
    return ChangeOfVariables(TransformKind.INVERSION)


def composition(steps: Sequence[ChangeOfVariables]) -> ChangeOfVariables:
    flat: List[ChangeOfVariables] = []
    for step in steps:
        if step.kind == TransformKind.COMPOSITION:
            flat.extend(step.steps)
        else:
            flat.append(step)
    if not flat:
        raise ValueError("composition needs at least one transform")
    if len(flat) == 1:
        return flat[0]
    return ChangeOfVariables(TransformKind.COMPOSITION, steps=tuple(flat))


def transform_from_json(data) -> ChangeOfVariables:
    if isinstance(data, str):
        data = json.loads(data)
    if isinstance(data, list):
        return composition([transform_from_json(d) for d in data])
    kind = TransformKind(data["kind"])
    args = {k: v for k, v in data.items() if k != "kind"}
    if kind == TransformKind.POINT:
        return point(args["F"], args.get("P", 1), args.get("Q", 0))
    if kind == TransformKind.RATIONAL_LINEAR:
        return rational_linear(args["F"], args["P1"], args["Q1"], args["P2"], args["Q2"])
    if kind == TransformKind.KIND_SHIFT:
        return kind_shift(args["g1"], args.get("g0", 0))
    if kind == TransformKind.INVERSION:
        return inversion()
    return composition([transform_from_json(d) for d in args.get("steps", [])])


# =========================
# 2) APPLICATION
# =========================
def _rename(expr) -> sympy.Expr:
    return sympy.sympify(expr).subs({t: x, u: y}, simultaneous=True)


def _moebius(T: ChangeOfVariables):
    """(F, [[P1, Q1], [P2, Q2]]) for point, rational-linear and kind-shift transforms."""
    if T.kind == TransformKind.POINT:
        return T["F"], [[T["P"], T["Q"]], [sympy.S.Zero, sympy.S.One]]
    if T.kind == TransformKind.RATIONAL_LINEAR:
        return T["F"], [[T["P1"], T["Q1"]], [T["P2"], T["Q2"]]]
    if T.kind == TransformKind.KIND_SHIFT:
        return t, [[sympy.S.Zero, sympy.S.One], [T["g1"], T["g0"]]]
    raise ValueError(f"{T.kind.value} is not a Moebius-type transform")


def _new_rhs(T: ChangeOfVariables, rhs: sympy.Expr) -> sympy.Expr:
    if T.kind == TransformKind.POINT:
        F, P, Q = T["F"], T["P"], T["Q"]
        phi = rhs.subs({x: F, y: P * u + Q}, simultaneous=True)
        return (_dt(F) * phi - _dt(P) * u - _dt(Q)) / P
    F, ((P1, Q1), (P2, Q2)) = _moebius(T)
    numer, denom = P1 * u + Q1, P2 * u + Q2
    det = P1 * Q2 - Q1 * P2
    phi = rhs.subs({x: F, y: numer / denom}, simultaneous=True)
    return (phi * _dt(F) * denom**2 - (_dt(P1) * u + _dt(Q1)) * denom
            + numer * (_dt(P2) * u + _dt(Q2))) / det


def apply(T: ChangeOfVariables, e) -> RationalODE:
    """Transformed equation, normalized, with T appended to the provenance."""
    e = as_ode(e)
    if T.kind == TransformKind.COMPOSITION:
        for step in T.steps:
            e = apply(step, e)
        return e
    if T.kind == TransformKind.INVERSION:
        return invert_xy(e)
    try:
        rhs = normalize(_rename(_new_rhs(T, e.rhs)))
    except NormalizationError as err:
        raise NormalizationError(f"transform {T.describe()[:200]} failed: {err}")
    logger.info("applied %s transform", T.kind.value)
    return RationalODE(rhs, e.provenance + (T,))


def invert_xy(e) -> RationalODE:
    e = as_ode(e)
    if is_zero(e.rhs):
        raise SingularTransformError("cannot exchange x and y: right-hand side is identically zero")
    swapped = e.rhs.subs({x: y, y: x}, simultaneous=True)
    return RationalODE(normalize(1 / swapped), e.provenance + (inversion(),))


def kind_convert(e, g1, g0=0) -> AbelSecondKind:
    """First kind -> second kind through y = 1/(g1 u + g0)."""
    if not isinstance(e, AbelFirstKind):
        from ode_model import first_kind_view
        e = first_kind_view(e)
    out = apply(kind_shift(g1, g0), e)
    return AbelSecondKind(**extract_slots(out, "abel-second-kind"))


def to_first_kind(e, g1=None, g0=None) -> AbelFirstKind:
    """Second kind -> first kind through g1 y + g0 = 1/u (defaults: the equation's own g1, g0)."""
    if not isinstance(e, AbelSecondKind):
        e = AbelSecondKind(**extract_slots(as_ode(e), "abel-second-kind"))
    g1 = e.g1 if g1 is None else sympy.sympify(g1)
    g0 = e.g0 if g0 is None else sympy.sympify(g0)
    T = first_kind_transform(g1, g0)
    out = apply(T, e.to_ode())
    report = shape_classify(out)
    if "abel-first-kind" not in report.tags:
        raise FamilyError(f"conversion to first kind degenerated: {out.text()[:200]}")
    return AbelFirstKind(**extract_slots(out, "abel-first-kind"))


def first_kind_transform(g1, g0) -> ChangeOfVariables:
    g1, g0 = _slot(g1), _slot(g0)
    return rational_linear(t, -g0, 1, g1, 0)


# =========================
# 3) FIRST-INTEGRAL TRANSPORT
# =========================
def _forward_bindings(T: ChangeOfVariables) -> Dict[sympy.Symbol, sympy.Expr]:
    """Old (x, y) in terms of the new variables, already renamed to (x, y)."""
    if T.kind == TransformKind.INVERSION:
        return {x: y, y: x}
    F, ((P1, Q1), (P2, Q2)) = _moebius(T)
    return {x: _rename(F), y: _rename((P1 * u + Q1) / (P2 * u + Q2))}


def pull_back(T: ChangeOfVariables, psi) -> sympy.Expr:
    """A first integral of apply(T, e), given a first integral psi of e."""
    psi = sympy.sympify(psi)
    if T.kind == TransformKind.COMPOSITION:
        for step in T.steps:
            psi = pull_back(step, psi)
        return psi
    return psi.subs(_forward_bindings(T), simultaneous=True)


# =========================
# 4) GROUP OPERATIONS
# =========================
def _after(expr, G) -> sympy.Expr:
    return sympy.sympify(expr).subs(t, G)


def _merge(first: ChangeOfVariables, second: ChangeOfVariables) -> ChangeOfVariables:
    F1, M1 = _moebius(first)
    F2, M2 = _moebius(second)
    A = sympy.Matrix(M1).subs(t, F2) * sympy.Matrix(M2)
    F = normalize(_after(F1, F2))
    A = A.applyfunc(normalize)
    if A[1, 0] == 0 and A[1, 1] != 0:
        return point(F, normalize(A[0, 0] / A[1, 1]), normalize(A[0, 1] / A[1, 1]))
    return rational_linear(F, A[0, 0], A[0, 1], A[1, 0], A[1, 1])


def compose(Ts: Sequence[ChangeOfVariables]) -> ChangeOfVariables:
    """Composition applied left to right; adjacent Moebius-type steps are merged."""
    chain = composition(Ts)
    flat = list(chain.steps) if chain.kind == TransformKind.COMPOSITION else [chain]
    merged: List[ChangeOfVariables] = []
    for step in flat:
        if merged and step.kind != TransformKind.INVERSION and merged[-1].kind != TransformKind.INVERSION:
            merged[-1] = _merge(merged[-1], step)
        elif merged and step.kind == TransformKind.INVERSION and merged[-1].kind == TransformKind.INVERSION:
            merged.pop()
        else:
            merged.append(step)
    if not merged:
        return point(t)
    return composition(merged)


def _invert_map(F) -> sympy.Expr:
    w = sympy.Dummy("w")
    for candidate in sympy.solve(sympy.Eq(F.subs(t, w), t), w):
        if is_zero(F.subs(t, candidate) - t):
            return candidate
    raise SingularTransformError(f"x = {to_text(F)} has no closed-form inverse")


def inverse(T: ChangeOfVariables) -> ChangeOfVariables:
    if T.kind == TransformKind.INVERSION:
        return T
    if T.kind == TransformKind.COMPOSITION:
        return composition([inverse(step) for step in reversed(T.steps)])
    F, ((P1, Q1), (P2, Q2)) = _moebius(T)
    G = _invert_map(F)
    if T.kind == TransformKind.POINT:
        P, Q = _after(P1, G), _after(Q1, G)
        return point(G, normalize(1 / P), normalize(-Q / P))
    return rational_linear(G, _after(Q2, G), _after(-Q1, G), _after(-P2, G), _after(P1, G))


# =========================
# 5) GTIB -> AIL8
# =========================
@dataclass(frozen=True)
class GtibReduction:
    lam: sympy.Rational
    gtib: RationalODE            # GTIB with coefficients (1 - lam) a_i
    ail8: RationalODE            # AIL8 with coefficients a_i
    to_common: Tuple[ChangeOfVariables, ChangeOfVariables]
    common_from_gtib: sympy.Expr
    common_from_ail8: sympy.Expr
    verified: bool
    direct: Optional[ChangeOfVariables] = None


def gtib_reduction(params: FamilyParams, lam) -> GtibReduction:
    """
    x = t^(1/(1-lam)) with lam = p/q is carried out in the monomial coordinate
    w: x = w^q on the GTIB side and t = w^(q-p) on the AIL8 side. When
    |q - p| = 1 the direct rational substitution is also returned.
    """
    lam = sympy.Rational(lam)
    if lam == 1:
        raise FamilyError("GTIB reduction needs lam != 1")
    if params.family != Family.AIL8:
        params = FamilyParams(Family.AIL8, {k: v for k, v in params.values.items() if k != "lam"})
    p_num, q_den = int(lam.p), int(lam.q)
    # GTIB coefficients are the AIL8 ones scaled by (1 - lam)
    gtib_values = dict(params.values)
    for i in range(4):
        gtib_values[f"a{i}"] = (1 - lam) * params[f"a{i}"]
    gtib_values["lam"] = lam
    gtib = construct_family(FamilyParams(Family.GTIB, gtib_values))
    ail8 = construct_family(params)

    # GTIB side: x = w^q on the constructed equation, x^r read as w^(q r)
    w = t
    rhs_w = gtib.rhs.replace(
        lambda e: e.is_Pow and e.base == x and e.exp.is_Rational,
        lambda e: w ** (e.exp * q_den),
    )
    rhs_w = rhs_w.subs({x: w**q_den, y: u}, simultaneous=True)
    from_gtib = normalize(_rename(q_den * w**(q_den - 1) * rhs_w))
    to_w_gtib = point(w**q_den)

    to_w_ail8 = point(w**(q_den - p_num))
    from_ail8 = apply(to_w_ail8, ail8).rhs
    verified = is_zero(from_gtib - from_ail8)
    direct = None
    if abs(q_den - p_num) == 1:
        # t = w^(+-1), so x = t^(q/(q-p)) is rational
        direct = point(t ** (q_den * (q_den - p_num)))
    logger.info("GTIB lam=%s reduction verified=%s", lam, verified)
    return GtibReduction(lam, gtib, ail8, (to_w_gtib, to_w_ail8), from_gtib, from_ail8, verified, direct)
