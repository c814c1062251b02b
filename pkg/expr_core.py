"""
EXACT EXPRESSION CORE
=====================

Arithmetic substrate for the Abel toolkit:

1. Symbol registry (main variables x, y, t, u and the family parameters)
2. Formal integrals Int(e, v) with exact differentiation
3. Parsing / printing in the toolkit grammar (^ for powers, I for the unit)
4. Canonical rational functions over the Gaussian rationals QQ(i)
5. Tower normalization: exp/log/atan/integral/radical atoms are replaced by
   fresh indeterminates so that zero testing reduces to polynomial arithmetic
6. Sampled (mpmath) evaluation for probabilistic zero testing

FLOW:
text -> parse_expression -> sympy tree -> lift into a Tower -> canonical
numerator/denominator -> root relations reduced -> zero test / lowered back
"""

import logging
import math
import random
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import mpmath
import sympy
from sympy.parsing.sympy_parser import (
    convert_xor,
    parse_expr,
    rationalize,
    standard_transformations,
)
from sympy.printing.str import StrPrinter

import config

logger = logging.getLogger(__name__)

Expression = sympy.Expr


# =========================
# 1) ERRORS
# =========================
class ParseError(ValueError):
    """Syntax error in the expression grammar; position is 0-based or None."""

    def __init__(self, message: str, position: Optional[int] = None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class NormalizationError(ZeroDivisionError):
    """Division by something that normalizes to zero."""


class UnsupportedExpressionError(ValueError):
    """Node kind the normalizer or evaluator does not handle."""


class SingularTransformError(ValueError):
    """A change of variables violates its invertibility condition."""


class FamilyError(ValueError):
    """Unknown family tag or ill-formed parameter assignment."""


class ReductionError(ValueError):
    """A reduction step cannot be carried out for the given input."""


class VerificationError(RuntimeError):
    """An identity that must hold failed to normalize to zero."""


class NumericError(RuntimeError):
    """Floating-point integration or evaluation failed."""


# =========================
# 2) SYMBOL REGISTRY
# =========================
# Append-only; symbols carry no assumptions (everything is complex).
class SymbolRegistry:
    def __init__(self, strict: bool = False):
        self._lock = threading.Lock()
        self._symbols: Dict[str, sympy.Symbol] = {}
        self.strict = strict

    def register(self, *names: str) -> Tuple[sympy.Symbol, ...]:
        with self._lock:
            out = []
            for name in names:
                if name not in self._symbols:
                    self._symbols[name] = sympy.Symbol(name)
                out.append(self._symbols[name])
            return tuple(out)

    def get(self, name: str) -> sympy.Symbol:
        with self._lock:
            if name in self._symbols:
                return self._symbols[name]
            if self.strict:
                raise KeyError(f"unknown symbol {name!r} (strict registration)")
            sym = sympy.Symbol(name)
            self._symbols[name] = sym
            return sym

    def __contains__(self, name: str) -> bool:
        return name in self._symbols

    def names(self) -> List[str]:
        return sorted(self._symbols)


REGISTRY = SymbolRegistry(strict=config.STRICT_SYMBOLS)

x, y, t, u = REGISTRY.register("x", "y", "t", "u")
MAIN_SYMBOLS = (x, y, t, u)

PARAMETER_NAMES = (
    ["alpha", "beta", "gamma", "lam", "kappa", "omega", "a", "b", "c"]
    + [f"k{i}" for i in range(5)]
    + [f"{p}{i}" for p in ("s", "r", "a", "b") for i in range(4)]
)
REGISTRY.register(*PARAMETER_NAMES)

# Bound variable of every formal integral
NU = sympy.Symbol("_s")


def symbol(name: str) -> sympy.Symbol:
    return REGISTRY.get(name)


def symbols(*names: str) -> Tuple[sympy.Symbol, ...]:
    return tuple(REGISTRY.get(n) for n in names)


# =========================
# 3) SCALARS
# =========================
def to_scalar(value) -> sympy.Expr:
    """Coerce to an exact Gaussian rational; raises ValueError otherwise."""
    v = sympy.sympify(value, rational=True)
    if not v.is_number:
        raise ValueError(f"not a scalar: {value!r}")
    re_part, im_part = v.as_real_imag()
    re_part, im_part = sympy.nsimplify(re_part), sympy.nsimplify(im_part)
    if not (re_part.is_Rational and im_part.is_Rational):
        raise ValueError(f"not a Gaussian rational: {value!r}")
    return re_part + im_part * sympy.I


def is_scalar(value) -> bool:
    try:
        to_scalar(value)
        return True
    except (ValueError, TypeError, sympy.SympifyError):
        return False


# =========================
# 4) FORMAL INTEGRALS
# =========================
class FormalIntegral(sympy.Function):
    """
    Int(integrand, var, at): an antiderivative of integrand in var, evaluated
    at the expression `at`. The variable is always the bound symbol NU.
    Symbolically the constant of integration is left open.
    """

    nargs = 3

    @classmethod
    def eval(cls, integrand, var, at):
        if integrand.is_zero:
            return sympy.S.Zero
        return None

    def _eval_subs(self, old, new):
        integrand, var, at = self.args
        if old == var:
            # var is bound: only the evaluation point sees the substitution
            return self.func(integrand, var, at._subs(old, new))
        return None

    def _eval_derivative(self, s):
        integrand, var, at = self.args
        result = integrand.subs(var, at) * sympy.diff(at, s)
        if s != var:
            inner = sympy.diff(integrand, s)
            if inner != 0:
                result += self.func(inner, var, at)
        return result


def formal_integral(integrand, var, at=None) -> sympy.Expr:
    """Build Int(integrand, var) evaluated at `at` (default: var itself)."""
    integrand = sympy.sympify(integrand)
    at = var if at is None else sympy.sympify(at)
    if var != NU:
        integrand = integrand.subs(var, NU)
    return FormalIntegral(integrand, NU, at)


# =========================
# 5) PRINTING AND PARSING
# =========================
class _GrammarPrinter(StrPrinter):
    def _print_FormalIntegral(self, expr):
        integrand, var, at = expr.args
        if at.is_Symbol and at != var and at not in integrand.free_symbols:
            body = integrand.subs(var, at)
            return f"Int({self._print(body)}, {self._print(at)})"
        return f"Int({self._print(integrand)}, {self._print(var)}, {self._print(at)})"


_PRINTER = _GrammarPrinter({"order": "none"})


def to_text(expr) -> str:
    """Print in the toolkit grammar (powers with ^)."""
    return _PRINTER.doprint(sympy.sympify(expr)).replace("**", "^")


def ode_text(rhs) -> str:
    return f"y' = {to_text(rhs)}"


_TRANSFORMATIONS = standard_transformations + (convert_xor, rationalize)
_ALLOWED = re.compile(r"[0-9A-Za-z_+\-*/^().,\s]")
_ODE_PREFIX = re.compile(r"^\s*y\s*'\s*=")


def _int_builder(integrand, var, at=None):
    if not isinstance(var, sympy.Symbol):
        raise ParseError(f"Int(): second argument must be a symbol, got {var}")
    return formal_integral(integrand, var, at)


def _global_namespace() -> dict:
    return {
        "Integer": sympy.Integer,
        "Rational": sympy.Rational,
        "Float": sympy.Float,
        "Symbol": REGISTRY.get if not REGISTRY.strict else _strict_symbol,
        "exp": sympy.exp,
        "log": sympy.log,
        "atan": sympy.atan,
        "sqrt": sympy.sqrt,
        "Int": _int_builder,
        "I": sympy.I,
        "E": sympy.E,
        "pi": sympy.pi,
    }


def _strict_symbol(name: str) -> sympy.Symbol:
    if name == NU.name:
        return NU
    if name not in REGISTRY:
        raise ParseError(f"unknown symbol {name!r}")
    return REGISTRY.get(name)


def _prescan(text: str) -> None:
    depth = 0
    for pos, ch in enumerate(text):
        if not _ALLOWED.match(ch):
            raise ParseError(f"unexpected character {ch!r}", pos)
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ParseError("unbalanced ')'", pos)
    if depth != 0:
        raise ParseError("missing ')'", len(text))
    if not text.strip():
        raise ParseError("empty expression", 0)


def parse_expression(text: str) -> sympy.Expr:
    """Parse an expression of the toolkit grammar into a sympy tree."""
    _prescan(text)
    namespace = _global_namespace()
    local = {NU.name: NU}
    try:
        expr = parse_expr(text, local_dict=local, global_dict=namespace,
                          transformations=_TRANSFORMATIONS, evaluate=True)
    except ParseError:
        raise
    except SyntaxError as e:
        raise ParseError(f"syntax error: {e.msg}", (e.offset - 1) if e.offset else None)
    except (TypeError, NameError, KeyError, AttributeError, sympy.SympifyError) as e:
        raise ParseError(f"invalid expression: {e}")
    except Exception as e:
        raise ParseError(f"invalid expression: {e}")
    if not isinstance(expr, sympy.Basic):
        raise ParseError(f"expression expected, got {type(expr).__name__}")
    return expr


def split_ode_text(text: str) -> Optional[str]:
    """Return the right-hand side text of "y' = <expr>", or None."""
    m = _ODE_PREFIX.match(text)
    if not m:
        return None
    return text[m.end():]


# =========================
# 6) CANONICAL RATIONAL FUNCTIONS
# =========================
def ordered_gens(*exprs) -> List[sympy.Symbol]:
    """Main variables first, then everything else by name."""
    syms = set()
    for e in exprs:
        syms |= sympy.sympify(e).free_symbols
    main = [s for s in MAIN_SYMBOLS if s in syms]
    rest = sorted(syms - set(main), key=lambda s: s.name)
    return main + rest


def canonical_parts(expr) -> Tuple[sympy.Expr, sympy.Expr]:
    """
    Reduced numerator/denominator, both expanded, with the graded-lex leading
    coefficient of the denominator equal to 1. Input must be rational in its
    symbols.
    """
    expr = sympy.sympify(expr)
    if expr.has(sympy.zoo, sympy.nan):
        raise NormalizationError("division by zero")
    num, den = sympy.fraction(sympy.cancel(sympy.together(expr)))
    if den == 0 or sympy.expand(den) == 0:
        raise NormalizationError("denominator normalizes to zero")
    num = sympy.expand(num)
    if num == 0:
        return sympy.S.Zero, sympy.S.One
    gens = ordered_gens(num, den)
    if not gens:
        return sympy.expand(num / den), sympy.S.One
    den_poly = sympy.Poly(den, *gens)
    lc = den_poly.LC(order="grlex")
    return sympy.expand(num / lc), sympy.expand(den / lc)


@dataclass(frozen=True)
class RationalFunction:
    """Canonical quotient of polynomials over QQ(i)."""

    numer: sympy.Expr
    denom: sympy.Expr

    @classmethod
    def from_expr(cls, expr) -> "RationalFunction":
        expr = sympy.sympify(expr)
        if not expr.is_rational_function():
            expr = normalize(expr)
            if not expr.is_rational_function():
                raise UnsupportedExpressionError(f"not a rational function: {to_text(expr)[:200]}")
        return cls(*canonical_parts(expr))

    def as_expr(self) -> sympy.Expr:
        return self.numer / self.denom

    @property
    def is_zero(self) -> bool:
        return self.numer == 0

    @property
    def free_symbols(self):
        return self.numer.free_symbols | self.denom.free_symbols

    def degrees(self, var) -> Tuple[int, int]:
        """(degree of numerator, degree of denominator) in var; -1 for zero."""
        def deg(p):
            if p == 0:
                return -1
            if var not in p.free_symbols:
                return 0
            return sympy.Poly(p, var).degree()
        return deg(self.numer), deg(self.denom)

    def subs(self, bindings) -> "RationalFunction":
        return RationalFunction.from_expr(substitute(self.as_expr(), bindings))

    def __add__(self, other):
        return RationalFunction.from_expr(self.as_expr() + _as_expr(other))

    def __sub__(self, other):
        return RationalFunction.from_expr(self.as_expr() - _as_expr(other))

    def __mul__(self, other):
        return RationalFunction.from_expr(self.as_expr() * _as_expr(other))

    def __truediv__(self, other):
        other = _as_expr(other)
        if RationalFunction.from_expr(other).is_zero:
            raise NormalizationError("division by zero rational function")
        return RationalFunction.from_expr(self.as_expr() / other)

    def __neg__(self):
        return RationalFunction(-self.numer, self.denom)

    def __str__(self):
        return to_text(self.as_expr())


def _as_expr(value):
    return value.as_expr() if isinstance(value, RationalFunction) else sympy.sympify(value)


# =========================
# 7) TOWER NORMALIZATION
# =========================
@dataclass
class TowerEntry:
    symbol: sympy.Symbol
    kind: str                  # exp | log | atan | integral | root | const
    definition: sympy.Expr     # the atom written without tower symbols
    base: sympy.Expr = None    # lifted argument (root: lifted radicand)
    degree: int = 1            # root entries: symbol**degree == base


class Tower:
    """
    Ordered adjunction of transcendental and radical indeterminates.
    Distinct entries are treated as algebraically independent apart from the
    root relations symbol**degree == base.
    """

    def __init__(self):
        self.entries: List[TowerEntry] = []
        self._keys: Dict[tuple, TowerEntry] = {}
        self._exp_gens: List[TowerEntry] = []
        self._integrals: List[Tuple[sympy.Expr, sympy.Expr, TowerEntry]] = []
        self._replaced: Dict[sympy.Symbol, sympy.Expr] = {}

    # ----- entry bookkeeping -----
    def _new_symbol(self) -> sympy.Symbol:
        return sympy.Symbol(f"_th{len(self.entries) + len(self._replaced)}")

    def _add(self, kind, definition, base=None, degree=1, key=None) -> TowerEntry:
        entry = TowerEntry(self._new_symbol(), kind, definition, base, degree)
        self.entries.append(entry)
        if key is not None:
            self._keys[key] = entry
        return entry

    @property
    def symbols(self):
        return {e.symbol for e in self.entries}

    def roots(self) -> List[TowerEntry]:
        return [e for e in self.entries if e.kind == "root"]

    def lower(self, expr) -> sympy.Expr:
        expr = self.resolve(expr)
        return sympy.sympify(expr).xreplace({e.symbol: e.definition for e in self.entries})

    def resolve(self, expr) -> sympy.Expr:
        expr = sympy.sympify(expr)
        while self._replaced and expr.free_symbols & set(self._replaced):
            expr = expr.xreplace(self._replaced)
        return expr

    # ----- lifting -----
    def lift(self, expr) -> sympy.Expr:
        e = sympy.sympify(expr)
        if e.is_Atom:
            if e is sympy.E:
                return self._exp(sympy.S.One)
            if isinstance(e, sympy.NumberSymbol):
                return self._const(e)
            return e
        if isinstance(e, FormalIntegral):
            return self._integral(e)
        if isinstance(e, sympy.exp):
            return self._exp(self.lift(e.args[0]))
        if isinstance(e, sympy.log):
            return self._log(self.lift(e.args[0]))
        if isinstance(e, sympy.atan):
            return self._atan(self.lift(e.args[0]))
        if e.is_Pow:
            base, ex = e.args
            if ex.is_Integer:
                return self.lift(base) ** ex
            if ex.is_Rational:
                return self._root(self.lift(base), ex)
            return self._exp(self.lift(ex) * self._log(self.lift(base)))
        if e.is_Add or e.is_Mul:
            return e.func(*[self.lift(a) for a in e.args])
        raise UnsupportedExpressionError(f"cannot normalize {type(e).__name__}: {to_text(e)[:200]}")

    def _canon(self, expr) -> sympy.Expr:
        num, den = canonical_parts(self.resolve(expr))
        return num / den

    def _const(self, value) -> sympy.Expr:
        key = ("const", value)
        if key not in self._keys:
            self._add("const", value, key=key)
        return self._keys[key].symbol

    def _exp(self, arg) -> sympy.Expr:
        arg = self._canon(arg)
        if arg == 0:
            return sympy.S.One
        for entry in self._exp_gens:
            ratio = sympy.cancel(arg / entry.base)
            if ratio.is_Rational:
                if ratio.is_Integer:
                    return entry.symbol ** ratio
                return self._root(entry.symbol, ratio)
            if not arg.is_number:
                delta = sympy.cancel(arg - entry.base)
                if delta.is_number:
                    return entry.symbol * self._exp(delta)
        entry = self._add("exp", sympy.exp(self.lower(arg)), base=arg)
        self._exp_gens.append(entry)
        return entry.symbol

    def _log(self, arg) -> sympy.Expr:
        arg = self._canon(arg)
        if arg == 1:
            return sympy.S.Zero
        if arg == 0:
            raise NormalizationError("log(0)")
        if not arg.is_number and not (arg.free_symbols & self.symbols):
            coeff, factors = sympy.factor_list(arg, gaussian=arg.has(sympy.I))
            result = self._log_atom(coeff) if coeff != 1 else sympy.S.Zero
            for fac, mult in factors:
                result += mult * self._log_atom(sympy.expand(fac))
            return result
        return self._log_atom(arg)

    def _log_atom(self, arg) -> sympy.Expr:
        if arg == 1:
            return sympy.S.Zero
        key = ("log", arg)
        if key not in self._keys:
            self._add("log", sympy.log(self.lower(arg)), base=arg, key=key)
        return self._keys[key].symbol

    def _atan(self, arg) -> sympy.Expr:
        arg = self._canon(arg)
        if arg == 0:
            return sympy.S.Zero
        if arg.could_extract_minus_sign():
            return -self._atan(-arg)
        key = ("atan", arg)
        if key not in self._keys:
            self._add("atan", sympy.atan(self.lower(arg)), base=arg, key=key)
        return self._keys[key].symbol

    def _integral(self, node) -> sympy.Expr:
        integrand, var, at = node.args
        if var != NU:
            integrand = integrand.subs(var, NU)
        body = self._canon(self.lift(integrand))
        if body == 0:
            return sympy.S.Zero
        point = self._canon(self.lift(at))
        for kbody, kpoint, entry in self._integrals:
            if kpoint == point:
                ratio = sympy.cancel(body / kbody)
                if ratio.is_number:
                    return ratio * entry.symbol
        definition = FormalIntegral(self.lower(body), NU, self.lower(point))
        entry = self._add("integral", definition, base=body)
        self._integrals.append((body, point, entry))
        return entry.symbol

    def _root(self, base, q) -> sympy.Expr:
        num, den = canonical_parts(self.resolve(base))
        if num == 0:
            if q < 0:
                raise NormalizationError("negative power of zero")
            return sympy.S.Zero
        base = num / den
        if base.is_number:
            value = sympy.Pow(base, q)
            if is_scalar(value):
                return to_scalar(value)
        else:
            gens = ordered_gens(num)
            lead = sympy.Poly(num, *gens).LC(order="grlex")
            if lead != 1:
                return self._root(lead, q) * self._root(base / lead, q)
        key = ("root", num, den)
        entry = self._keys.get(key)
        if entry is None:
            entry = self._add("root", sympy.Pow(self.lower(base), sympy.Rational(1, q.q)),
                              base=base, degree=q.q, key=key)
        elif entry.degree % q.q != 0:
            lcm = entry.degree * q.q // math.gcd(entry.degree, q.q)
            fresh = self._new_symbol()
            self._replaced[entry.symbol] = fresh ** (lcm // entry.degree)
            entry.symbol = fresh
            entry.degree = lcm
            entry.definition = sympy.Pow(self.lower(base), sympy.Rational(1, lcm))
        return entry.symbol ** int(q * entry.degree)

    # ----- reduction modulo root relations -----
    def reduce_polynomial(self, poly_expr) -> Tuple[sympy.Expr, sympy.Expr]:
        """
        Reduce a polynomial in the tower symbols modulo the root relations.
        Returns (reduced, factor) with poly_expr == reduced / factor.
        """
        expr = sympy.expand(self.resolve(poly_expr))
        factor = sympy.S.One
        for entry in reversed(self.roots()):
            theta, m = entry.symbol, entry.degree
            if theta not in expr.free_symbols:
                continue
            poly = sympy.Poly(expr, theta)
            if poly.degree() < m:
                continue
            terms = poly.as_dict(native=False)
            reduced = sum(coeff * entry.base ** (k[0] // m) * theta ** (k[0] % m)
                          for k, coeff in terms.items())
            num, den = sympy.fraction(sympy.together(reduced))
            expr = sympy.expand(num)
            factor = factor * den
        return expr, factor

    def reduce_fraction(self, lifted) -> Tuple[sympy.Expr, sympy.Expr]:
        num, den = sympy.fraction(sympy.together(self.resolve(lifted)))
        num, fn = self.reduce_polynomial(num)
        den, fd = self.reduce_polynomial(den)
        num, den = sympy.expand(num * fd), sympy.expand(den * fn)
        for entry in reversed(self.roots()):
            if entry.degree != 2 or entry.symbol not in den.free_symbols:
                continue
            poly = sympy.Poly(den, entry.symbol)
            a = poly.coeff_monomial(1)
            b = poly.coeff_monomial(entry.symbol)
            conj = a - b * entry.symbol
            num, fn = self.reduce_polynomial(num * conj)
            den, fd = self.reduce_polynomial(den * conj)
            num, den = sympy.expand(num * fd), sympy.expand(den * fn)
        return num, den


def normalize(expr) -> sympy.Expr:
    """
    Canonical form: a reduced quotient in the main variables, parameters and
    tower atoms. normalize(e - e) is 0.
    """
    t0 = time.perf_counter()
    expr = sympy.sympify(expr)
    if expr.is_rational_function() and not expr.has(FormalIntegral):
        num, den = canonical_parts(expr)
        return num / den
    tower = Tower()
    lifted = tower.lift(expr)
    num, den = tower.reduce_fraction(lifted)
    num, den = canonical_parts(num / den)
    if tower.roots():
        num, fn = tower.reduce_polynomial(num)
        den, fd = tower.reduce_polynomial(den)
        num, den = canonical_parts((num * fd) / (den * fn))
    result = tower.lower(num) / tower.lower(den)
    logger.debug("normalize: %d tower entries, %.3fs", len(tower.entries), time.perf_counter() - t0)
    return result


def is_zero(expr, mode: str = "exact", points: Optional[int] = None,
            digits: Optional[int] = None, seed: Optional[int] = None) -> bool:
    """
    exact: zero iff the tower-normalized numerator vanishes (sound under
    algebraic independence of the tower entries).
    sampled: probabilistic; N random rational points at P digits.
    """
    if mode == "exact":
        return _exact_zero(expr)
    if mode == "sampled":
        return sampled_zero(expr, points=points, digits=digits, seed=seed)
    raise ValueError(f"unknown zero-test mode {mode!r}")


def _exact_zero(expr) -> bool:
    expr = sympy.sympify(expr)
    if expr == 0:
        return True
    tower = Tower()
    lifted = tower.resolve(tower.lift(expr))
    num, _ = sympy.fraction(sympy.together(lifted))
    num = sympy.expand(num)
    if num == 0:
        return True
    if not tower.roots():
        return False
    reduced, _ = tower.reduce_polynomial(num)
    return sympy.expand(reduced) == 0


# =========================
# 8) EVALUATION (mpmath)
# =========================
_BASEPOINT_CANDIDATES = (0, 1, -1, 2, -2, 3, -3, 5, -5, 10, -10)


def integrand_poles(integrand, var=NU) -> List[complex]:
    """Roots in var of the denominator factors that depend on var alone."""
    _, den = sympy.fraction(sympy.together(sympy.sympify(integrand)))
    poles: List[complex] = []
    for factor in sympy.Mul.make_args(den):
        base, _ = factor.as_base_exp()
        if base.free_symbols == {var} and base.is_polynomial(var):
            poles += [complex(r) for r in sympy.Poly(base, var).nroots()]
    return poles


def choose_basepoint(integrand, var=NU) -> int:
    """First of 0, 1, -1, 2, ... at distance >= 1/2 from every pole of the integrand."""
    poles = integrand_poles(integrand, var)
    for c in _BASEPOINT_CANDIDATES:
        if all(abs(c - p) >= 0.5 for p in poles):
            return c
    return int(max(abs(p) for p in poles)) + 1


def evaluate(expr, env: Dict[sympy.Symbol, object], basepoints: Optional[dict] = None):
    """
    Evaluate at the current mpmath precision. Formal integrals are computed by
    quadrature from a basepoint chosen by choose_basepoint unless `basepoints`
    already holds one for the (integrand, var) key.
    """
    basepoints = {} if basepoints is None else basepoints
    return _eval(sympy.sympify(expr), env, basepoints)


def _eval(e, env, basepoints):
    if e.is_Integer:
        return mpmath.mpf(int(e))
    if e.is_Rational:
        return mpmath.mpf(int(e.p)) / int(e.q)
    if e.is_Float:
        return mpmath.mpf(str(e))
    if e is sympy.I:
        return mpmath.mpc(0, 1)
    if e is sympy.E:
        return mpmath.e
    if e is sympy.pi:
        return mpmath.pi
    if e.is_Symbol:
        if e not in env:
            raise UnsupportedExpressionError(f"no numeric value for symbol {e}")
        return env[e]
    if e.is_Add:
        return mpmath.fsum(_eval(a, env, basepoints) for a in e.args)
    if e.is_Mul:
        out = mpmath.mpf(1)
        for a in e.args:
            out *= _eval(a, env, basepoints)
        return out
    if e.is_Pow:
        base = _eval(e.args[0], env, basepoints)
        ex = e.args[1]
        if ex.is_Integer:
            if base == 0 and ex < 0:
                raise ZeroDivisionError("pole")
            return base ** int(ex)
        return mpmath.power(base, _eval(ex, env, basepoints))
    if isinstance(e, sympy.exp):
        return mpmath.exp(_eval(e.args[0], env, basepoints))
    if isinstance(e, sympy.log):
        arg = _eval(e.args[0], env, basepoints)
        if arg == 0:
            raise ZeroDivisionError("log pole")
        return mpmath.log(arg)
    if isinstance(e, sympy.atan):
        return mpmath.atan(_eval(e.args[0], env, basepoints))
    if isinstance(e, FormalIntegral):
        integrand, var, at = e.args
        point = _eval(at, env, basepoints)
        key = (integrand, var)
        if key not in basepoints:
            basepoints[key] = mpmath.mpf(choose_basepoint(integrand, var))
        base = basepoints[key]
        if base == point:
            return mpmath.mpf(0)
        if not isinstance(point, mpmath.mpc):
            lo, hi = sorted((base, point))
            if any(abs(p.imag) < 1e-12 and lo <= p.real <= hi for p in integrand_poles(integrand, var)):
                raise ZeroDivisionError("formal integral path crosses a pole")
        inner_env = dict(env)

        def f(s):
            inner_env[var] = s
            return _eval(integrand, inner_env, basepoints)

        return mpmath.quad(f, [base, point])
    raise UnsupportedExpressionError(f"cannot evaluate {type(e).__name__}")


def _random_point(rng: random.Random, syms: Iterable[sympy.Symbol]) -> Dict[sympy.Symbol, object]:
    point = {}
    for s in syms:
        num = rng.randint(1, 60) * rng.choice((-1, 1))
        den = rng.randint(1, 13)
        point[s] = mpmath.mpf(num) / den
    return point


def sampled_zero(expr, points: Optional[int] = None, digits: Optional[int] = None,
                 seed: Optional[int] = None) -> bool:
    points = points or config.SAMPLE_POINTS
    digits = digits or config.SAMPLE_DIGITS
    rng = random.Random(config.SEED if seed is None else seed)
    expr = sympy.sympify(expr)
    syms = sorted(expr.free_symbols - {NU}, key=lambda s: s.name)
    threshold = mpmath.mpf(10) ** (-(digits // 2))
    basepoints: dict = {}
    hits, attempts = 0, 0
    with mpmath.workdps(digits):
        while hits < points and attempts < 8 * points:
            attempts += 1
            env = _random_point(rng, syms)
            try:
                value = evaluate(expr, env, basepoints)
            except (ZeroDivisionError, ValueError):
                continue
            if not mpmath.isfinite(value):
                continue
            hits += 1
            if abs(value) >= threshold:
                logger.debug("sampled_zero: |value| = %s at %s", mpmath.nstr(abs(value), 5), env)
                return False
    if hits < points:
        raise NormalizationError("evaluation hit a pole at every sample point")
    logger.debug("sampled_zero: zero at %d points (probabilistic)", hits)
    return True


# =========================
# 9) CALCULUS AND SUBSTITUTION
# =========================
def differentiate(expr, var) -> sympy.Expr:
    if isinstance(var, str):
        var = symbol(var)
    if not isinstance(var, sympy.Symbol):
        raise ValueError(f"can only differentiate with respect to a symbol, got {var}")
    return sympy.diff(sympy.sympify(expr), var)


def substitute(expr, bindings: Dict, normalize_result: bool = True) -> sympy.Expr:
    """Simultaneous substitution followed by normalize."""
    bindings = {(symbol(k) if isinstance(k, str) else k): sympy.sympify(v)
                for k, v in bindings.items()}
    result = sympy.sympify(expr).subs(bindings, simultaneous=True)
    if result.has(sympy.zoo, sympy.nan):
        raise NormalizationError("substitution produced a zero denominator")
    return normalize(result) if normalize_result else result


def same_value(a, b) -> bool:
    """Exact equality through normalization."""
    return is_zero(sympy.sympify(a) - sympy.sympify(b))
