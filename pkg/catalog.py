"""
INTEGRABLE-CLASS CATALOG
========================

Registry of the known integrable Abel classes (data/catalog.json) with their
derivations from the AIL / AIR / AIA families. Every derivation is replayed
with exact arithmetic and compared to the printed representative.

Entry fields:
- representative: rhs in x, y (symbolic parameters allowed)
- source: {"family": tag, "params": {...}} or {"entry": id, "params": {...}}
- chain: transform JSON, applied left to right
- intermediate: optional checkpoint {"after_step": n, "rhs": "..."}
- reparameterize: parameter rewrites applied to the representative (alpha = kappa^2)
- seed: AIL8 instance + chain to the source equation, for first integrals
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Tuple, Union

import sympy

import config
from expr_core import (
    FamilyError,
    VerificationError,
    differentiate,
    is_zero,
    normalize,
    parse_expression,
    symbol,
    to_text,
    x,
    y,
)
from ode_model import FamilyParams, RationalODE, as_ode, construct_family, parse_family, shape_classify
from solver import FirstIntegral, check_first_integral, solve_ail
from transform import ChangeOfVariables, apply, composition, invert_xy, pull_back, transform_from_json

logger = logging.getLogger(__name__)

COLUMNS = ("AIL", "AIR", "AIA")


# =========================
# 1) ENTRIES
# =========================
@dataclass(frozen=True)
class CatalogEntry:
    id: str
    title: str
    column: str
    representative: RationalODE
    params: Tuple[str, ...]
    source: Dict
    chain: Optional[ChangeOfVariables]
    intermediate: Optional[Dict] = None
    reparameterize: Dict[str, sympy.Expr] = field(default_factory=dict)
    inverse_reparameterize: Dict[str, sympy.Expr] = field(default_factory=dict)
    seed: Optional[Dict] = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "title": self.title,
            "column": self.column,
            "representative": self.representative.text(),
            "params": list(self.params),
            "chain": self.chain.to_json() if self.chain is not None else [],
            "has_seed": self.seed is not None,
        }


def _exprs(mapping: Optional[Dict]) -> Dict[str, sympy.Expr]:
    return {k: parse_expression(v) for k, v in (mapping or {}).items()}


def _representative(raw: Dict) -> RationalODE:
    rhs = parse_expression(raw["representative"])
    derivs = {symbol(name): differentiate(parse_expression(text), x)
              for name, text in (raw.get("derivatives") or {}).items()}
    if derivs:
        rhs = rhs.subs(derivs, simultaneous=True)
    return RationalODE.from_rhs(rhs)


def _chain(raw_chain) -> Optional[ChangeOfVariables]:
    if not raw_chain:
        return None
    return composition([transform_from_json(step) for step in raw_chain])


def _entry(raw: Dict) -> CatalogEntry:
    if raw["column"] not in COLUMNS:
        raise ValueError(f"entry {raw['id']}: unknown column {raw['column']!r}")
    return CatalogEntry(
        id=str(raw["id"]),
        title=raw.get("title", ""),
        column=raw["column"],
        representative=_representative(raw),
        params=tuple(raw.get("params", [])),
        source=raw["source"],
        chain=_chain(raw.get("chain")),
        intermediate=raw.get("intermediate"),
        reparameterize=_exprs(raw.get("reparameterize")),
        inverse_reparameterize=_exprs(raw.get("inverse_reparameterize")),
        seed=raw.get("seed"),
    )


@lru_cache(maxsize=4)
def _load(path: str) -> Tuple[CatalogEntry, ...]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    entries = tuple(sorted((_entry(item) for item in raw), key=lambda e: e.id))
    logger.info("loaded %d catalog entries from %s", len(entries), path)
    return entries


def list_catalog(path: Optional[str] = None) -> List[CatalogEntry]:
    return list(_load(path or config.CATALOG_PATH))


def get_entry(entry_id: str, path: Optional[str] = None) -> CatalogEntry:
    for entry in list_catalog(path):
        if entry.id == str(entry_id):
            return entry
    raise KeyError(f"no catalog entry {entry_id!r}")


# =========================
# 2) DERIVATION REPLAY
# =========================
def _bind(expr, values: Dict[str, sympy.Expr]) -> sympy.Expr:
    if not values:
        return expr
    return sympy.sympify(expr).subs({symbol(k): v for k, v in values.items()}, simultaneous=True)


def source_equation(entry: CatalogEntry, path: Optional[str] = None) -> RationalODE:
    src = entry.source
    if "family" in src:
        return construct_family(FamilyParams(parse_family(src["family"]), src.get("params", {})))
    parent = get_entry(src["entry"], path)
    values = _exprs(src.get("params"))
    return RationalODE.from_rhs(_bind(parent.representative.rhs, values))


def target_equation(entry: CatalogEntry) -> RationalODE:
    """Representative with the entry's reparameterization applied."""
    if not entry.reparameterize:
        return entry.representative
    return RationalODE.from_rhs(_bind(entry.representative.rhs, entry.reparameterize))


def chain_steps(chain: Optional[ChangeOfVariables]) -> List[ChangeOfVariables]:
    if chain is None:
        return []
    return list(chain.steps) if chain.steps else [chain]


@dataclass(frozen=True)
class FitReport:
    id: str
    identity: bool
    steps: Tuple[str, ...]
    column: str
    residual: Optional[str] = None
    intermediate: Optional[bool] = None

    def to_json(self) -> dict:
        return {"id": self.id, "identity": self.identity, "column": self.column,
                "steps": list(self.steps), "residual": self.residual,
                "intermediate": self.intermediate}


def verify_fit(entry_id: str, path: Optional[str] = None) -> FitReport:
    entry = get_entry(entry_id, path)
    e = source_equation(entry, path)
    steps = [f"source: {e.text()}"]
    checkpoint = None
    for n, T in enumerate(chain_steps(entry.chain), start=1):
        e = apply(T, e)
        steps.append(f"{T.describe()}: {e.text()}")
        if entry.intermediate and entry.intermediate.get("after_step") == n:
            expected = parse_expression(entry.intermediate["rhs"])
            checkpoint = is_zero(e.rhs - expected)
    diff = normalize(e.rhs - target_equation(entry).rhs)
    identity = is_zero(diff)
    if identity and checkpoint is False:
        identity = False
    report = FitReport(entry.id, identity, tuple(steps), entry.column,
                       None if identity else to_text(diff)[:400], checkpoint)
    log = logger.info if identity else logger.warning
    log("fit %s: identity=%s", entry.id, identity)
    return report


def _fit_safe(entry_id: str, path: Optional[str] = None) -> FitReport:
    try:
        return verify_fit(entry_id, path)
    except Exception as err:
        logger.error("fit %s: replay failed: %s", entry_id, err)
        return FitReport(entry_id, False, (), "", f"replay failed: {err}")


def verify_all(workers: Optional[int] = None, path: Optional[str] = None) -> List[FitReport]:
    """All entries, sorted by id; fans out over processes when workers > 1."""
    ids = [entry.id for entry in list_catalog(path)]
    workers = workers or config.WORKERS
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_fit_safe, ids, [path] * len(ids)))
    else:
        reports = [_fit_safe(i, path) for i in ids]
    return sorted(reports, key=lambda r: r.id)


# =========================
# 3) FIRST INTEGRALS
# =========================
def _source_first_integral(entry: CatalogEntry, path: Optional[str]) -> Optional[sympy.Expr]:
    if entry.seed is not None:
        seed = entry.seed
        solution = solve_ail(FamilyParams(parse_family(seed["family"]), seed["params"]), verify=False)
        chain = _chain(seed.get("chain"))
        return pull_back(chain, solution.psi) if chain is not None else solution.psi
    src = entry.source
    if "entry" not in src:
        return None
    parent = get_entry(src["entry"], path)
    psi = _entry_psi(parent, path)
    if psi is None:
        return None
    # parent parameters -> the values this entry fixes
    values = _exprs(src.get("params"))
    psi = _bind(psi, parent.inverse_reparameterize)
    return _bind(psi, values)


def _entry_psi(entry: CatalogEntry, path: Optional[str]) -> Optional[sympy.Expr]:
    psi = _source_first_integral(entry, path)
    if psi is None or entry.chain is None:
        return psi
    return pull_back(entry.chain, psi)


def entry_first_integral(entry_id: str, path: Optional[str] = None) -> FirstIntegral:
    """Solver first integral transported to the entry's representative, verified."""
    entry = get_entry(entry_id, path)
    psi = _entry_psi(entry, path)
    if psi is None:
        raise FamilyError(f"catalog entry {entry_id} has no quadrature seed")
    target = target_equation(entry)
    ok, how = check_first_integral(target, psi)
    if not ok:
        raise VerificationError(f"transported first integral of {entry_id} does not verify")
    provenance = {"entry": entry.id, "chain": entry.chain.to_json() if entry.chain else []}
    return FirstIntegral(psi, target, "transported", True, how, provenance)


# =========================
# 4) NEW CLASSES BY x <-> y
# =========================
@dataclass(frozen=True)
class InverseClass:
    equation: RationalODE
    first_integral: FirstIntegral
    is_abel: bool
    known_entry: Optional[str]

    def to_json(self) -> dict:
        return {"equation": self.equation.text(), "first_integral": self.first_integral.to_json(),
                "is_abel": self.is_abel, "known_entry": self.known_entry}


def _match_entry(e: RationalODE, path: Optional[str]) -> Optional[str]:
    for entry in list_catalog(path):
        rep = entry.representative
        if (rep.rhs.free_symbols - {x, y}) != (e.rhs.free_symbols - {x, y}):
            continue
        if is_zero(rep.rhs - e.rhs):
            return entry.id
    return None


def generate_inverse_class(source: Union[str, Tuple[RationalODE, object]],
                           path: Optional[str] = None) -> InverseClass:
    """x <-> y on a solvable AIA-form equation; the first integral becomes Psi(y, x)."""
    if isinstance(source, str):
        fi = entry_first_integral(source, path)
        e, psi = fi.equation, fi.psi
    else:
        e, fi = source
        e = as_ode(e)
        psi = fi.psi if isinstance(fi, FirstIntegral) else sympy.sympify(fi)
        ok, _ = check_first_integral(e, psi)
        if not ok:
            raise VerificationError("input first integral does not verify")
    if "AIA-form" not in shape_classify(e).tags:
        raise FamilyError(f"not of AIA form, x <-> y need not give an Abel equation: {e.text()[:200]}")
    image = invert_xy(e)
    new_psi = psi.subs({x: y, y: x}, simultaneous=True)
    ok, how = check_first_integral(image, new_psi)
    if not ok:
        raise VerificationError("swapped first integral does not verify")
    tags = shape_classify(image).tags
    is_abel = "abel-first-kind" in tags or "abel-second-kind" in tags
    known = _match_entry(image, path)
    logger.info("generate_inverse_class: abel=%s known=%s", is_abel, known)
    return InverseClass(image, FirstIntegral(new_psi, image, "transported", True, how), is_abel, known)
