"""Coincidence limits of bitensors.

A BracketTable maps (symbol, point pattern of its derivative slots) to the
coincidence limit written with template index names ``_t0, _t1, ...`` (own
indices first, then derivative slots, all down and at x).  Missing all-x
entries are derived by differentiating the symbol's defining identity and
solving the single linear relation for the unknown bracket; entries with
derivatives at y are reduced to x-derivatives with Synge's rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable

from pointsplit.curvature import (
    contract_metric, derivative_chain, differentiate, metric, swap_derivatives,
)
from pointsplit.expr import Expr, Factor, Index, Term, canonicalize, rename_term
from pointsplit.parse import parse
from pointsplit.printing import expr_from_data, expr_to_data
from pointsplit.registry import BITENSOR, LIMIT, REGISTRY

SEEDED = "seeded"
DERIVED = "derived"
SYNGE = "synge"
ASSERTED = "asserted"

TABLE_FORMAT = "pointsplit-brackets"
TABLE_VERSION = 1


class BracketError(RuntimeError):
    pass


def tname(k: int) -> str:
    return f"_t{k}"


@dataclass(frozen=True)
class Entry:
    symbol: str
    pattern: tuple[str, ...]
    value: Expr
    provenance: str


@dataclass
class Identity:
    """Defining identity of a bitensor: ``builder()`` returns an Expr that
    vanishes identically, written with template own indices."""

    symbol: str
    builder: Callable[[], Expr]
    text: str = ""


def _own_points(symbol: str) -> tuple[str, ...]:
    d = REGISTRY.get(symbol)
    return d.slots if d.rank else ()


def template_factor(symbol: str, pattern: tuple[str, ...]) -> Factor:
    own = _own_points(symbol)
    ixs = tuple(Index(tname(k), False, p) for k, p in enumerate(own))
    ds = tuple(Index(tname(len(own) + k), False, p) for k, p in enumerate(pattern))
    return Factor(symbol, ixs, ds, "")


def _normalize(f: Factor) -> Factor:
    xs = tuple(d for d in f.derivs if d.point == "x")
    ys = tuple(d for d in f.derivs if d.point == "y")
    return replace(f, derivs=xs + ys)


def _at_x(ix: Index) -> Index:
    return Index(ix.name, ix.up, "x")


def _local_at_x(f: Factor) -> Factor:
    return Factor(f.symbol, tuple(_at_x(i) for i in f.indices),
                  tuple(_at_x(i) for i in f.derivs), "x")


def lim_factor(f: Factor) -> Factor:
    """Opaque bracket of a bitensor factor with only x-derivatives."""
    return Factor("lim_" + f.symbol, tuple(_at_x(i) for i in f.indices + f.derivs), (), "x")


def instantiate(value: Expr, targets: tuple[Index, ...]) -> Expr:
    """Substitute template names _t0.. by the given indices (moved to x)."""
    # move internal dummies out of the way first
    used = {t.name for t in targets}
    out: list[Expr] = []
    for t, c in value.items():
        dummies = sorted(t.dummy_names())
        ren = {d: f"_w{j}" for j, d in enumerate(dummies)}
        clash = set(ren.values()) & used
        if clash:
            ren = {d: f"_w{j}_{len(used)}" for j, d in enumerate(dummies)}
        out.append(Expr.from_term(rename_term(t, ren), c))
    e = Expr.sum(out)
    raise_pairs = []
    mapping = {}
    for k, ix in enumerate(targets):
        if ix.up:
            tmp = f"_u{k}"
            mapping[tname(k)] = tmp
            raise_pairs.append((ix.name, tmp))
        else:
            mapping[tname(k)] = ix.name
    e = Expr.sum(Expr.from_term(rename_term(t, mapping), c) for t, c in e.items())
    for name, tmp in raise_pairs:
        e = e * metric(Index(name, True), Index(tmp, True))
    return contract_metric(e) if raise_pairs else e


class BracketTable:
    """Append-only coincidence-limit knowledge base."""

    def __init__(self) -> None:
        self.entries: dict[tuple[str, tuple[str, ...]], Entry] = {}
        self.identities: dict[str, Identity] = {}
        self.opaque: set[str] = set()
        self.log: list[str] = []

    # ------------------------------------------------------------ setup
    def seed(self, symbol: str, value: str | Expr, nder: int | tuple[str, ...],
             provenance: str = SEEDED) -> None:
        pattern = ("x",) * nder if isinstance(nder, int) else tuple(nder)
        if isinstance(value, str):
            value = parse(value)
        key = (symbol, pattern)
        if key in self.entries:
            raise BracketError(f"bracket {key} already present")
        self.entries[key] = Entry(symbol, pattern, contract_metric(value), provenance)

    def register(self, symbol: str, text: str) -> None:
        self.identities[symbol] = Identity(symbol, lambda: parse(text), text)

    def register_expr(self, symbol: str, builder: Callable[[], Expr], text: str = "") -> None:
        self.identities[symbol] = Identity(symbol, builder, text)

    def declare_opaque(self, *symbols: str) -> None:
        self.opaque.update(symbols)

    def has(self, symbol: str, nder: int) -> bool:
        return (symbol, ("x",) * nder) in self.entries

    def get(self, symbol: str, nder: int) -> Expr:
        return self.template_bracket(symbol, ("x",) * nder)

    # ------------------------------------------------------------ brackets
    def template_bracket(self, symbol: str, pattern: tuple[str, ...]) -> Expr:
        key = (symbol, pattern)
        hit = self.entries.get(key)
        if hit is not None:
            return hit.value
        tf = template_factor(symbol, pattern)
        if "y" in pattern:
            value = self._synge(tf)
            self.entries[key] = Entry(symbol, pattern, value, SYNGE)
            return value
        if symbol in self.opaque:
            return Expr.of(lim_factor(tf))
        value = self._derive(symbol, len(pattern))
        self.entries[key] = Entry(symbol, pattern, value, DERIVED)
        self.log.append(f"derived [{symbol}] with {len(pattern)} derivatives")
        return value

    def bracket_of_factor(self, f: Factor) -> Expr:
        f = _normalize(f)
        pattern = tuple(d.point for d in f.derivs)
        value = self.template_bracket(f.symbol, pattern)
        return instantiate(value, f.indices + f.derivs)

    def _synge(self, f: Factor) -> Expr:
        """[T_;A b'] = [T_;A]_;b - [T_;bA] for the outermost y-derivative."""
        xs = tuple(d for d in f.derivs if d.point == "x")
        ys = tuple(d for d in f.derivs if d.point == "y")
        y0, rest_y = ys[0], ys[1:]
        inner = replace(f, derivs=xs + rest_y)
        moved = replace(f, derivs=(_at_x(y0),) + xs + rest_y)
        first = differentiate(self.bracket_of_factor(inner), _at_x(y0))
        return contract_metric(first - self.bracket_of_factor(moved))

    # ------------------------------------------------------------ limits of expressions
    def limit(self, e: Expr, unknown: tuple[str, int] | None = None) -> Expr:
        """Coincidence limit of a bitensor expression (a local Expr at x)."""
        acc = [self._limit_term(t, unknown) * c for t, c in e.items()]
        return contract_metric(Expr.sum(acc))

    def _order(self, f: Factor) -> tuple[int, int]:
        # brackets already in the table go first, so a known zero factor stops the
        # term before any (possibly recursive) derivation is triggered
        known = 1
        if REGISTRY.get(f.symbol).kind != BITENSOR:
            known = 0
        else:
            nf = _normalize(f)
            if (nf.symbol, tuple(d.point for d in nf.derivs)) in self.entries:
                known = 0
        return (known, len(f.derivs) + len(f.indices))

    def _factor_limit(self, f: Factor, unknown) -> Expr:
        decl = REGISTRY.get(f.symbol)
        if decl.kind != BITENSOR:
            if decl.kind == LIMIT:
                return Expr.of(f)
            return Expr.of(_local_at_x(f) if f.at == "y" else f)
        if unknown is not None:
            nf = _normalize(f)
            if nf.symbol == unknown[0] and len(nf.derivs) == unknown[1] and \
                    all(d.point == "x" for d in nf.derivs):
                return Expr.of(lim_factor(nf))
        return self.bracket_of_factor(f)

    def _limit_term(self, t: Term, unknown) -> Expr:
        scal = Expr.from_term(Term(t.scalars, (), None, False))
        # cheap factors first so that vanishing brackets short-circuit
        order = sorted(range(len(t.factors)), key=lambda k: self._order(t.factors[k]))
        pieces: dict[int, Expr] = {}
        for k in order:
            p = self._factor_limit(t.factors[k], unknown)
            if p.is_zero():
                return Expr.zero()
            pieces[k] = p
        wpieces = []
        if t.word is not None:
            wo = sorted(range(len(t.word)), key=lambda k: self._order(t.word[k]))
            got: dict[int, Expr] = {}
            for k in wo:
                p = self._factor_limit(t.word[k], unknown)
                if p.is_zero():
                    return Expr.zero()
                got[k] = p
            wpieces = [got[k] for k in range(len(t.word))]
        prod = scal
        for k in range(len(t.factors)):
            prod = prod * pieces[k]
        if t.word is not None:
            w = Expr.identity()
            for p in wpieces:
                w = w * p
            if t.traced:
                w = w.traced()
            prod = prod * w
        return prod

    # ------------------------------------------------------------ extension
    def _derive(self, symbol: str, n: int) -> Expr:
        ident = self.identities.get(symbol)
        if ident is None:
            raise BracketError(f"no defining identity for {symbol}; cannot derive order {n}")
        own = len(_own_points(symbol))
        ds = [Index(tname(own + k), False, "x") for k in range(n)]
        e = derivative_chain(ident.builder(), ds)
        rel = self.limit(e, unknown=(symbol, n))
        ref = lim_factor(template_factor(symbol, ("x",) * n))
        rel = self._reorder(rel, symbol, ref)
        coef = Fraction(0)
        rest = []
        for t, c in rel.items():
            if t.factors == (ref,) and not t.word or (t.word == (ref,) and not t.factors):
                if t.scalars:
                    raise BracketError(f"unknown [{symbol}] enters with scalar factors")
                coef += c
            else:
                rest.append(Expr.from_term(t, c))
        rest_e = Expr.sum(rest)
        if coef == 0:
            raise BracketError(f"identity of {symbol} does not determine order {n}")
        if "lim_" + symbol in rest_e.symbols():
            raise BracketError(f"unknown [{symbol}] enters nonlinearly at order {n}")
        # a matrix identity gives the unknown inside a word; keep that shape
        return contract_metric(rest_e * (-1 / coef))

    def _reorder(self, rel: Expr, symbol: str, ref: Factor) -> Expr:
        """Commute derivative slots of unknown placeholders to the reference order."""
        lname = "lim_" + symbol
        own = len(_own_points(symbol))
        target = [i.name for i in ref.indices[own:]]
        out = []
        work = list(rel.items())
        while work:
            t, c = work.pop()
            loc = None
            for where, seq in (("f", t.factors), ("w", t.word or ())):
                for k, f in enumerate(seq):
                    if f.symbol == lname:
                        loc = (where, k, f)
            if loc is None:
                out.append(Expr.from_term(t, c))
                continue
            where, k, f = loc
            names = [i.name for i in f.indices[own:]]
            if sorted(names) != sorted(target) or any(i.up for i in f.indices):
                raise BracketError(f"placeholder {f} does not match the template slots")
            pos = next((j for j in range(len(names) - 1)
                        if target.index(names[j]) > target.index(names[j + 1])), None)
            if pos is None:
                out.append(Expr.from_term(t, c))
                continue
            # rebuild the bitensor, swap, and take limits of the corrections
            bf = Factor(symbol, tuple(Index(i.name, i.up, p) for i, p in
                                      zip(f.indices[:own], _own_points(symbol))),
                        f.indices[own:], "")
            bt = _replace_factor(t, where, k, bf)
            ds = bf.derivs
            sw = ds[:pos] + (ds[pos + 1], ds[pos]) + ds[pos + 2:]
            main = _replace_factor(t, where, k, lim_factor(replace(bf, derivs=sw)))
            work.append((main, c))
            corr = swap_derivatives(bt, where, k, pos) - Expr.from_term(
                _replace_factor(t, where, k, replace(bf, derivs=sw)))
            for lt, lc in self.limit(corr, unknown=(symbol, len(names))).items():
                work.append((lt, c * lc))
        return contract_metric(Expr.sum(out))

    # ------------------------------------------------------------ persistence
    def to_data(self) -> dict:
        rows = []
        for (sym, pat), ent in sorted(self.entries.items()):
            rows.append({"symbol": sym, "pattern": "".join(pat), "provenance": ent.provenance,
                         "value": expr_to_data(ent.value)})
        return {"format": TABLE_FORMAT, "version": TABLE_VERSION,
                "registry": REGISTRY.content_hash(), "entries": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_data(), sort_keys=True)

    def load_data(self, data: dict) -> None:
        if data.get("format") != TABLE_FORMAT or data.get("version") != TABLE_VERSION:
            raise BracketError("bracket table format or version mismatch")
        if data.get("registry") != REGISTRY.content_hash():
            raise BracketError("bracket table built against a different registry")
        for row in data["entries"]:
            key = (row["symbol"], tuple(row["pattern"]))
            if key not in self.entries:
                self.entries[key] = Entry(key[0], key[1], expr_from_data(row["value"]),
                                          row["provenance"])

    def provenance(self, symbol: str, nder: int) -> str | None:
        ent = self.entries.get((symbol, ("x",) * nder))
        return ent.provenance if ent else None


def _replace_factor(t: Term, where: str, k: int, f: Factor) -> Term:
    if where == "f":
        fs = list(t.factors)
        fs[k] = f
        return Term(t.scalars, tuple(fs), t.word, t.traced)
    ws = list(t.word)
    ws[k] = f
    return Term(t.scalars, t.factors, tuple(ws), t.traced)


# ---------------------------------------------------------------- standard tables

SIGMA_IDENTITY = "sigma[;p]*sigma[;^p] - 2 sigma"
GPT_IDENTITY = "gpt[_t0,_t1'][;p]*sigma[;^p]"
SPIN_IDENTITY = "sigma[;^p]*I[;p]"


def geometric_table(quoted_seeds: bool = False) -> BracketTable:
    """World function and parallel transports from their defining identities.

    Only [sigma], [sigma_a], [sigma_ab] and the transport normalizations are
    seeded; everything else is derived.  ``quoted_seeds`` additionally inserts
    the higher brackets quoted in the literature as asserted entries.
    """
    t = BracketTable()
    t.seed("sigma", "0", 0)
    t.seed("sigma", "0", 1)
    t.seed("sigma", "g[_t0,_t1]", 2)
    t.seed("gpt", "g[_t0,_t1]", 0)
    t.seed("I", "Id", 0)
    t.register("sigma", SIGMA_IDENTITY)
    t.register("gpt", GPT_IDENTITY)
    t.register("I", SPIN_IDENTITY)
    if quoted_seeds:
        for sym, val, n in QUOTED_BRACKETS:
            t.seed(sym, val, n, ASSERTED)
    return t


QUOTED_BRACKETS = (
    ("sigma", "0", 3),
    ("sigma", "-1/3 R[_t0,_t2,_t1,_t3] - 1/3 R[_t0,_t3,_t1,_t2]", 4),
    ("gpt", "0", 1),
    ("gpt", "1/2 R[_t0,_t1,_t2,_t3]", 2),
    ("I", "0", 1),
    ("I", "1/2 Cspin[_t0,_t1]", 2),
)


def synge_transpose(table: BracketTable, f: Factor) -> Expr:
    """Synge's rule for a factor whose outermost y-derivative is moved out."""
    return table.bracket_of_factor(f)


def coincidence_limit(e: Expr, table: BracketTable | None = None) -> Expr:
    return (table or geometric_table()).limit(e)


def dlhopital_ratio(table: BracketTable, B: Expr, f: Expr) -> Expr:
    """[B/f] for [B]=[B_;a']=[f]=[f_;a']=0, as [box B]/[box f] (f scalar)."""
    from pointsplit.curvature import box
    checks = {
        "[B]": table.limit(B),
        "[f]": table.limit(f),
        "[B_;a']": table.limit(differentiate(B, Index("_dh", False, "y"))),
        "[f_;a']": table.limit(differentiate(f, Index("_dh", False, "y"))),
    }
    for name, val in checks.items():
        if not val.is_zero():
            raise BracketError(f"de l'Hospital precondition {name} = 0 fails: {val}")
    den = table.limit(box(f, "y"))
    items = list(den.items())
    if len(items) != 1 or items[0][0].factors or items[0][0].word is not None:
        raise BracketError(f"[box_y f] must be a nonzero number, got {den}")
    return table.limit(box(B, "y")) * (1 / items[0][1])


def canonical(e: Expr) -> Expr:
    return canonicalize(e)
