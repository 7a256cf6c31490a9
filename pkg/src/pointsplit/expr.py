"""Core expression types and the canonical form.

An Expr is a finite sum of Terms with exact rational coefficients.  A Term
is a monomial in scalar atoms, times commutative tensor factors, times at
most one ordered word of matrix factors (optionally traced).  Spinor
indices are never written; matrix order carries them.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Union

from pointsplit.registry import BITENSOR, CONST, METRIC, REGISTRY

Number = Union[int, Fraction]

MAX_GAMMA_RANK = 4  # antisymmetric products of more than four gammas vanish


@dataclass(frozen=True, order=True)
class Index:
    name: str
    up: bool = False
    point: str = "x"

    def flipped(self) -> Index:
        return Index(self.name, not self.up, self.point)

    def renamed(self, name: str) -> Index:
        return Index(name, self.up, self.point)

    def at(self, point: str) -> Index:
        return Index(self.name, self.up, point)


@dataclass(frozen=True, order=True)
class Factor:
    """A tensor or matrix symbol with own indices and a derivative list.

    ``derivs`` is stored outermost-first: ``T[;a;b]`` means nabla_a nabla_b T.
    ``at`` is the base point of a single-point object ("" for bitensors).
    """

    symbol: str
    indices: tuple[Index, ...] = ()
    derivs: tuple[Index, ...] = ()
    at: str = "x"

    def all_indices(self) -> tuple[Index, ...]:
        return self.indices + self.derivs

    def with_derivs(self, derivs: tuple[Index, ...]) -> Factor:
        return replace(self, derivs=derivs)

    def differentiated(self, d: Index) -> Factor:
        return replace(self, derivs=(d,) + self.derivs)

    def map_indices(self, fn) -> Factor:
        return replace(self, indices=tuple(fn(i) for i in self.indices),
                       derivs=tuple(fn(i) for i in self.derivs))


def make_factor(symbol: str, indices: Iterable[Index] = (), derivs: Iterable[Index] = (),
                at: str | None = None) -> Factor:
    decl = REGISTRY.get(symbol)
    indices = tuple(indices)
    derivs = tuple(derivs)
    if decl.rank is not None and len(indices) != decl.rank:
        raise ValueError(f"{symbol} takes {decl.rank} indices, got {len(indices)}")
    if decl.kind == BITENSOR:
        at = ""
        for slot, ix in zip(decl.slots, indices):
            if ix.point != slot:
                raise ValueError(f"slot of {symbol} must be at {slot}")
    elif at is None:
        pts = {i.point for i in indices}
        if len(pts) > 1:
            raise ValueError(f"{symbol} mixes points in its own indices")
        at = pts.pop() if pts else "x"
    return Factor(symbol, indices, derivs, at)


@dataclass(frozen=True, order=True)
class Term:
    """Coefficient-free monomial; the coefficient lives in the Expr map."""

    scalars: tuple[tuple[str, int], ...] = ()
    factors: tuple[Factor, ...] = ()
    word: tuple[Factor, ...] | None = None
    traced: bool = False

    def all_factors(self) -> tuple[Factor, ...]:
        return self.factors + (self.word or ())

    def index_occurrences(self) -> list[Index]:
        out: list[Index] = []
        for f in self.all_factors():
            out.extend(f.indices)
            out.extend(f.derivs)
        return out

    def names(self) -> set[str]:
        return {i.name for i in self.index_occurrences()}

    def free_indices(self) -> tuple[Index, ...]:
        occ = self.index_occurrences()
        cnt = Counter(i.name for i in occ)
        return tuple(sorted(i for i in occ if cnt[i.name] == 1))

    def dummy_names(self) -> set[str]:
        cnt = Counter(i.name for i in self.index_occurrences())
        return {n for n, k in cnt.items() if k == 2}

    def is_matrix(self) -> bool:
        return self.word is not None and not self.traced


def merge_scalars(*parts: Iterable[tuple[str, int]]) -> tuple[tuple[str, int], ...]:
    acc: dict[str, int] = {}
    for part in parts:
        for name, e in part:
            acc[name] = acc.get(name, 0) + e
    return tuple(sorted((n, e) for n, e in acc.items() if e != 0))


def check_term(term: Term) -> None:
    """Raise ValueError unless every index name is free or a proper dummy pair."""
    by_name: dict[str, list[Index]] = {}
    for ix in term.index_occurrences():
        by_name.setdefault(ix.name, []).append(ix)
    for name, occ in by_name.items():
        if len(occ) > 2:
            raise ValueError(f"index {name} appears {len(occ)} times")
        if len(occ) == 2:
            a, b = occ
            if a.up == b.up:
                raise ValueError(f"dummy {name} needs opposite variance")
            if a.point != b.point:
                raise ValueError(f"dummy {name} mixes points")


# ---------------------------------------------------------------- renaming

def _fresh_names(used: set[str], n: int) -> list[str]:
    out = []
    k = 0
    while len(out) < n:
        name = f"_{k}"
        if name not in used:
            out.append(name)
            used.add(name)
        k += 1
    return out


def rename_term(term: Term, mapping: dict[str, str]) -> Term:
    if not mapping:
        return term

    def fn(ix: Index) -> Index:
        new = mapping.get(ix.name)
        return ix if new is None else ix.renamed(new)

    factors = tuple(f.map_indices(fn) for f in term.factors)
    word = None if term.word is None else tuple(f.map_indices(fn) for f in term.word)
    return Term(term.scalars, factors, word, term.traced)


def separate(left: Term, right: Term) -> tuple[Term, Term]:
    """Rename dummies so that the two terms can be multiplied safely."""
    lnames, rnames = left.names(), right.names()
    clash = right.dummy_names() & lnames
    used = lnames | rnames
    if clash:
        fresh = _fresh_names(used, len(clash))
        right = rename_term(right, dict(zip(sorted(clash), fresh)))
        rnames = right.names()
    clash = left.dummy_names() & rnames
    if clash:
        fresh = _fresh_names(used | rnames, len(clash))
        left = rename_term(left, dict(zip(sorted(clash), fresh)))
    return left, right


def term_product(a: Term, b: Term) -> Term:
    a, b = separate(a, b)
    if a.word is None:
        word, traced = b.word, b.traced
    elif b.word is None:
        word, traced = a.word, a.traced
    else:
        if a.traced or b.traced:
            raise ValueError("cannot multiply a traced word by another word")
        word, traced = a.word + b.word, False
    return Term(merge_scalars(a.scalars, b.scalars), a.factors + b.factors, word, traced)


# ---------------------------------------------------------------- Expr

class Expr:
    """Immutable sum of terms with exact rational coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: dict[Term, Fraction] | None = None) -> None:
        self._terms: dict[Term, Fraction] = {t: c for t, c in (terms or {}).items() if c != 0}
        self._hash: int | None = None

    # constructors
    @staticmethod
    def zero() -> Expr:
        return Expr()

    @staticmethod
    def number(q: Number) -> Expr:
        return Expr({Term(): Fraction(q)})

    @staticmethod
    def identity(q: Number = 1) -> Expr:
        return Expr({Term(word=()): Fraction(q)})

    @staticmethod
    def atom(name: str, exp: int = 1) -> Expr:
        return Expr({Term(scalars=((name, exp),)): Fraction(1)})

    @staticmethod
    def of(factor: Factor, coeff: Number = 1) -> Expr:
        if REGISTRY.get(factor.symbol).matrix:
            return Expr({Term(word=(factor,)): Fraction(coeff)})
        return Expr({Term(factors=(factor,)): Fraction(coeff)})

    @staticmethod
    def from_term(term: Term, coeff: Number = 1) -> Expr:
        return Expr({term: Fraction(coeff)})

    @staticmethod
    def sum(items: Iterable[Expr]) -> Expr:
        acc: dict[Term, Fraction] = {}
        for e in items:
            for t, c in e._terms.items():
                acc[t] = acc.get(t, 0) + c
        return Expr(acc)

    # access
    def items(self) -> Iterator[tuple[Term, Fraction]]:
        return iter(self._terms.items())

    def terms(self) -> list[Term]:
        return list(self._terms)

    def coeff(self, term: Term) -> Fraction:
        return self._terms.get(term, Fraction(0))

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def free_indices(self) -> tuple[Index, ...]:
        for t in self._terms:
            return t.free_indices()
        return ()

    def is_matrix(self) -> bool:
        return any(t.is_matrix() for t in self._terms)

    # arithmetic
    def __add__(self, other) -> Expr:
        other = _coerce(other)
        acc = dict(self._terms)
        for t, c in other._terms.items():
            acc[t] = acc.get(t, 0) + c
        return Expr(acc)

    __radd__ = __add__

    def __neg__(self) -> Expr:
        return Expr({t: -c for t, c in self._terms.items()})

    def __sub__(self, other) -> Expr:
        return self + (-_coerce(other))

    def __rsub__(self, other) -> Expr:
        return _coerce(other) - self

    def __mul__(self, other) -> Expr:
        if isinstance(other, (int, Fraction)):
            q = Fraction(other)
            return Expr({t: c * q for t, c in self._terms.items()})
        acc: dict[Term, Fraction] = {}
        for t1, c1 in self._terms.items():
            for t2, c2 in other._terms.items():
                t = term_product(t1, t2)
                acc[t] = acc.get(t, 0) + c1 * c2
        return Expr(acc)

    def __rmul__(self, other) -> Expr:
        if isinstance(other, (int, Fraction)):
            return self * other
        return _coerce(other) * self

    def __truediv__(self, other: Number) -> Expr:
        return self * (1 / Fraction(other))

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Expr.number(other) if other else Expr()
        if not isinstance(other, Expr):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self) -> str:
        from pointsplit.printing import to_plain
        return f"Expr({to_plain(self)!r})"

    def __str__(self) -> str:
        from pointsplit.printing import to_plain
        return to_plain(self)

    # transformations
    def map_terms(self, fn) -> Expr:
        """fn(term, coeff) -> Expr; results are summed."""
        return Expr.sum(fn(t, c) for t, c in self._terms.items())

    def canonical(self) -> Expr:
        return canonicalize(self)

    def traced(self) -> Expr:
        acc: dict[Term, Fraction] = {}
        for t, c in self._terms.items():
            if t.word is None:
                raise ValueError("trace of a scalar term")
            nt = Term(t.scalars, t.factors, t.word, True)
            acc[nt] = acc.get(nt, 0) + c
        return Expr(acc)

    def subs_scalar(self, name: str, value: Number) -> Expr:
        value = Fraction(value)
        acc: dict[Term, Fraction] = {}
        for t, c in self._terms.items():
            e = dict(t.scalars).get(name, 0)
            if e:
                if value == 0:
                    if e > 0:
                        continue
                    raise ZeroDivisionError(f"{name}^{e} at {name}=0")
                c = c * value ** e
                t = replace(t, scalars=tuple(p for p in t.scalars if p[0] != name))
            acc[t] = acc.get(t, 0) + c
        return Expr(acc)

    def scalar_atoms(self) -> set[str]:
        return {n for t in self._terms for n, _ in t.scalars}

    def symbols(self) -> set[str]:
        return {f.symbol for t in self._terms for f in t.all_factors()}


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Expr.number(x) if x else Expr()
    raise TypeError(f"cannot combine Expr with {type(x).__name__}")


# ---------------------------------------------------------------- canonical form

def _normalize_factor(f: Factor) -> Factor | None:
    """Local rewrite of one factor; None means the factor vanishes."""
    decl = REGISTRY.get(f.symbol)
    if decl.kind in (METRIC, CONST) and f.derivs:
        return None
    if decl.kind == BITENSOR:
        if f.derivs:
            xs = tuple(d for d in f.derivs if d.point == "x")
            ys = tuple(d for d in f.derivs if d.point == "y")
            if xs + ys != f.derivs:
                f = replace(f, derivs=xs + ys)
        return f
    if decl.kind not in (METRIC, CONST):
        for d in f.derivs:
            if d.point != f.at:
                return None
    if decl.antisymmetric and len(f.indices) > MAX_GAMMA_RANK:
        return None
    return f


def _class_key(f: Factor) -> tuple:
    return (f.symbol, f.at, len(f.indices), tuple(d.point for d in f.derivs))


def _tokens(ixs: tuple[Index, ...], free: frozenset[str], dmap: dict[str, int]) -> tuple:
    out = []
    for ix in ixs:
        if ix.name in free:
            out.append((0, ix.name, ix.up, ix.point))
        else:
            k = dmap.get(ix.name)
            if k is None:
                k = len(dmap)
                dmap[ix.name] = k
            out.append((1, k, ix.point))
    return tuple(out)


def _factor_candidates(f: Factor) -> list[tuple[Factor, int]]:
    n = len(f.indices)
    group = REGISTRY.group(f.symbol, n)
    if len(group) == 1:
        return [(f, 1)]
    out = []
    for perm, sign in group:
        out.append((replace(f, indices=tuple(f.indices[p] for p in perm)), sign))
    return out


@lru_cache(maxsize=1 << 18)
def canon_term(term: Term) -> tuple[Term, int]:
    """Canonical representative of a monomial and the sign relating them.

    Returns (term, 0) when the monomial equals minus itself.
    """
    factors = []
    for f in term.factors:
        nf = _normalize_factor(f)
        if nf is None:
            return term, 0
        factors.append(nf)
    word = term.word
    traced = term.traced
    if word is not None:
        nw = []
        for f in word:
            if f.symbol == "Gam" and len(f.indices) <= 1:
                if not f.indices:
                    continue
                f = Factor("gamma", f.indices, f.derivs, f.at)
            nf = _normalize_factor(f)
            if nf is None:
                return term, 0
            nw.append(nf)
        word = tuple(nw)
        if traced and not word:
            word, traced = None, False
            extra = 4
        else:
            extra = 1
    else:
        extra = 1

    occ = []
    for f in factors:
        occ.extend(f.all_indices())
    for f in word or ():
        occ.extend(f.all_indices())
    cnt = Counter(i.name for i in occ)
    free = frozenset(n for n, k in cnt.items() if k == 1)

    factors.sort(key=_class_key)
    classes: list[tuple] = [_class_key(f) for f in factors]

    # state: (chosen factor list, remaining index set, dummy map, sign, key)
    states = [((), tuple(range(len(factors))), {}, 1)]
    for pos, ck in enumerate(classes):
        best = None
        nxt = []
        for chosen, remaining, dmap, sign in states:
            for j in remaining:
                if classes[j] != ck:
                    continue
                rest = tuple(r for r in remaining if r != j)
                for cand, s in _factor_candidates(factors[j]):
                    dm = dict(dmap)
                    tok = (_tokens(cand.indices, free, dm), _tokens(cand.derivs, free, dm))
                    if best is None or tok < best:
                        best = tok
                        nxt = [(chosen + (cand,), rest, dm, sign * s, tok)]
                    elif tok == best:
                        nxt.append((chosen + (cand,), rest, dm, sign * s, tok))
        states = _dedupe(nxt)
        if states is None:
            return term, 0

    if word:
        rotations = range(len(word)) if traced else (0,)
        wstates = []
        for chosen, _rest, dmap, sign in states:
            for r in rotations:
                wstates.append((chosen, word[r:] + word[:r], dict(dmap), sign, ()))
        # lexicographic minimization position by position
        for pos in range(len(word)):
            best = None
            nxt = []
            for chosen, w, dmap, sign, acc in wstates:
                for cand, s in _factor_candidates(w[pos]):
                    dm = dict(dmap)
                    tok = (cand.symbol, cand.at, _tokens(cand.indices, free, dm),
                           _tokens(cand.derivs, free, dm))
                    if best is None or tok < best:
                        best = tok
                        nxt = [(chosen + (cand,), w, dm, sign * s, acc)]
                    elif tok == best:
                        nxt.append((chosen + (cand,), w, dm, sign * s, acc))
            wstates = []
            seen: dict[tuple, int] = {}
            for chosen, w, dm, sign, acc in nxt:
                key = (chosen, w[pos + 1:], tuple(sorted(dm.items())))
                if key in seen:
                    if seen[key] != sign:
                        return term, 0
                    continue
                seen[key] = sign
                wstates.append((chosen, w, dm, sign, acc))
        states = [(st[0], (), st[2], st[3]) for st in wstates]

    chosen, _rest, dmap, sign = states[0]
    for st in states[1:]:
        if st[3] != sign and _rename_all(st[0], st[2], free) == _rename_all(chosen, dmap, free):
            return term, 0
    nf = len(factors)
    renamed = _rename_all(chosen, dmap, free)
    new = Term(term.scalars, renamed[:nf], renamed[nf:] if word is not None else None, traced)
    return new, sign * extra


def _dedupe(states):
    seen: dict[tuple, int] = {}
    out = []
    for chosen, rest, dm, sign, _tok in states:
        key = (chosen, rest, tuple(sorted(dm.items())))
        if key in seen:
            if seen[key] != sign:
                return None
            continue
        seen[key] = sign
        out.append((chosen, rest, dm, sign))
    return out


def _rename_all(factors: tuple[Factor, ...], dmap: dict[str, int], free) -> tuple[Factor, ...]:
    seen: set[str] = set()

    def fn(ix: Index) -> Index:
        if ix.name in free:
            return ix
        k = dmap[ix.name]
        name = f"_{k}"
        if name in seen:
            return Index(name, True, ix.point)
        seen.add(name)
        return Index(name, False, ix.point)

    out = []
    for f in factors:
        idx = tuple(fn(i) for i in f.indices)
        der = tuple(fn(i) for i in f.derivs)
        out.append(Factor(f.symbol, idx, der, f.at))
    return tuple(out)


def canonicalize(e: Expr) -> Expr:
    acc: dict[Term, Fraction] = {}
    for t, c in e.items():
        if t.scalars != merge_scalars(t.scalars):
            t = replace(t, scalars=merge_scalars(t.scalars))
        nt, s = canon_term(t)
        if s == 0:
            continue
        acc[nt] = acc.get(nt, 0) + c * s
    return Expr(acc)
