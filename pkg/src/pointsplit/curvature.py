"""Riemannian rules: metric contraction, covariant derivatives and their
commutators, Bianchi-type identities, and the linear normal form.

Conventions: derivative lists are outermost-first, ``T[;a;b] = nabla_a nabla_b T``;
``[nabla_p, nabla_q] v_a = R_a^l_pq v_l``; Ricci is ``R_ab = R_a^l_bl``; spinors obey
``[nabla_p, nabla_q] psi = C_pq psi`` and cospinors pick up ``-psibar C_pq``.
"""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from typing import Callable, Iterable

from pointsplit.expr import (
    Expr, Factor, Index, Term, canon_term, canonicalize, merge_scalars,
)
from pointsplit.registry import BITENSOR, CONST, LIMIT, METRIC, REGISTRY

# ---------------------------------------------------------------- helpers


def fresh_name(used: set[str], stem: str = "_l") -> str:
    k = 0
    while f"{stem}{k}" in used:
        k += 1
    name = f"{stem}{k}"
    used.add(name)
    return name


def idx(spec: str) -> Index:
    """Index from compact text: '^a', "b'", '^c''."""
    up = spec.startswith("^")
    spec = spec.lstrip("^")
    point = "y" if spec.endswith("'") else "x"
    return Index(spec.rstrip("'"), up, point)


def fac(symbol: str, *indices: str, derivs: Iterable[str] = (), at: str | None = None) -> Factor:
    from pointsplit.expr import make_factor
    return make_factor(symbol, [idx(i) for i in indices], [idx(d) for d in derivs], at)


def metric(a: Index, b: Index) -> Expr:
    return Expr.of(Factor("g", (a, b), (), a.point))


def riemann(*ixs: Index) -> Expr:
    return Expr.of(Factor("R", tuple(ixs), (), ixs[0].point))


def _term_expr(t: Term) -> Expr:
    return Expr.from_term(t)


def slot_sides(f: Factor) -> tuple[str | None, str | None]:
    """Spinor points of the left and right index of a matrix factor."""
    decl = REGISTRY.get(f.symbol)
    if not decl.matrix:
        return None, None
    if decl.kind == CONST:
        p = f.indices[0].point if f.indices else "x"
        return p, p
    if decl.kind in (LIMIT,) or decl.kind not in (BITENSOR,):
        return f.at, f.at
    return decl.sides


# ---------------------------------------------------------------- contraction


def _riemann_trace(f: Factor, i: int, j: int) -> tuple[Factor, int] | None:
    """Contract slots i<j of a Riemann factor into Ricci (with sign)."""
    ix = f.indices
    rule = {(0, 1): None, (2, 3): None, (1, 3): ((0, 2), 1), (0, 2): ((1, 3), 1),
            (0, 3): ((1, 2), -1), (1, 2): ((0, 3), -1)}[(i, j)]
    if rule is None:
        return None
    (a, b), sign = rule
    return Factor("Ric", (ix[a], ix[b]), f.derivs, f.at), sign


def _self_trace(f: Factor) -> tuple[Factor | None, Fraction] | None:
    """Resolve a dummy pair inside one factor's own slots."""
    names = [i.name for i in f.indices]
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            if names[i] != names[j]:
                continue
            if f.symbol == "R":
                r = _riemann_trace(f, i, j)
                if r is None:
                    return None, Fraction(0)
                return r[0], Fraction(r[1])
            if f.symbol == "Ric":
                return Factor("Rs", (), f.derivs, f.at), Fraction(1)
            if f.symbol == "G":
                return Factor("Rs", (), f.derivs, f.at), Fraction(-1)
            if f.symbol == "Weyl":
                return None, Fraction(0)
            if f.symbol == "g":
                return None, Fraction(4)
    return False  # type: ignore[return-value]


def _contract_term(t: Term) -> tuple[Term, Fraction] | None:
    coeff = Fraction(1)
    changed = True
    while changed:
        changed = False
        factors = list(t.factors)
        # traces inside a single factor
        for k, f in enumerate(factors):
            if f.symbol in ("R", "Ric", "G", "Weyl", "g"):
                r = _self_trace(f)
                if r is False:
                    continue
                nf, c = r
                if c == 0:
                    return None
                coeff *= c
                if nf is None:
                    factors.pop(k)
                else:
                    factors[k] = nf
                t = Term(t.scalars, tuple(factors), t.word, t.traced)
                changed = True
                break
        if changed:
            continue
        # metric against another factor
        for k, f in enumerate(factors):
            if f.symbol != "g" or f.derivs:
                continue
            others = factors[:k] + factors[k + 1:]
            for s in range(2):
                a, b = f.indices[s], f.indices[1 - s]
                target = _find(others, t.word, b.name)
                if target is None:
                    continue
                new_others, new_word = _replace_index(others, t.word, target,
                                                      Index(a.name, a.up, a.point))
                t = Term(t.scalars, tuple(new_others), new_word, t.traced)
                changed = True
                break
            if changed:
                break
    return t, coeff


def _find(factors: list[Factor], word, name: str):
    for k, f in enumerate(factors):
        for s, i in enumerate(f.indices):
            if i.name == name:
                return ("f", k, "i", s)
        for s, i in enumerate(f.derivs):
            if i.name == name:
                return ("f", k, "d", s)
    for k, f in enumerate(word or ()):
        for s, i in enumerate(f.indices):
            if i.name == name:
                return ("w", k, "i", s)
        for s, i in enumerate(f.derivs):
            if i.name == name:
                return ("w", k, "d", s)
    return None


def _replace_index(factors: list[Factor], word, loc, new: Index):
    where, k, kind, s = loc
    seq = list(factors) if where == "f" else list(word)
    f = seq[k]
    if kind == "i":
        ixs = list(f.indices)
        ixs[s] = new
        f = replace(f, indices=tuple(ixs))
    else:
        ds = list(f.derivs)
        ds[s] = new
        f = replace(f, derivs=tuple(ds))
    seq[k] = f
    if where == "f":
        return seq, word
    return list(factors), tuple(seq)


@lru_cache(maxsize=1 << 18)
def _contract_canon(t: Term) -> tuple[Term, Fraction] | None:
    r = _contract_term(t)
    if r is None:
        return None
    nt, c = r
    ct, s = canon_term(nt)
    if s == 0:
        return None
    return ct, c * s


def contract_metric(e: Expr) -> Expr:
    """Resolve metric contractions and curvature traces; result is canonical."""
    acc: dict[Term, Fraction] = {}
    for t, c in e.items():
        if t.scalars != merge_scalars(t.scalars):
            t = replace(t, scalars=merge_scalars(t.scalars))
        ct, s = canon_term(t)
        if s == 0:
            continue
        r = _contract_canon(ct)
        if r is None:
            continue
        nt, k = r
        acc[nt] = acc.get(nt, 0) + c * s * k
    return Expr(acc)


# ---------------------------------------------------------------- differentiation


def differentiate_term(t: Term, d: Index) -> Expr:
    """nabla_d of a monomial by the Leibniz rule (d becomes the outermost slot)."""
    acc: dict[Term, Fraction] = {}
    for k, f in enumerate(t.factors):
        if _killed_by(f, d):
            continue
        fs = list(t.factors)
        fs[k] = f.differentiated(d)
        nt = Term(t.scalars, tuple(fs), t.word, t.traced)
        acc[nt] = acc.get(nt, 0) + 1
    for k, f in enumerate(t.word or ()):
        if _killed_by(f, d):
            continue
        ws = list(t.word)
        ws[k] = f.differentiated(d)
        nt = Term(t.scalars, t.factors, tuple(ws), t.traced)
        acc[nt] = acc.get(nt, 0) + 1
    return Expr(acc)


def _killed_by(f: Factor, d: Index) -> bool:
    kind = REGISTRY.get(f.symbol).kind
    if kind in (METRIC, CONST):
        return True
    if kind == BITENSOR:
        return False
    return f.at != d.point


def differentiate(e: Expr, d: Index) -> Expr:
    """Covariant derivative nabla_d e; dummies of e are renamed away from d."""
    acc: dict[Term, Fraction] = {}
    for t, c in e.items():
        if d.name in t.names():
            t = _avoid(t, {d.name})
        for nt, k in differentiate_term(t, d).items():
            acc[nt] = acc.get(nt, 0) + c * k
    return Expr(acc)


def _avoid(t: Term, names: set[str]) -> Term:
    from pointsplit.expr import rename_term
    clash = t.dummy_names() & names
    if not clash:
        return t
    used = t.names() | names
    return rename_term(t, {n: fresh_name(used, "_r") for n in sorted(clash)})


def derivative_chain(e: Expr, ds: Iterable[Index]) -> Expr:
    """Apply nabla_{d1} ... nabla_{dn} (list given outermost-first)."""
    ds = list(ds)
    for d in reversed(ds):
        e = differentiate(e, d)
    return e


def box(e: Expr, point: str = "x") -> Expr:
    """g^ab nabla_a nabla_b applied to e."""
    used = {i.name for t in e.terms() for i in t.index_occurrences()}
    a = fresh_name(used, "_b")
    return derivative_chain(e, [Index(a, False, point), Index(a, True, point)])


# ---------------------------------------------------------------- commutators


def commutator_on_slots(t: Term, where: str, k: int, p: Index, q: Index,
                        inner: tuple[Index, ...], used: set[str] | None = None) -> Expr:
    """[nabla_p, nabla_q] applied to the object S = nabla_inner F inside term t.

    ``where``/``k`` locate F ('f' commutative factor, 'w' word position); the
    term t is taken with F already carrying ``inner`` as its derivative list.
    """
    seq = t.factors if where == "f" else t.word
    f = seq[k]
    point = p.point
    used = set(used or ()) | t.names() | {p.name, q.name}
    acc: list[Expr] = []
    slots = [("i", s, ix) for s, ix in enumerate(f.indices)]
    slots += [("d", s, ix) for s, ix in enumerate(inner)]
    for kind, s, ix in slots:
        if ix.point != point:
            continue
        lam = fresh_name(used)
        newslot = Index(lam, ix.up, ix.point)
        if kind == "i":
            ixs = list(f.indices)
            ixs[s] = newslot
            nf = replace(f, indices=tuple(ixs))
        else:
            ds = list(inner)
            ds[s] = newslot
            nf = replace(f, derivs=tuple(ds))
        rf = Factor("R", (ix, Index(lam, not ix.up, ix.point), p, q), (), point)
        nt = _put(t, where, k, nf)
        nt = Term(nt.scalars, nt.factors + (rf,), nt.word, nt.traced)
        acc.append(_term_expr(nt))
    left, right = slot_sides(f)
    if left == point or right == point:
        if where != "w":
            raise ValueError("matrix factor outside the word")
        cf = Factor("Cspin", (p, q), (), point)
        ws = list(t.word)
        if left == point:
            nw = ws[:k] + [cf] + ws[k:]
            acc.append(_term_expr(Term(t.scalars, t.factors, tuple(nw), t.traced)))
        if right == point:
            nw = ws[:k + 1] + [cf] + ws[k + 1:]
            acc.append(-_term_expr(Term(t.scalars, t.factors, tuple(nw), t.traced)))
    return Expr.sum(acc)


def _put(t: Term, where: str, k: int, f: Factor) -> Term:
    if where == "f":
        fs = list(t.factors)
        fs[k] = f
        return Term(t.scalars, tuple(fs), t.word, t.traced)
    ws = list(t.word)
    ws[k] = f
    return Term(t.scalars, t.factors, tuple(ws), t.traced)


def splice(t: Term, where: str, k: int, piece: Term) -> Term:
    """Replace the factor at (where, k) by the factors and word block of piece."""
    if where == "f":
        fs = t.factors[:k] + t.factors[k + 1:] + piece.factors
        return Term(merge_scalars(t.scalars, piece.scalars), fs, t.word, t.traced)
    fs = t.factors + piece.factors
    w = t.word[:k] + (piece.word or ()) + t.word[k + 1:]
    return Term(merge_scalars(t.scalars, piece.scalars), fs, w, t.traced)


def isolate(f: Factor, where: str) -> Term:
    return Term((), (f,), None, False) if where == "f" else Term((), (), (f,), False)


def swap_derivatives(t: Term, where: str, k: int, pos: int) -> Expr:
    """Exchange derivative slots pos and pos+1 of one factor.

    Returns an Expr equal to t: the swapped monomial plus curvature corrections.
    """
    seq = t.factors if where == "f" else t.word
    f = seq[k]
    ds = f.derivs
    if pos < 0 or pos + 1 >= len(ds):
        raise ValueError("derivative positions out of range")
    p, q = ds[pos], ds[pos + 1]
    sw = ds[:pos] + (q, p) + ds[pos + 2:]
    swapped = _term_expr(_put(t, where, k, f.with_derivs(sw)))
    if p.point != q.point:
        return swapped
    outer, inner = ds[:pos], ds[pos + 2:]
    obj = isolate(f.with_derivs(inner), where)
    corr = commutator_on_slots(obj, where, 0, p, q, inner, t.names())
    corr = derivative_chain(corr, outer)
    out = [swapped]
    for ct, cc in corr.items():
        out.append(_term_expr(splice(t, where, k, ct)) * cc)
    return Expr.sum(out)


def commute_derivatives(e: Expr, at: tuple[int, int] | None = None,
                        factor: int = 0) -> Expr:
    """Swap adjacent derivative slots ``at=(i, i+1)`` on the chosen factor of each term.

    The factor number counts commutative factors first, then word positions.
    Terms whose chosen factor lacks the two slots (such as curvature corrections
    from an earlier swap) pass through unchanged, so a second swap at the same
    positions undoes the first.
    """
    i, j = at if at is not None else (0, 1)
    if j != i + 1:
        raise ValueError("positions must be adjacent")
    out = []
    for t, c in e.items():
        nf = len(t.factors)
        where, k = ("f", factor) if factor < nf else ("w", factor - nf)
        seq = t.factors if where == "f" else (t.word or ())
        if k >= len(seq) or j >= len(seq[k].derivs):
            out.append(Expr.from_term(t, c))
            continue
        out.append(swap_derivatives(t, where, k, i) * c)
    return Expr.sum(out)


# ---------------------------------------------------------------- identity generators


def _locations(t: Term):
    for k, f in enumerate(t.factors):
        yield "f", k, f
    for k, f in enumerate(t.word or ()):
        yield "w", k, f


def gen_cyclic(t: Term) -> list[Expr]:
    out = []
    for where, k, f in _locations(t):
        if f.symbol != "R":
            continue
        a, b, c, d = f.indices
        rel = Expr.sum(_term_expr(_put(t, where, k, replace(f, indices=ix)))
                       for ix in ((a, b, c, d), (a, d, b, c), (a, c, d, b)))
        out.append(rel)
    return out


def gen_bianchi(t: Term) -> list[Expr]:
    out = []
    for where, k, f in _locations(t):
        if f.symbol not in ("R", "Cspin") or not f.derivs:
            continue
        e = f.derivs[-1]
        outer = f.derivs[:-1]
        if f.symbol == "R":
            p, q, r, s = f.indices
            forms = [((p, q, r, s), e), ((p, q, s, e), r), ((p, q, e, r), s)]
            forms2 = [((p, q, r, s), e), ((q, e, r, s), p), ((e, p, r, s), q)]
            for fm in (forms, forms2):
                out.append(Expr.sum(
                    _term_expr(_put(t, where, k, replace(f, indices=ix, derivs=outer + (d,))))
                    for ix, d in fm))
        else:
            p, q = f.indices
            fm = [((p, q), e), ((q, e), p), ((e, p), q)]
            out.append(Expr.sum(
                _term_expr(_put(t, where, k, replace(f, indices=ix, derivs=outer + (d,))))
                for ix, d in fm))
    return out


def gen_ricci_divergence(t: Term) -> list[Expr]:
    out = []
    for where, k, f in _locations(t):
        if f.symbol != "Ric" or not f.derivs:
            continue
        e = f.derivs[-1]
        for s in range(2):
            if f.indices[s].name == e.name:
                other = f.indices[1 - s]
                rs = Factor("Rs", (), f.derivs[:-1] + (other,), f.at)
                rel = _term_expr(t) - _term_expr(_put(t, where, k, rs)) * Fraction(1, 2)
                out.append(rel)
    return out


def gen_commutation(t: Term) -> list[Expr]:
    out = []
    for where, k, f in _locations(t):
        for pos in range(len(f.derivs) - 1):
            if f.derivs[pos].point != f.derivs[pos + 1].point:
                continue
            out.append(_term_expr(t) - swap_derivatives(t, where, k, pos))
    return out


def gen_gamma_schouten(t: Term) -> list[Expr]:
    """Antisymmetrizing five spacetime slots gives zero in four dimensions.

    Applied to a rank-4 Gam factor together with one further slot.
    """
    out = []
    if not t.word:
        return out
    occ = _slot_list(t)
    dummies = t.dummy_names()
    for wk, f in enumerate(t.word):
        if f.symbol != "Gam" or len(f.indices) != 4:
            continue
        gam_slots = [("w", wk, "i", s) for s in range(4)]
        for loc, ix in occ:
            if loc in gam_slots or ix.point != f.indices[0].point:
                continue
            rel = _antisym5(t, gam_slots + [loc], dummies)
            if rel is not None:
                out.append(rel)
    return out


def _slot_list(t: Term):
    out = []
    for where, k, f in _locations(t):
        for s, i in enumerate(f.indices):
            out.append(((where, k, "i", s), i))
        for s, i in enumerate(f.derivs):
            out.append(((where, k, "d", s), i))
    return out


def _get(t: Term, loc) -> Index:
    where, k, kind, s = loc
    f = (t.factors if where == "f" else t.word)[k]
    return (f.indices if kind == "i" else f.derivs)[s]


def _set(t: Term, loc, ix: Index) -> Term:
    where, k, kind, s = loc
    f = (t.factors if where == "f" else t.word)[k]
    if kind == "i":
        ixs = list(f.indices)
        ixs[s] = ix
        f = replace(f, indices=tuple(ixs))
    else:
        ds = list(f.derivs)
        ds[s] = ix
        f = replace(f, derivs=tuple(ds))
    return _put(t, where, k, f)


def _antisym5(t: Term, locs, dummies) -> Expr | None:
    """Sum over permutations of the names in five slots with sign (all slots
    brought to a common variance through dummy seesaws)."""
    for target_up in (True, False):
        tt = t
        ok = True
        for loc in locs:
            ix = _get(tt, loc)
            if ix.up == target_up:
                continue
            if ix.name not in dummies:
                ok = False
                break
            # flip this occurrence and its partner
            for loc2, ix2 in _slot_list(tt):
                if ix2.name == ix.name:
                    tt = _set(tt, loc2, ix2.flipped())
        if not ok:
            continue
        names = [_get(tt, loc) for loc in locs]
        acc = []
        for perm in permutations(range(5)):
            sign = _perm_sign(perm)
            nt = tt
            for loc, j in zip(locs, perm):
                nt = _set(nt, loc, names[j])
            acc.append(_term_expr(nt) * sign)
        return Expr.sum(acc)
    return None


def _perm_sign(p) -> int:
    s = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


DEFAULT_GENERATORS: tuple[Callable[[Term], list[Expr]], ...] = (
    gen_cyclic, gen_bianchi, gen_ricci_divergence, gen_commutation, gen_gamma_schouten,
)


# ---------------------------------------------------------------- expansions


def expand_symbols(e: Expr, rules: dict[str, Callable[[Factor], Expr]]) -> Expr:
    """Replace factors whose symbol has a rule; derivatives are pushed through."""
    out = []
    for t, c in e.items():
        pieces = [Expr.from_term(Term(t.scalars, (), None, False), c)]
        hit = False
        for f in t.factors:
            rule = rules.get(f.symbol)
            if rule is None:
                pieces.append(Expr.of(f))
            else:
                hit = True
                pieces.append(_expand_factor(f, rule))
        if t.word is not None:
            wexpr = Expr.identity()
            for f in t.word:
                rule = rules.get(f.symbol)
                if rule is None:
                    wexpr = wexpr * Expr.of(f)
                else:
                    hit = True
                    wexpr = wexpr * _expand_factor(f, rule)
            if t.traced:
                wexpr = wexpr.traced()
            pieces.append(wexpr)
        if not hit:
            out.append(Expr.from_term(t, c))
            continue
        prod = pieces[0]
        for p in pieces[1:]:
            prod = prod * p
        out.append(prod)
    return Expr.sum(out)


def _expand_factor(f: Factor, rule: Callable[[Factor], Expr]) -> Expr:
    base = rule(replace(f, derivs=()))
    return derivative_chain(base, f.derivs)


def _einstein(f: Factor) -> Expr:
    a, b = f.indices
    return Expr.of(Factor("Ric", (a, b), (), f.at)) - metric(a, b) * Expr.of(
        Factor("Rs", (), (), f.at)) * Fraction(1, 2)


def weyl_definition(a: Index, b: Index, c: Index, d: Index) -> Expr:
    """Traceless part of Riemann in four dimensions."""
    pt = a.point
    R = riemann(a, b, c, d)

    def ric(x, y):
        return Expr.of(Factor("Ric", (x, y), (), pt))

    rs = Expr.of(Factor("Rs", (), (), pt))
    half = Fraction(1, 2)
    out = R - (metric(a, c) * ric(b, d) - metric(a, d) * ric(b, c)
               - metric(b, c) * ric(a, d) + metric(b, d) * ric(a, c)) * half
    out = out + (metric(a, c) * metric(b, d) - metric(a, d) * metric(b, c)) * rs * Fraction(1, 6)
    return out


def weyl_expand(e: Expr) -> Expr:
    rules = {"Weyl": lambda f: weyl_definition(*f.indices), "G": _einstein}
    return contract_metric(expand_symbols(e, rules))


# ---------------------------------------------------------------- normal form


def _inversions(t: Term) -> int:
    n = 0
    for f in t.all_factors():
        ds = f.derivs
        for i in range(len(ds)):
            for j in range(i + 1, len(ds)):
                if ds[i].point == ds[j].point and ds[i].name > ds[j].name:
                    n += 1
    return n


def _divergences(t: Term) -> int:
    n = 0
    for f in t.all_factors():
        own = {i.name for i in f.indices}
        n += sum(1 for d in f.derivs if d.name in own)
    return n


@lru_cache(maxsize=1 << 18)
def monomial_key(t: Term) -> tuple:
    from pointsplit.printing import term_body_plain
    return (_divergences(t), _inversions(t), term_body_plain(t))


class Reducer:
    """Linear reduction of monomials modulo generated identities.

    Relations are produced on demand from every monomial met (closure) and
    kept in echelon form with the largest monomial (by ``monomial_key``) as
    pivot.  The remainder after eliminating pivots is a normal form.
    """

    def __init__(self, generators=DEFAULT_GENERATORS, prepare: Callable[[Expr], Expr] | None = None,
                 max_monomials: int = 200000) -> None:
        self.generators = tuple(generators)
        self.prepare = prepare or contract_metric
        self.rows: dict[Term, dict[Term, Fraction]] = {}
        self.seen: set[Term] = set()
        self.max_monomials = max_monomials

    def add_relation(self, rel: Expr) -> None:
        row = dict(self.prepare(rel).items())
        self._insert(row)

    def _insert(self, row: dict[Term, Fraction]) -> None:
        while row:
            piv = max(row, key=monomial_key)
            prow = self.rows.get(piv)
            if prow is None:
                c = row[piv]
                self.rows[piv] = {t: v / c for t, v in row.items()}
                return
            f = row[piv]
            for t, v in prow.items():
                nv = row.get(t, 0) - f * v
                if nv:
                    row[t] = nv
                else:
                    row.pop(t, None)

    def close(self, monomials: Iterable[Term]) -> None:
        queue = [m for m in monomials if m not in self.seen]
        while queue:
            m = queue.pop()
            if m in self.seen:
                continue
            self.seen.add(m)
            if len(self.seen) > self.max_monomials:
                raise RuntimeError("identity closure exceeded the monomial budget")
            for gen in self.generators:
                for rel in gen(m):
                    prepared = self.prepare(rel)
                    for t in prepared.terms():
                        if t not in self.seen:
                            queue.append(t)
                    self._insert(dict(prepared.items()))

    def reduce(self, e: Expr) -> Expr:
        e = self.prepare(e)
        self.close(e.terms())
        row = dict(e.items())
        out: dict[Term, Fraction] = {}
        while row:
            m = max(row, key=monomial_key)
            c = row.pop(m)
            prow = self.rows.get(m)
            if prow is None:
                out[m] = c
                continue
            for t, v in prow.items():
                if t == m:
                    continue
                nv = row.get(t, 0) - c * v
                if nv:
                    row[t] = nv
                else:
                    row.pop(t, None)
        return Expr(out)


def bianchi_reduce(e: Expr, extra: Iterable[Expr] = ()) -> Expr:
    """Normal form modulo cyclic/Bianchi/commutation identities (curvature only)."""
    r = Reducer(prepare=lambda x: contract_metric(weyl_expand(x)))
    for rel in extra:
        r.add_relation(rel)
    return r.reduce(e)


def normal_form(e: Expr, extra: Iterable[Expr] = ()) -> Expr:
    """Full normal form of a local expression: Weyl/Einstein expanded, spin
    curvature expanded, Clifford words reduced, identities applied."""
    from pointsplit.clifford import clifford_prepare
    r = Reducer(prepare=clifford_prepare)
    for rel in extra:
        r.add_relation(rel)
    for rel in dimension_identities(e):
        r.add_relation(rel)
    return r.reduce(e)


def is_zero(e: Expr, extra: Iterable[Expr] = ()) -> bool:
    return normal_form(e, extra).is_zero()


# ---------------------------------------------------------------- four-dimensional identities


@lru_cache(maxsize=None)
def lanczos_identity(mu: Index, nu: Index) -> Expr:
    """delta^{mu a b c d}_{nu e f g h} R^{ef}_{ab} R^{gh}_{cd} = 0 in four dimensions."""
    ups = [Index(mu.name, True)] + [Index(n, True) for n in ("_qa", "_qb", "_qc", "_qd")]
    lows = [Index(nu.name, False)] + [Index(n, False) for n in ("_qe", "_qf", "_qg", "_qh")]
    curv = (riemann(Index("_qe", True), Index("_qf", True), Index("_qa", False), Index("_qb", False))
            * riemann(Index("_qg", True), Index("_qh", True), Index("_qc", False),
                      Index("_qd", False)))
    acc = []
    for perm in permutations(range(5)):
        t = curv
        for i, j in enumerate(perm):
            t = t * metric(ups[i], lows[j])
        acc.append(contract_metric(t) * _perm_sign(perm))
    return _fix_variance(Expr.sum(acc), mu, nu)


def _rename_free(e: Expr, mapping: dict[str, str]) -> Expr:
    from pointsplit.expr import rename_term
    return Expr.sum(Expr.from_term(rename_term(t, mapping), c) for t, c in e.items())


def _fix_variance(e: Expr, mu: Index, nu: Index) -> Expr:
    out = e
    for target in (mu, nu):
        cur = None
        for i in out.free_indices():
            if i.name == target.name:
                cur = i
        if cur is not None and cur.up != target.up:
            tmp = "_fv" + target.name
            out = _rename_free(out, {target.name: tmp})
            out = contract_metric(out * metric(target, Index(tmp, not cur.up, cur.point)))
    return out


def dimension_identities(e: Expr) -> list[Expr]:
    """Four-dimensional identities relevant to rank-2 quadratic curvature."""
    out = []
    free = e.free_indices()
    if len(free) == 2 and all(i.point == "x" for i in free):
        has_rr = any(sum(1 for f in t.factors if f.symbol in ("R", "Ric", "Rs", "Weyl")) >= 2
                     or t.word is not None for t in e.terms())
        if has_rr:
            out.append(lanczos_identity(free[0], free[1]))
    return out


# ---------------------------------------------------------------- local tensors


def _p(s: str) -> Expr:
    from pointsplit.parse import parse
    return parse(s)


def local_tensors(mu: str = "mu", nu: str = "nu") -> dict[str, Expr]:
    """The conserved local curvature tensors from varying the quadratic actions."""
    m, n = "_lm", "_ln"
    # quadratic parts carry the signs that make each tensor divergence-free with
    # the Riemann convention above; dummies use reserved names so any free names work
    I = _p(f"-1/2 g[{m},{n}]*Rs*Rs + 2 g[{m},{n}]*Rs[;_la;^_la] - 2 Rs[;{m};{n}]"
           f" + 2 Rs*Ric[{m},{n}]")
    J = _p(f"-1/2 g[{m},{n}]*Ric[_la,_lb]*Ric[^_la,^_lb] + 1/2 g[{m},{n}]*Rs[;_la;^_la]"
           f" - Rs[;{m};{n}] + Ric[{m},{n}][;_la;^_la] + 2 Ric[_la,_lb]*R[^_la,{m},^_lb,{n}]")
    K = _p(f"1/2 g[{m},{n}]*R[_la,_lb,_lc,_ld]*R[^_la,^_lb,^_lc,^_ld]"
           f" - 2 R[_la,_lb,_lc,{m}]*R[^_la,^_lb,^_lc,{n}]"
           f" - 4 Ric[_la,_lb]*R[^_la,{m},^_lb,{n}] + 4 Ric[_la,{m}]*Ric[^_la,{n}]"
           f" - 4 Ric[{m},{n}][;_la;^_la] + 2 Rs[;{m};{n}]")
    out = {}
    for k, v in (("I", I), ("J", J), ("K", K)):
        v = contract_metric(v)
        if (mu, nu) != (m, n):
            v = _rename_free(v, {m: mu, n: nu})
        out[k] = v
    return out


def expand_local(e: Expr) -> Expr:
    """Replace Itens/Jtens/Ktens factors by their definitions."""
    def rule(name):
        def fn(f: Factor) -> Expr:
            a, b = f.indices
            lt = local_tensors("_lp", "_lq")[name]
            lt = _fix_variance(lt, Index("_lp", a.up, a.point), Index("_lq", b.up, b.point))
            return _rename_free(lt, {"_lp": a.name, "_lq": b.name})
        return fn
    return contract_metric(expand_symbols(e, {"Itens": rule("I"), "Jtens": rule("J"),
                                              "Ktens": rule("K")}))


def check_gauss_bonnet() -> Expr:
    lt = local_tensors()
    return normal_form(lt["K"] - lt["I"] + lt["J"] * 4)


def trace(e: Expr, a: str, b: str) -> Expr:
    """g^{ab} contraction of two free down indices."""
    return contract_metric(e * metric(Index(a, True), Index(b, True)))


def divergence(e: Expr, a: str) -> Expr:
    """nabla^a e_{a...}."""
    return contract_metric(differentiate(e, Index(a, True)))


def weyl_collect(e: Expr) -> Expr:
    """Rewrite a scalar of mass dimension four in the basis C^2, R_ab^2, R^2, box R."""
    nf = normal_form(weyl_expand(e))
    riem2 = normal_form(_p("R[a,b,c,d]*R^[a,b,c,d]"))
    (rt, _), = riem2.items()
    # R_abcd^2 = C^2 + 2 R_ab^2 - R^2/3
    repl = canonicalize(_p("Weyl[a,b,c,d]*Weyl^[a,b,c,d]")) + \
        normal_form(_p("2 Ric[a,b]*Ric^[a,b] - 1/3 Rs*Rs"))
    acc = []
    for t, c in nf.items():
        if t.factors == rt.factors and t.word == rt.word and t.traced == rt.traced:
            acc.append(Expr.from_term(Term(t.scalars), c) * repl)
        else:
            acc.append(Expr.from_term(t, c))
    return Expr.sum(acc)
