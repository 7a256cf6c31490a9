"""Gamma-matrix words: anticommutation sorting, contraction, traces, the
antisymmetrized basis, spin-curvature expansion and the Dirac square."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import permutations

from pointsplit.curvature import (
    _perm_sign, contract_metric, derivative_chain, expand_symbols, fresh_name, metric,
    riemann, weyl_expand,
)
from pointsplit.expr import Expr, Factor, Index, Term, canon_term, merge_scalars

GAMMA_SYMBOLS = ("gamma", "Gam")


def gamma(ix: Index) -> Expr:
    return Expr.of(Factor("gamma", (ix,), (), ix.point))


def _is_gamma(f: Factor) -> bool:
    return f.symbol in GAMMA_SYMBOLS and not f.derivs


def _gamma_indices(f: Factor) -> tuple[Index, ...]:
    return f.indices


# ---------------------------------------------------------------- spin curvature


def spin_curvature(a: Index, b: Index, used: set[str] | None = None) -> Expr:
    """C_ab = 1/4 R_ab^rt gamma_r gamma_t."""
    used = set(used or ()) | {a.name, b.name}
    r = fresh_name(used, "_s")
    t = fresh_name(used, "_s")
    pt = a.point
    return (riemann(a, b, Index(r, True, pt), Index(t, True, pt))
            * gamma(Index(r, False, pt)) * gamma(Index(t, False, pt)) * Fraction(1, 4))


def expand_spin(e: Expr) -> Expr:
    """Replace every C_ab by its Riemann-gamma form (derivatives pushed onto R)."""
    return expand_symbols(e, {"Cspin": lambda f: spin_curvature(*f.indices)})


# ---------------------------------------------------------------- antisymmetrized basis


def _times_gamma(state: dict, b: Index) -> dict:
    """Right-multiply a combination of Gam^A (with metric bookkeeping) by gamma^b."""
    out: dict = {}
    for (A, gs), c in state.items():
        key = (A + (b,), gs)
        out[key] = out.get(key, 0) + c
        k = len(A)
        for j, a in enumerate(A):
            sign = -1 if (k - 1 - j) % 2 else 1
            key = (A[:j] + A[j + 1:], gs + ((a, b),))
            out[key] = out.get(key, 0) + c * sign
    return out


@lru_cache(maxsize=1 << 16)
def gamma_run_basis(run: tuple[Factor, ...]) -> Expr:
    """Product of gamma/Gam factors as a sum of metric factors times Gam^A."""
    seq: list[list[tuple[Fraction, tuple[Index, ...]]]] = []
    for f in run:
        ixs = f.indices
        if f.symbol == "gamma" or len(ixs) <= 1:
            seq.append([(Fraction(1), ixs)])
        else:
            k = len(ixs)
            norm = Fraction(1, _fact(k))
            seq.append([(norm * _perm_sign(p), tuple(ixs[i] for i in p))
                        for p in permutations(range(k))])
    state: dict = {((), ()): Fraction(1)}
    for options in seq:
        new: dict = {}
        for c0, ixs in options:
            st = {k: v * c0 for k, v in state.items()}
            for b in ixs:
                st = _times_gamma(st, b)
            for k, v in st.items():
                new[k] = new.get(k, 0) + v
        state = {k: v for k, v in new.items() if v}
    acc = []
    for (A, gs), c in state.items():
        if len(A) > 4:
            continue
        e = Expr.identity(c) if not A else Expr.of(
            Factor("Gam" if len(A) > 1 else "gamma", A, (), A[0].point), c)
        for a, b in gs:
            e = metric(a, b) * e
        acc.append(e)
    return Expr.sum(acc)


def _fact(k: int) -> int:
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


def reduce_words(e: Expr) -> Expr:
    """Rewrite each maximal gamma run of every word in the antisymmetrized basis;
    traces of pure gamma words are evaluated."""
    acc = []
    for t, c in e.items():
        if not t.word:
            acc.append(Expr.from_term(t, c))
            continue
        word = t.word
        if t.traced:
            k = next((i for i, f in enumerate(word) if not _is_gamma(f)), None)
            if k is None:
                acc.append(Expr.from_term(Term(t.scalars, t.factors), c) * gamma_trace_word(word))
                continue
            word = word[k:] + word[:k]
        pieces: list[Expr] = []
        run: list[Factor] = []
        for f in word:
            if _is_gamma(f):
                run.append(f)
            else:
                if run:
                    pieces.append(gamma_run_basis(tuple(run)))
                    run = []
                pieces.append(Expr.of(f))
        if run:
            pieces.append(gamma_run_basis(tuple(run)))
        prod = Expr.from_term(Term(t.scalars, t.factors, (), False), c)
        for p in pieces:
            prod = prod * p
        if t.traced:
            prod = prod.traced()
        acc.append(prod)
    return Expr.sum(acc)


def gamma_trace_word(word: tuple[Factor, ...]) -> Expr:
    """Trace of a product of gamma/Gam factors (4 x 4 matrices)."""
    basis = gamma_run_basis(tuple(word))
    acc = []
    for t, c in basis.items():
        if t.word:  # Gam^A with |A| >= 1 is traceless
            continue
        acc.append(Expr.from_term(Term(t.scalars, t.factors), c * 4))
    return Expr.sum(acc)


def clifford_prepare(e: Expr) -> Expr:
    """Preparation pass of the full normal form."""
    e = weyl_expand(e)
    e = expand_spin(e)
    e = contract_metric(e)
    e = reduce_words(e)
    return contract_metric(e)


# ---------------------------------------------------------------- high-level operations


def _gamma_key(ix: Index) -> tuple:
    return (ix.point, ix.name, ix.up)


def clifford_sort(e: Expr) -> Expr:
    """Order adjacent gamma indices with {gamma_a, gamma_b} = 2 g_ab; adjacent
    dummy pairs collapse to 4."""
    while True:
        nxt = _sort_pass(e)
        if nxt == e:
            return e
        e = nxt


def _sort_pass(e: Expr) -> Expr:
    out = []
    work = list(e.items())
    while work:
        t, c = work.pop()
        w = t.word or ()
        hit = None
        pair = None
        for i in range(len(w) - 1):
            f, g = w[i], w[i + 1]
            if f.symbol != "gamma" or g.symbol != "gamma":
                continue
            if f.indices[0].name == g.indices[0].name:
                pair = i
                break
            if _gamma_key(f.indices[0]) > _gamma_key(g.indices[0]):
                hit = i
                break
        if pair is not None:
            # adjacent dummy pair: gamma^m gamma_m = 4
            work.append((Term(t.scalars, t.factors, w[:pair] + w[pair + 2:], t.traced), 4 * c))
            continue
        if hit is None:
            out.append(Expr.from_term(t, c))
            continue
        f, g = w[hit], w[hit + 1]
        swapped = Term(t.scalars, t.factors, w[:hit] + (g, f) + w[hit + 2:], t.traced)
        work.append((swapped, -c))
        rest = Term(t.scalars, t.factors, w[:hit] + w[hit + 2:], t.traced)
        for nt, nc in (metric(f.indices[0], g.indices[0]) * Expr.from_term(rest)).items():
            work.append((nt, 2 * c * nc))
    return contract_metric(Expr.sum(out))


def gamma_contract(e: Expr) -> Expr:
    """Remove dummy gamma pairs: gamma^m X gamma_m evaluated recursively."""
    acc = []
    for t, c in e.items():
        acc.append(_contract_word_term(t) * c)
    return contract_metric(Expr.sum(acc))


def _contract_word_term(t: Term) -> Expr:
    w = t.word or ()
    for i, f in enumerate(w):
        if f.symbol != "gamma":
            continue
        for j in range(i + 1, len(w)):
            g = w[j]
            if g.symbol == "gamma" and g.indices[0].name == f.indices[0].name:
                if not all(x.symbol == "gamma" for x in w[i + 1:j]):
                    break
                inner = w[i + 1:j]
                res = _sandwich(inner)
                acc = []
                for rt, rc in res.items():
                    nw = w[:i] + (rt.word or ()) + w[j + 1:]
                    nt = Term(merge_scalars(t.scalars, rt.scalars), t.factors + rt.factors,
                              nw, t.traced)
                    acc.append(_contract_word_term(nt) * rc)
                return Expr.sum(acc)
    return Expr.from_term(t)


def _sandwich(inner: tuple[Factor, ...]) -> Expr:
    """gamma^m Y gamma_m for a product Y of gammas (dimension four)."""
    if not inner:
        return Expr.identity(4)
    *ys, last = inner
    b = last.indices[0]
    ys = tuple(ys)
    # gamma^m Y gamma^b gamma_m = 2 gamma^b Y - (gamma^m Y gamma_m) gamma^b
    first = Expr.of(last) * _word(ys) * 2
    second = _sandwich(ys) * Expr.of(last)
    return first - second


def _word(fs: tuple[Factor, ...]) -> Expr:
    e = Expr.identity()
    for f in fs:
        e = e * Expr.of(f)
    return e


def gamma_trace(e: Expr) -> Expr:
    """Evaluate traces of gamma words; C factors are expanded first."""
    e = contract_metric(expand_spin(e))
    acc = []
    for t, c in e.items():
        if t.traced and all(_is_gamma(f) for f in t.word):
            acc.append(Expr.from_term(Term(t.scalars, t.factors), c) * _pair_trace(t.word))
        else:
            acc.append(Expr.from_term(t, c))
    return contract_metric(Expr.sum(acc))


def _pair_trace(word: tuple[Factor, ...]) -> Expr:
    """Recursive pairing expansion Tr(g1...gn) = sum_j (-1)^j g(1,j) Tr(rest)."""
    singles: list[Factor] = []
    for f in word:
        if f.symbol == "Gam" and len(f.indices) > 1:
            return gamma_trace_word(word)
        singles.append(f)
    n = len(singles)
    if n == 0:
        return Expr.number(4)
    if n % 2:
        return Expr.zero()
    a = singles[0].indices[0]
    acc = []
    for j in range(1, n):
        b = singles[j].indices[0]
        rest = tuple(singles[1:j] + singles[j + 1:])
        sign = 1 if j % 2 else -1
        acc.append(metric(a, b) * _pair_trace(rest) * sign)
    return Expr.sum(acc)


def spin_curvature_reduce(e: Expr) -> Expr:
    """Normal form with C expanded into curvature times gammas."""
    from pointsplit.curvature import normal_form
    return normal_form(e)


def dirac_square() -> Expr:
    """D'D + (box - R/4 - m^2) applied to a generic spinor; must vanish."""
    from pointsplit.curvature import normal_form
    from pointsplit.parse import parse
    dd = parse("-gamma[^a] . gamma[^b] . X[;a;b] + m^2 * X")
    p = parse("X[;c;^c] - 1/4 Rs * X - m^2 * X")
    return normal_form(dd + p)


def dirac_square_terms() -> tuple[Expr, Expr]:
    """D'D built from its operator pieces (for display) and the target -P."""
    from pointsplit.parse import parse
    psi = parse("X")
    a = Index("a", False)
    b = Index("b", False)
    d_psi = -(gamma(a.flipped()) * derivative_chain(psi, [a])) + psi * Expr.atom("m")
    dd = gamma(b.flipped()) * derivative_chain(d_psi, [b]) + d_psi * Expr.atom("m")
    return dd, -parse("X[;c;^c] - 1/4 Rs * X - m^2 * X")
