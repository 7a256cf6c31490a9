"""Plain, LaTeX and JSON renderings of expressions."""

from __future__ import annotations

import json
from fractions import Fraction

from pointsplit.expr import Expr, Factor, Index, Term
from pointsplit.registry import BITENSOR, CONST, METRIC, REGISTRY

GREEK = {
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa",
    "lambda", "mu", "nu", "xi", "pi", "rho", "sigma", "tau", "upsilon", "phi", "chi", "psi",
    "omega",
}

ATOM_LATEX = {
    "m": "m", "pi": r"\pi", "gE": r"\gamma_E", "lam": r"\lambda", "lamp": r"\lambda'",
    "c": "c",
}


# ---------------------------------------------------------------- plain

def index_plain(ix: Index) -> str:
    return ("^" if ix.up else "") + ix.name + ("'" if ix.point == "y" else "")


def _located(f: Factor) -> bool:
    kind = REGISTRY.get(f.symbol).kind
    return kind not in (BITENSOR, METRIC, CONST) and f.at == "y" and not f.indices


def factor_plain(f: Factor) -> str:
    s = f.symbol + ("'" if _located(f) else "")
    if f.indices:
        s += "[" + ",".join(index_plain(i) for i in f.indices) + "]"
    if f.derivs:
        s += "[;" + ";".join(index_plain(i) for i in f.derivs) + "]"
    return s


def atom_plain(name: str, e: int) -> str:
    return name if e == 1 else f"{name}^{e}"


def term_body_plain(t: Term) -> str:
    parts = [atom_plain(n, e) for n, e in t.scalars]
    parts += [factor_plain(f) for f in t.factors]
    if t.word is not None:
        w = " . ".join(factor_plain(f) for f in t.word) if t.word else "Id"
        parts.append(f"Tr({w})" if t.traced else w)
    return " * ".join(parts)


def _coeff_plain(c: Fraction) -> str:
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def term_plain(t: Term, c: Fraction) -> str:
    body = term_body_plain(t)
    if not body:
        return _coeff_plain(c)
    if c == 1:
        return body
    if c == -1:
        return "-" + body
    return _coeff_plain(c) + " " + body


def sorted_items(e: Expr) -> list[tuple[Term, Fraction]]:
    return sorted(e.items(), key=lambda tc: (tc[0].word is not None, len(tc[0].factors),
                                             term_body_plain(tc[0])))


def to_plain(e: Expr) -> str:
    if e.is_zero():
        return "0"
    out = ""
    for t, c in sorted_items(e):
        s = term_plain(t, c)
        if not out:
            out = s
        elif s.startswith("-"):
            out += " - " + s[1:]
        else:
            out += " + " + s
    return out


# ---------------------------------------------------------------- latex

def _name_latex(name: str) -> str:
    if name.startswith("_"):
        return "a_{" + name[1:] + "}"
    return "\\" + name if name in GREEK else name


def _indices_latex(ixs: tuple[Index, ...], derivs: tuple[Index, ...]) -> str:
    slots = [(i.up, _name_latex(i.name) + ("'" if i.point == "y" else "")) for i in ixs]
    dslots = [(i.up, ";" + _name_latex(i.name) + ("'" if i.point == "y" else ""))
              for i in derivs]
    out = ""
    run_up = None
    buf = ""
    for up, s in slots + dslots:
        if run_up is None or up == run_up:
            buf += s
        else:
            out += ("^{" if run_up else "_{") + buf + "}{}"
            buf = s
        run_up = up
    if buf:
        out += ("^{" if run_up else "_{") + buf + "}"
    return out


def factor_latex(f: Factor) -> str:
    decl = REGISTRY.get(f.symbol)
    head = decl.latex or f.symbol
    if decl.kind == "limit":
        inner = REGISTRY.get(decl.base).latex or decl.base
        head = "[" + inner + (_indices_latex((), f.indices) if f.indices else "") + "]"
        return head + (_indices_latex((), f.derivs) if f.derivs else "")
    s = head
    if f.indices or f.derivs:
        s += _indices_latex(f.indices, f.derivs)
    if _located(f):
        s += "(y)"
    return s


def to_latex(e: Expr) -> str:
    if e.is_zero():
        return "0"
    out = ""
    for t, c in sorted_items(e):
        parts = []
        for n, ex in t.scalars:
            base = ATOM_LATEX.get(n, r"\ln " + n[3:-1] if n.startswith("ln(") else n)
            parts.append(base if ex == 1 else f"{base}^{{{ex}}}")
        parts += [factor_latex(f) for f in t.factors]
        if t.word is not None:
            w = " ".join(factor_latex(f) for f in t.word) if t.word else r"\mathbb{1}"
            parts.append(r"\mathrm{Tr}\left(" + w + r"\right)" if t.traced else w)
        body = r"\,".join(parts)
        mag = abs(c)
        if mag.denominator == 1:
            cs = str(mag.numerator)
        else:
            cs = rf"\frac{{{mag.numerator}}}{{{mag.denominator}}}"
        if body and mag == 1:
            s = body
        elif body:
            s = cs + r"\," + body
        else:
            s = cs
        if not out:
            out = ("-" if c < 0 else "") + s
        else:
            out += (" - " if c < 0 else " + ") + s
    return out


# ---------------------------------------------------------------- json

def _ix_json(ix: Index) -> list:
    return [ix.name, ix.up, ix.point]


def _factor_json(f: Factor) -> dict:
    return {"symbol": f.symbol, "indices": [_ix_json(i) for i in f.indices],
            "derivs": [_ix_json(i) for i in f.derivs], "at": f.at}


def expr_to_data(e: Expr) -> dict:
    terms = []
    for t, c in sorted_items(e):
        terms.append({
            "coeff": _coeff_plain(c),
            "scalars": [[n, x] for n, x in t.scalars],
            "factors": [_factor_json(f) for f in t.factors],
            "word": None if t.word is None else [_factor_json(f) for f in t.word],
            "traced": t.traced,
        })
    return {"format": "pointsplit-expr", "version": 1, "terms": terms}


def to_json(e: Expr) -> str:
    return json.dumps(expr_to_data(e), sort_keys=True)


def _ix_from(d: list) -> Index:
    return Index(d[0], bool(d[1]), d[2])


def _factor_from(d: dict) -> Factor:
    return Factor(d["symbol"], tuple(_ix_from(i) for i in d["indices"]),
                  tuple(_ix_from(i) for i in d["derivs"]), d["at"])


def expr_from_data(data: dict) -> Expr:
    acc: dict[Term, Fraction] = {}
    for tj in data["terms"]:
        word = tj["word"]
        t = Term(tuple((n, int(x)) for n, x in tj["scalars"]),
                 tuple(_factor_from(f) for f in tj["factors"]),
                 None if word is None else tuple(_factor_from(f) for f in word),
                 bool(tj["traced"]))
        acc[t] = acc.get(t, 0) + Fraction(tj["coeff"])
    return Expr(acc)


def from_json(text: str) -> Expr:
    return expr_from_data(json.loads(text))


def render(e: Expr, fmt: str = "plain") -> str:
    if fmt == "plain":
        return to_plain(e)
    if fmt == "latex":
        return to_latex(e)
    if fmt == "json":
        return to_json(e)
    raise ValueError(f"unknown format {fmt!r}")
