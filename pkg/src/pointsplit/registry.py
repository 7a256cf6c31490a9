"""Symbol registry: index signatures, monoterm symmetry groups, point data."""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from functools import lru_cache

Perm = tuple[int, ...]
GroupElt = tuple[Perm, int]

# symbol kinds
METRIC = "metric"  # covariantly constant, contracts away
LOCAL = "local"  # single-point tensor (curvature and friends)
BITENSOR = "bitensor"  # two-point object, carries derivatives at x and y
LIMIT = "limit"  # opaque coincidence limit of a bitensor, local at x
CONST = "const"  # covariantly constant matrix (gamma, beta, Gam)
STATE = "state"  # formal state-dependent scalar


@dataclass(frozen=True)
class SymbolDecl:
    name: str
    rank: int | None  # None: variadic
    kind: str
    matrix: bool = False
    generators: tuple[GroupElt, ...] = ()
    antisymmetric: bool = False  # totally antisymmetric (variadic Gam)
    slots: tuple[str, ...] = ()  # point tag per slot for bitensors
    sides: tuple[str, str] = ("x", "x")  # spinor points of a matrix symbol
    base: str = ""  # for limit symbols: the bitensor they are a limit of
    latex: str = ""


def _closure(n: int, gens: tuple[GroupElt, ...]) -> tuple[GroupElt, ...]:
    ident: Perm = tuple(range(n))
    elts: dict[Perm, int] = {ident: 1}
    frontier = [ident]
    while frontier:
        nxt = []
        for p in frontier:
            s = elts[p]
            for g, gs in gens:
                q = tuple(p[g[i]] for i in range(n))
                if q not in elts:
                    elts[q] = s * gs
                    nxt.append(q)
                elif elts[q] != s * gs:
                    # group contains -1: every component vanishes
                    elts[q] = 0
        frontier = nxt
    return tuple(sorted(elts.items()))


@lru_cache(maxsize=None)
def _antisym_group(n: int) -> tuple[GroupElt, ...]:
    out = []
    for p in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if p[i] > p[j])
        out.append((p, -1 if inv % 2 else 1))
    return tuple(out)


RIEMANN_GENS: tuple[GroupElt, ...] = (
    ((1, 0, 2, 3), -1),
    ((0, 1, 3, 2), -1),
    ((2, 3, 0, 1), 1),
)
SYM2: tuple[GroupElt, ...] = (((1, 0), 1),)
ANTI2: tuple[GroupElt, ...] = (((1, 0), -1),)

BITENSOR_MATRICES = ("I", "U", "V", "V0", "V1", "V2", "Vt0", "Vt1", "W", "W0", "W1", "H",
                     "Y1", "Y2", "Z1", "Z2", "X", "Yt1")
BITENSOR_SCALARS = ("sigma", "u", "v0", "v1", "y1", "s")

ALIASES = {"delta": "g", "Id": ""}


class Registry:
    """Immutable-after-construction table of symbol declarations."""

    def __init__(self) -> None:
        self._decls: dict[str, SymbolDecl] = {}
        self._build()

    def _add(self, decl: SymbolDecl) -> None:
        self._decls[decl.name] = decl

    def _build(self) -> None:
        add = self._add
        add(SymbolDecl("g", 2, METRIC, generators=SYM2, latex="g"))
        add(SymbolDecl("R", 4, LOCAL, generators=RIEMANN_GENS, latex="R"))
        add(SymbolDecl("Ric", 2, LOCAL, generators=SYM2, latex="R"))
        add(SymbolDecl("Rs", 0, LOCAL, latex="R"))
        add(SymbolDecl("Weyl", 4, LOCAL, generators=RIEMANN_GENS, latex="C"))
        add(SymbolDecl("G", 2, LOCAL, generators=SYM2, latex="G"))
        for name in ("Itens", "Jtens", "Ktens"):
            add(SymbolDecl(name, 2, LOCAL, generators=SYM2, latex=name[0]))
        # generic local test symbols
        add(SymbolDecl("f", 0, LOCAL, latex="f"))
        add(SymbolDecl("v", 1, LOCAL, latex="v"))
        add(SymbolDecl("T", 2, LOCAL, latex="T"))
        add(SymbolDecl("M", 0, LOCAL, matrix=True, latex="M"))
        add(SymbolDecl("N", 0, LOCAL, matrix=True, latex="N"))
        add(SymbolDecl("TrDyW", 0, STATE, latex=r"\mathrm{Tr}[D'_yW]"))
        # Clifford sector
        add(SymbolDecl("gamma", 1, CONST, matrix=True, sides=("i", "i"), latex=r"\gamma"))
        add(SymbolDecl("Gam", None, CONST, matrix=True, antisymmetric=True,
                       sides=("i", "i"), latex=r"\Gamma"))
        add(SymbolDecl("beta", 0, CONST, matrix=True, latex=r"\beta"))
        add(SymbolDecl("Cspin", 2, LOCAL, matrix=True, generators=ANTI2, latex="C"))
        # two-point objects
        add(SymbolDecl("gpt", 2, BITENSOR, slots=("x", "y"), latex="g"))
        for name in BITENSOR_SCALARS:
            add(SymbolDecl(name, 0, BITENSOR, latex=r"\sigma" if name == "sigma" else name))
        for name in BITENSOR_MATRICES:
            add(SymbolDecl(name, 0, BITENSOR, matrix=True, sides=("x", "y"), latex=name))
        for base in ("gpt",) + BITENSOR_SCALARS + BITENSOR_MATRICES:
            bd = self._decls[base]
            add(SymbolDecl("lim_" + base, None, LIMIT, matrix=bd.matrix, base=base,
                           latex="[" + (bd.latex or base) + "]"))

    def __contains__(self, name: str) -> bool:
        return name in self._decls

    def get(self, name: str) -> SymbolDecl:
        try:
            return self._decls[name]
        except KeyError:
            raise KeyError(f"unknown symbol {name!r}") from None

    def names(self) -> list[str]:
        return sorted(self._decls)

    def group(self, name: str, n: int) -> tuple[GroupElt, ...]:
        """Signed symmetry group acting on the n own-index slots of a symbol."""
        return _group(self, name, n)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for name in self.names():
            h.update(repr(self._decls[name]).encode())
        return h.hexdigest()[:16]


@lru_cache(maxsize=None)
def _group(reg: Registry, name: str, n: int) -> tuple[GroupElt, ...]:
    decl = reg.get(name)
    if decl.antisymmetric:
        return _antisym_group(n)
    if decl.generators and n == decl.rank:
        return _closure(n, decl.generators)
    return ((tuple(range(n)), 1),)


REGISTRY = Registry()


def decl(name: str) -> SymbolDecl:
    return REGISTRY.get(name)


def is_matrix(name: str) -> bool:
    return REGISTRY.get(name).matrix


def limit_name(base: str) -> str:
    return "lim_" + base
