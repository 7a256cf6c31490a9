"""Numeric oracle: random polynomial metrics, explicit Dirac matrices and an
evaluator for local expressions.

Every field is carried as a truncated Taylor series (jet) around the
evaluation point x = 0, so covariant derivatives of curvature are exact up to
rounding.  Arrays of tensors are stored with all indices down; contractions
insert the inverse metric.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from pointsplit.curvature import expand_local, normal_form
from pointsplit.expr import Expr, Factor, Index, Term, make_factor
from pointsplit.parse import parse, parse_identity
from pointsplit.registry import REGISTRY

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])
PAULI = (np.array([[0, 1], [1, 0]], dtype=complex),
         np.array([[0, -1j], [1j, 0]], dtype=complex),
         np.array([[1, 0], [0, -1]], dtype=complex))


class UnrealizableSymbol(ValueError):
    pass


# ---------------------------------------------------------------- Dirac matrices


def flat_gammas() -> np.ndarray:
    """gamma_0 = i diag(I2, -I2), gamma_a = i [[0, s_a], [-s_a, 0]]; {g_a, g_b} = 2 eta_ab."""
    z = np.zeros((2, 2), dtype=complex)
    eye = np.eye(2, dtype=complex)
    g0 = 1j * np.block([[eye, z], [z, -eye]])
    rest = [1j * np.block([[z, s], [-s, z]]) for s in PAULI]
    return np.array([g0] + rest)


def beta_matrix() -> np.ndarray:
    return -1j * flat_gammas()[0]


@dataclass
class DiracMatrixSet:
    """Flat gammas, beta and the curved gamma_mu = e^a_mu gamma_a at a point."""

    vierbein: np.ndarray  # e[a, mu]
    metric: np.ndarray

    @cached_property
    def flat(self) -> np.ndarray:
        return flat_gammas()

    @cached_property
    def beta(self) -> np.ndarray:
        return beta_matrix()

    @cached_property
    def curved(self) -> np.ndarray:
        return np.einsum("am,aij->mij", self.vierbein, self.flat)

    def checks(self) -> dict[str, float]:
        """Deviations of the defining relations (all should be ~0)."""
        g, b = self.flat, self.beta
        eye = np.eye(4)
        out = {}
        anti = np.einsum("mij,njk->mnik", self.curved, self.curved)
        anti = anti + anti.transpose(1, 0, 2, 3)
        out["clifford"] = float(np.max(np.abs(anti - 2 * np.einsum("mn,ij->mnij",
                                                                      self.metric, eye))))
        out["beta_hermitian"] = float(np.max(np.abs(b.conj().T - b)))
        binv = np.linalg.inv(b)
        out["gamma_adjoint"] = max(float(np.max(np.abs(g[a].conj().T + b @ g[a] @ binv)))
                                   for a in range(4))
        out["vierbein"] = float(np.max(np.abs(
            np.einsum("am,bn,ab->mn", self.vierbein, self.vierbein, ETA) - self.metric)))
        return out

    def dirac_form_spectrum(self, n) -> np.ndarray:
        """Eigenvalues of i beta n^a gamma_a (Hermitian for real n)."""
        m = 1j * self.beta @ np.einsum("a,aij->ij", np.asarray(n, dtype=float), self.flat)
        return np.linalg.eigvalsh((m + m.conj().T) / 2)


# ---------------------------------------------------------------- jets


class Jets:
    """Truncated power series in four variables up to total degree `order`."""

    def __init__(self, order: int) -> None:
        self.order = order
        mons = [m for d in range(order + 1)
                for m in itertools.product(range(d + 1), repeat=4) if sum(m) == d]
        self.mons = mons
        self.index = {m: i for i, m in enumerate(mons)}
        self.size = len(mons)
        I, J, K = [], [], []
        for i, a in enumerate(mons):
            for j, b in enumerate(mons):
                s = tuple(x + y for x, y in zip(a, b))
                k = self.index.get(s)
                if k is not None:
                    I.append(i)
                    J.append(j)
                    K.append(k)
        self.I, self.J = np.array(I), np.array(J)
        self.collect = np.zeros((self.size, len(K)))
        self.collect[K, np.arange(len(K))] = 1.0
        self.dmat = np.zeros((4, self.size, self.size))
        for k, m in enumerate(mons):
            for mu in range(4):
                up = list(m)
                up[mu] += 1
                src = self.index.get(tuple(up))
                if src is not None:
                    self.dmat[mu, k, src] = up[mu]

    def mul(self, spec: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Series product with tensor contraction given by an einsum spec without
        the series axis, e.g. 'ab,bc->ac'."""
        ins, out = spec.split("->")
        sa, sb = ins.split(",")
        prod = np.einsum(f"p{sa},p{sb}->p{out}", a[self.I], b[self.J])
        shape = prod.shape[1:]
        return (self.collect @ prod.reshape(len(self.I), -1)).reshape((self.size,) + shape)

    def deriv(self, a: np.ndarray) -> np.ndarray:
        """Partial derivative; the new index is axis 1."""
        return np.einsum("dkl,l...->kd...", self.dmat, a)

    def constant(self, c: np.ndarray) -> np.ndarray:
        out = np.zeros((self.size,) + np.shape(c), dtype=np.result_type(c, float))
        out[0] = c
        return out

    def random(self, rng, shape=(), complex_=False) -> np.ndarray:
        a = rng.normal(size=(self.size,) + shape)
        if complex_:
            a = a + 1j * rng.normal(size=(self.size,) + shape)
        return a


# ---------------------------------------------------------------- metric samples


@dataclass
class RandomMetricSample:
    """g(x) = eta + eps h(x) with a random polynomial h, evaluated at x = 0."""

    seed: int = 0
    eps: float = 1e-2
    order: int = 4
    scalars: dict[str, complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.rng = np.random.default_rng(self.seed)
        self.jets = Jets(self.order)
        for _ in range(100):
            h = self.jets.random(self.rng, (4, 4))
            g = self.jets.constant(ETA) + self.eps * (h + h.transpose(0, 2, 1)) / 2
            ev = np.linalg.eigvalsh(g[0])
            if (ev < 0).sum() == 1 and np.min(np.abs(ev)) > 1e-6:
                break
        else:  # pragma: no cover - eps far too large
            raise ValueError("could not sample a Lorentzian metric")
        self.g = g
        base = {"m": self.rng.uniform(0.5, 1.5), "pi": np.pi, "c": self.rng.uniform(-1, 1),
                "gE": np.euler_gamma, "lam": self.rng.uniform(0.5, 2), "lamp":
                self.rng.uniform(0.5, 2)}
        base.update(self.scalars)
        self.scalars = base
        J = self.jets
        self.fields = {
            "f": J.random(self.rng),
            "v": J.random(self.rng, (4,)),
            "T": J.random(self.rng, (4, 4)),
            "M": J.random(self.rng, (4, 4), complex_=True),
            "N": J.random(self.rng, (4, 4), complex_=True),
        }
        self._cache: dict[tuple[str, int], np.ndarray] = {}

    # geometry ---------------------------------------------------------
    @cached_property
    def ginv(self) -> np.ndarray:
        J = self.jets
        x = J.constant(np.linalg.inv(self.g[0]))
        two = J.constant(2 * np.eye(4))
        for _ in range(self.order.bit_length() + 2):
            x = J.mul("ab,bc->ac", x, two - J.mul("ab,bc->ac", self.g, x))
        return x

    @cached_property
    def christoffel(self) -> np.ndarray:
        """Gamma[a, b, c] = Gamma^a_bc."""
        dg = self.jets.deriv(self.g)  # dg[c, a, b] = d_c g_ab
        low = 0.5 * (dg.transpose(0, 2, 1, 3) + dg.transpose(0, 2, 3, 1) - dg.transpose(0, 1, 2, 3))
        # low[d, b, c] = 1/2 (d_b g_dc + d_c g_db - d_d g_bc)
        return self.jets.mul("ad,dbc->abc", self.ginv, low)

    @cached_property
    def riemann_up(self) -> np.ndarray:
        """R^a_bcd = d_c G^a_bd - d_d G^a_bc + G^a_ec G^e_bd - G^a_ed G^e_bc."""
        G = self.christoffel
        dG = self.jets.deriv(G)  # dG[c, a, b, d] = d_c G^a_bd
        t1 = dG.transpose(0, 2, 3, 1, 4)  # [a, b, c, d]
        quad = self.jets.mul("aec,ebd->abcd", G, G)
        return t1 - t1.transpose(0, 1, 2, 4, 3) + quad - quad.transpose(0, 1, 2, 4, 3)

    @cached_property
    def riemann(self) -> np.ndarray:
        return self.jets.mul("ae,ebcd->abcd", self.g, self.riemann_up)

    @cached_property
    def ricci(self) -> np.ndarray:
        """R_ab = R_a^l_bl."""
        return self.jets.mul("ml,ambl->ab", self.ginv, self.riemann)

    @cached_property
    def scalar_curvature(self) -> np.ndarray:
        return self.jets.mul("ab,ab->", self.ginv, self.ricci)

    @cached_property
    def einstein(self) -> np.ndarray:
        return self.ricci - 0.5 * self.jets.mul("ab,->ab", self.g, self.scalar_curvature)

    @cached_property
    def weyl(self) -> np.ndarray:
        J = self.jets
        g, ric, rs = self.g, self.ricci, self.scalar_curvature
        gric = J.mul("ac,bd->abcd", g, ric)  # g_ac R_bd
        # g_ac R_bd - g_ad R_bc - g_bc R_ad + g_bd R_ac
        ric_part = (gric - gric.transpose(0, 1, 2, 4, 3) - gric.transpose(0, 2, 1, 3, 4)
                    + gric.transpose(0, 2, 1, 4, 3))
        gg = J.mul("ac,bd->abcd", g, g)
        gg = gg - gg.transpose(0, 1, 2, 4, 3)
        return self.riemann - 0.5 * ric_part + J.mul("abcd,->abcd", gg, rs) / 6

    @cached_property
    def vierbein(self) -> np.ndarray:
        """e[a, mu] with e^T eta e = g: e = sqrt(eta g) by the binomial series."""
        J = self.jets
        X = J.mul("ab,bc->ac", J.constant(ETA), self.g) - J.constant(np.eye(4))
        term = J.constant(np.eye(4))
        total = term.copy()
        coeff = 1.0
        for k in range(1, 400):
            coeff *= (0.5 - (k - 1)) / k
            term = J.mul("ab,bc->ac", term, X)
            step = coeff * term
            total = total + step
            if np.max(np.abs(step)) < 1e-18:
                break
        return total

    @cached_property
    def gammas(self) -> np.ndarray:
        """gamma_mu(x) = e^a_mu gamma_a, shape (series, mu, 4, 4)."""
        flat = flat_gammas()
        return np.einsum("kam,aij->kmij", self.vierbein, flat)

    @cached_property
    def spin_connection(self) -> np.ndarray:
        """Omega_mu = -1/4 gamma^nu (Gamma^l_mu nu gamma_l - d_mu gamma_nu), which makes
        the gammas covariantly constant."""
        J = self.jets
        gam = self.gammas
        inner = J.mul("lmn,lij->mnij", self.christoffel, gam) - J.deriv(gam)
        gup = J.mul("nr,rij->nij", self.ginv, gam)
        return -0.25 * J.mul("nij,mnjk->mik", gup, inner)

    @cached_property
    def curvature_scale(self) -> float:
        """Largest Riemann component at the point; the floor for relative deviations."""
        return float(np.max(np.abs(self.riemann[0])))

    def dirac(self) -> DiracMatrixSet:
        return DiracMatrixSet(self.vierbein[0].real, self.g[0])

    # covariant derivatives ----------------------------------------------
    def covariant(self, a: np.ndarray, rank: int, matrix: bool) -> np.ndarray:
        """nabla of a series array with `rank` lower tensor indices (then a 4x4 spinor
        matrix block when `matrix`); the derivative index becomes axis 1."""
        J = self.jets
        out = J.deriv(a)
        G = self.christoffel
        for s in range(rank):
            moved = np.moveaxis(a, 1 + s, -1)  # [k, ..., slot]
            # Gamma^e_{d i} T_{.. e ..}
            shape = moved.shape
            flat = moved.reshape(shape[0], -1, 4)
            c = J.mul("edi,xe->dxi", G, flat)
            c = c.reshape((J.size, 4) + shape[1:-1] + (4,))
            out = out - np.moveaxis(c, -1, 2 + s)
        if matrix:
            om = self.spin_connection
            shape = a.shape
            flat = a.reshape(shape[0], -1, 4, 4)
            left = J.mul("dij,xjk->dxik", om, flat)
            right = J.mul("xij,djk->dxik", flat, om)
            out = out + (left - right).reshape((J.size, 4) + shape[1:])
        return out

    def _base(self, symbol: str) -> tuple[np.ndarray, int, bool]:
        tables = {"R": (lambda: self.riemann, 4), "Ric": (lambda: self.ricci, 2),
                  "Rs": (lambda: self.scalar_curvature, 0), "Weyl": (lambda: self.weyl, 4),
                  "G": (lambda: self.einstein, 2)}
        if symbol in tables:
            fn, rank = tables[symbol]
            return fn(), rank, False
        if symbol in ("f", "v", "T"):
            return self.fields[symbol], {"f": 0, "v": 1, "T": 2}[symbol], False
        if symbol in ("M", "N"):
            return self.fields[symbol], 0, True
        raise UnrealizableSymbol(symbol)

    def jet(self, symbol: str, nder: int) -> np.ndarray:
        """Value at x = 0 of nabla_{d1} ... nabla_{dn} S with axes (d1, ..., dn, own...)."""
        key = (symbol, nder)
        if key in self._cache:
            return self._cache[key]
        if nder > self.order - 2:
            raise UnrealizableSymbol(f"{symbol} with {nder} derivatives needs a higher jet order")
        if symbol == "Cspin":
            r = self.jet("R", nder)
            gu = np.einsum("rs,sij->rij", np.linalg.inv(self.g[0]), self.gammas[0])
            val = 0.25 * np.einsum("...abrt,rij,tjk->...abik", r, gu, gu)
            self._cache[key] = val
            return val
        arr, rank, matrix = self._base(symbol)
        for k in range(nder):
            arr = self.covariant(arr, rank + k, matrix)
        val = arr[0]
        self._cache[key] = val
        return val


# ---------------------------------------------------------------- evaluation


def _antisym_gamma(gs: list[np.ndarray]) -> np.ndarray:
    from pointsplit.wick import permutation_sign
    k = len(gs)
    acc = np.zeros((4,) * k + (4, 4), dtype=complex)
    for perm in itertools.permutations(range(k)):
        sub = "".join(chr(ord("a") + p) for p in perm)
        prod = gs[0]
        spec = "a"
        for i in range(1, k):
            letter = chr(ord("a") + i)
            prod = np.einsum(f"{spec}ij,{letter}jk->{spec}{letter}ik", prod, gs[i])
            spec += letter
        acc += permutation_sign(perm) * np.transpose(prod, [sub.index(chr(ord("a") + i))
                                                            for i in range(k)] + [k, k + 1])
    return acc / math.factorial(k)


def factor_array(f: Factor, s: RandomMetricSample) -> np.ndarray:
    """All-lower array of a factor, axes (own indices, derivative indices)."""
    decl = REGISTRY.get(f.symbol)
    if f.at != "x" or any(i.point != "x" for i in f.all_indices()):
        raise UnrealizableSymbol(f"{f.symbol} is not a local object at x")
    n = len(f.derivs)
    if f.symbol == "g":
        arr = s.g[0] if n == 0 else np.zeros((4,) * (2 + n))
        return arr
    if f.symbol in ("gamma", "Gam"):
        k = len(f.indices)
        gam = s.gammas[0]
        if k == 0:
            base = np.eye(4, dtype=complex)
        elif k == 1:
            base = gam
        else:
            base = _antisym_gamma([gam] * k)
        if n:
            return np.zeros((4,) * (k + n) + (4, 4), dtype=complex)
        return base
    if f.symbol == "beta":
        return beta_matrix() if n == 0 else np.zeros((4,) * n + (4, 4), dtype=complex)
    if decl.kind not in ("local",):
        raise UnrealizableSymbol(f.symbol)
    val = s.jet(f.symbol, n)
    rank = len(f.indices)
    # jet axes: (d1..dn, own..., [matrix]); reorder to (own..., d1..dn, [matrix])
    extra = 2 if decl.matrix else 0
    perm = list(range(n, n + rank)) + list(range(n)) + list(range(n + rank, n + rank + extra))
    return np.transpose(val, perm)


def _term_value(t: Term, s: RandomMetricSample, free: list[Index]) -> np.ndarray:
    ops: list = []
    labels: dict[str, list[int]] = {}
    counter = itertools.count()

    def index_labels(f: Factor) -> list[int]:
        out = []
        for ix in f.all_indices():
            lab = next(counter)
            labels.setdefault(ix.name, []).append((lab, ix.up))
            out.append(lab)
        return out

    for f in t.factors:
        ops += [factor_array(f, s), index_labels(f)]
    if t.word is not None:
        start = next(counter)
        cur = start
        if not t.word:
            nxt = next(counter)
            ops += [np.eye(4, dtype=complex), [cur, nxt]]
            cur = nxt
        for f in t.word:
            nxt = next(counter)
            ops += [factor_array(f, s), index_labels(f) + [cur, nxt]]
            cur = nxt
        if t.traced:
            ops += [np.eye(4), [cur, start]]
            mat_out = []
        else:
            mat_out = [start, cur]
    else:
        mat_out = []
    ginv = np.linalg.inv(s.g[0])
    out_labels = []
    for name, occ in labels.items():
        if len(occ) == 2:
            ops += [ginv, [occ[0][0], occ[1][0]]]
        elif len(occ) != 1:
            raise ValueError(f"index {name} occurs {len(occ)} times")
    for ix in free:
        lab, up = labels[ix.name][0]
        if up:
            new = next(counter)
            ops += [ginv, [lab, new]]
            out_labels.append(new)
        else:
            out_labels.append(lab)
    coeff = 1.0 + 0j
    for name, e in t.scalars:
        if name not in s.scalars:
            raise UnrealizableSymbol(name)
        coeff *= s.scalars[name] ** e
    if not ops:
        return np.asarray(coeff)
    return coeff * np.einsum(*ops, out_labels + mat_out, optimize=True)


def evaluate(e: Expr, s: RandomMetricSample) -> tuple[np.ndarray, float]:
    """Value of e at the sample point and the largest single-term magnitude."""
    if any(sym in ("Itens", "Jtens", "Ktens") for sym in e.symbols()):
        e = expand_local(e)
    free = None
    total = None
    scale = 0.0
    for t, c in e.items():
        fr = sorted(t.free_indices(), key=lambda i: i.name)
        if free is None:
            free = fr
        elif [i.name for i in fr] != [i.name for i in free]:
            raise ValueError("terms carry different free indices")
        v = _term_value(t, s, fr) * float(c)
        scale = max(scale, float(np.max(np.abs(v), initial=0.0)))
        total = v if total is None else total + v
    if total is None:
        return np.asarray(0.0), 0.0
    return total, scale


def eval_expr(e: Expr, s: RandomMetricSample) -> np.ndarray:
    return evaluate(e, s)[0]


@dataclass
class IdentityReport:
    name: str
    deviation: float
    seeds: list[int]
    tol: float

    @property
    def ok(self) -> bool:
        return self.deviation <= self.tol


def verify_identity(lhs: Expr | str, rhs: Expr | str, trials: int = 3, seed: int = 0,
                    tol: float = 1e-12, eps: float = 1e-2, name: str = "") -> IdentityReport:
    """Max over trials of |lhs - rhs| relative to the largest term magnitude (floored
    at the curvature scale, so identities with a vanishing side are not divided by
    rounding noise)."""
    lhs = parse(lhs) if isinstance(lhs, str) else lhs
    rhs = parse(rhs) if isinstance(rhs, str) else rhs
    worst = 0.0
    seeds = [seed + k for k in range(trials)]
    for sd in seeds:
        s = RandomMetricSample(sd, eps)
        a, sa = evaluate(lhs, s)
        b, sb = evaluate(rhs, s)
        scale = max(sa, sb, s.curvature_scale)
        worst = max(worst, float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))
                    / scale)
    return IdentityReport(name, worst, seeds, tol)


def verify_file(text: str, trials: int = 3, seed: int = 0, tol: float = 1e-12
                ) -> list[IdentityReport]:
    """One identity per non-empty, non-comment line, sides separated by '=='."""
    out = []
    for k, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        lhs, rhs = parse_identity(line)
        out.append(verify_identity(lhs, rhs, trials, seed, tol, name=f"line {k}: {line}"))
    return out


# ---------------------------------------------------------------- identity catalogue

IDENTITY_CATALOGUE = [
    ("Riemann pair symmetry", "R[a,b,c,d]", "R[c,d,a,b]"),
    ("first Bianchi", "R[a,b,c,d] + R[a,d,b,c] + R[a,c,d,b]", "0"),
    ("contracted Bianchi", "Ric[a,b][;^a]", "1/2 Rs[;b]"),
    ("Weyl square", "Weyl[a,b,c,d]*Weyl[^a,^b,^c,^d]",
     "R[a,b,c,d]*R[^a,^b,^c,^d] - 2 Ric[a,b]*Ric[^a,^b] + 1/3 Rs*Rs"),
    ("Weyl traceless", "Weyl[a,b,^a,d]", "0"),
    ("covector commutator", "v[a][;b;c] - v[a][;c;b]", "R[a,^l,b,c]*v[l]"),
    ("anticommutator", "gamma[a] . gamma[b] + gamma[b] . gamma[a]", "2 g[a,b] * Id"),
    ("trace of two", "Tr(gamma[a] . gamma[b])", "4 g[a,b]"),
    ("trace of four", "Tr(gamma[a] . gamma[b] . gamma[c] . gamma[d])",
     "4 g[a,b]*g[c,d] - 4 g[a,c]*g[b,d] + 4 g[a,d]*g[b,c]"),
    ("trace of three", "Tr(gamma[a] . gamma[b] . gamma[c])", "0"),
    ("trace of Gam Gam gamma gamma", "Tr(Gam[a,b] . Gam[c,d] . gamma[e] . gamma[f])",
     "4 g[a,f]*g[b,c]*g[d,e] - 4 g[a,f]*g[b,d]*g[c,e] - 4 g[b,f]*g[a,c]*g[d,e]"
     " + 4 g[b,f]*g[a,d]*g[c,e] + 4 g[a,e]*g[b,d]*g[c,f] - 4 g[a,e]*g[b,c]*g[d,f]"
     " - 4 g[b,e]*g[a,d]*g[c,f] + 4 g[b,e]*g[a,c]*g[d,f] + 4 g[a,d]*g[b,c]*g[e,f]"
     " - 4 g[a,c]*g[b,d]*g[e,f]"),
    ("contraction one", "gamma[^m] . gamma[m]", "4 Id"),
    ("contraction two", "gamma[^m] . gamma[a] . gamma[m]", "-2 gamma[a]"),
    ("contraction three", "gamma[^m] . gamma[a] . gamma[b] . gamma[m]", "4 g[a,b] * Id"),
    ("contraction four", "gamma[^m] . gamma[a] . gamma[b] . gamma[c] . gamma[m]",
     "-2 gamma[c] . gamma[b] . gamma[a]"),
    ("contraction five", "gamma[^m] . gamma[a] . gamma[b] . gamma[c] . gamma[d] . gamma[m]",
     "2 gamma[d] . gamma[a] . gamma[b] . gamma[c] + 2 gamma[c] . gamma[b] . gamma[a] . gamma[d]"),
    ("gamma C", "gamma[^a] . Cspin[a,b]", "1/2 Ric[b,c] * gamma[^c]"),
    ("C gamma", "Cspin[a,b] . gamma[^b]", "1/2 Ric[a,c] * gamma[^c]"),
    ("C commutator", "Cspin[a,b] . gamma[c] - gamma[c] . Cspin[a,b]",
     "R[a,b,r,c] * gamma[^r]"),
    ("trace C gamma gamma", "Tr(Cspin[a,b] . gamma[c] . gamma[d])", "-2 R[a,b,c,d]"),
    ("double divergence of C", "Cspin[a,b][;^a;^b]", "0"),
    ("trace CC", "Tr(Cspin[a,b] . Cspin[^a,^b])", "-1/2 R[a,b,c,d]*R[^a,^b,^c,^d]"),
    ("trace CC gamma gamma", "Tr(Cspin[a,b] . Cspin[^a,^b] . gamma[r] . gamma[t])",
     "Tr(Cspin[a,b] . Cspin[^a,^b]) * g[r,t]"),
    ("spinor commutator", "M[;a;b] - M[;b;a]", "Cspin[a,b] . M - M . Cspin[a,b]"),
    ("Gauss-Bonnet", "Ktens[a,b]", "Itens[a,b] - 4 Jtens[a,b]"),
    ("I - 3J traceless", "Itens[a,^a] - 3 Jtens[a,^a]", "0"),
]

NEGATIVE_CONTROLS = [
    ("first Bianchi with 1/4", "R[a,b,c,d] + 1/4 R[a,d,b,c] + R[a,c,d,b]", "0"),
    ("trace of two times 3", "Tr(gamma[a] . gamma[b])", "3 g[a,b]"),
    ("anticommutator sign", "gamma[a] . gamma[b] + gamma[b] . gamma[a]", "-2 g[a,b] * Id"),
    ("gamma C with 1/4", "gamma[^a] . Cspin[a,b]", "1/4 Ric[b,c] * gamma[^c]"),
    ("trace CC sign", "Tr(Cspin[a,b] . Cspin[^a,^b])", "1/2 R[a,b,c,d]*R[^a,^b,^c,^d]"),
    ("contraction two sign", "gamma[^m] . gamma[a] . gamma[m]", "2 gamma[a]"),
    ("Weyl square Ricci coefficient", "Weyl[a,b,c,d]*Weyl[^a,^b,^c,^d]",
     "R[a,b,c,d]*R[^a,^b,^c,^d] - Ric[a,b]*Ric[^a,^b] + 1/3 Rs*Rs"),
    ("spinor commutator sign", "M[;a;b] - M[;b;a]", "M . Cspin[a,b] - Cspin[a,b] . M"),
]


@dataclass
class DualCheck:
    name: str
    symbolic_zero: bool
    numeric: IdentityReport

    @property
    def holds(self) -> bool:
        return self.symbolic_zero and self.numeric.ok

    @property
    def refuted(self) -> bool:
        return not self.symbolic_zero and not self.numeric.ok


def dual_check(name: str, lhs: str, rhs: str, trials: int = 2, seed: int = 0,
               tol: float = 1e-12) -> DualCheck:
    """Symbolic normal form of lhs - rhs and the explicit-matrix oracle, separately."""
    le, re_ = parse(lhs), parse(rhs)
    sym = normal_form(expand_local(le) - expand_local(re_)).is_zero()
    return DualCheck(name, sym, verify_identity(le, re_, trials, seed, tol, name=name))


def clifford_suite(trials: int = 2, seed: int = 0) -> dict[str, list[DualCheck]]:
    return {"identities": [dual_check(*row, trials=trials, seed=seed)
                           for row in IDENTITY_CATALOGUE],
            "controls": [dual_check(*row, trials=trials, seed=seed)
                         for row in NEGATIVE_CONTROLS]}


# ---------------------------------------------------------------- random expressions

_TENSORS = [("R", 4), ("Ric", 2), ("Rs", 0), ("Weyl", 4), ("g", 2), ("f", 0), ("v", 1),
            ("T", 2)]
_MATRICES = [("gamma", 1), ("Gam", 2), ("Gam", 3), ("Cspin", 2), ("M", 0), ("N", 0),
             ("beta", 0)]


def random_term(rng, free: tuple[Index, ...], matrix: bool, traced: bool,
                max_factors: int = 3, max_derivs: int = 2) -> Term:
    """A well-formed monomial: random factors, random derivative slots, dummies
    paired at random, the given free indices placed in random slots."""
    while True:
        nf = int(rng.integers(1, max_factors + 1))
        specs = []
        budget = max_derivs
        for _ in range(nf):
            sym, rank = _TENSORS[int(rng.integers(len(_TENSORS)))]
            nd = 0 if sym == "g" else int(rng.integers(0, budget + 1))
            budget -= nd
            specs.append((sym, rank, nd, False))
        if matrix or traced:
            for _ in range(int(rng.integers(1, 4))):
                sym, rank = _MATRICES[int(rng.integers(len(_MATRICES)))]
                nd = int(rng.integers(0, budget + 1)) if sym in ("M", "N", "Cspin") else 0
                budget -= nd
                specs.append((sym, rank, nd, True))
        slots = sum(r + d for _s, r, d, _m in specs)
        if slots >= len(free) and (slots - len(free)) % 2 == 0:
            break
    order = rng.permutation(slots)
    names: list[Index | None] = [None] * slots
    for ix, pos in zip(free, order[:len(free)]):
        names[pos] = ix
    rest = list(order[len(free):])
    for k in range(0, len(rest), 2):
        up = bool(rng.integers(2))
        names[rest[k]] = Index(f"d{k}", up)
        names[rest[k + 1]] = Index(f"d{k}", not up)
    it = iter(names)
    factors, word = [], []
    for sym, rank, nd, is_mat in specs:
        own = tuple(next(it) for _ in range(rank))
        der = tuple(next(it) for _ in range(nd))
        f = make_factor(sym, own, der)
        (word if is_mat else factors).append(f)
    scalars = tuple(sorted({("m", int(rng.integers(1, 3)))} if rng.integers(3) == 0 else ()))
    if matrix or traced:
        return Term(scalars, tuple(factors), tuple(word), traced)
    return Term(scalars, tuple(factors), None, False)


def random_expr(rng, nterms: int | None = None) -> Expr:
    """Sum of random monomials sharing free indices and matrix character."""
    nfree = int(rng.integers(0, 3))
    free = tuple(Index(n, bool(rng.integers(2))) for n in ("a", "b")[:nfree])
    kind = int(rng.integers(3))
    matrix, traced = kind == 1, kind == 2
    acc = Expr.zero()
    for _ in range(nterms or int(rng.integers(1, 4))):
        t = random_term(rng, free, matrix, traced)
        c = int(rng.integers(-5, 6)) or 1
        acc = acc + Expr.from_term(t, c)
    return acc
