"""Fermionic Wick combinatorics on finite-dimensional test spaces.

Functionals are finite sequences of arrays over a test basis, one array per
degree.  The twist map contracts slot pairs against a kernel, the star products
are terminating exponentials of twists, and a Jordan-Wigner Fock model of the
self-dual CAR algebra serves as a brute-force oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

Pairing = tuple[tuple[int, int], ...]


def permutation_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def ordered_permutations(n: int) -> list[tuple[Pairing, int]]:
    """Pairings (1-based) with pi(2i-1) < pi(2i) and pi(2i-1) < pi(2i+1), signed by
    the parity of pi.  Odd n gives the empty list: odd moments vanish."""
    if n < 0 or n > 12:
        raise ValueError(f"n must lie in 0..12, got {n}")
    if n % 2:
        return []

    def rec(rest: tuple[int, ...]):
        if not rest:
            yield ()
            return
        first = rest[0]
        for k in range(1, len(rest)):
            for tail in rec(rest[1:k] + rest[k + 1:]):
                yield ((first, rest[k]),) + tail

    out = []
    for pairs in rec(tuple(range(1, n + 1))):
        flat = [p for pair in pairs for p in pair]
        out.append((pairs, permutation_sign(flat)))
    return out


def quasifree_npoint(w2, args) -> complex:
    """Sum over ordered pairings of signed products of the two-point kernel w2,
    a (k, k) matrix read as the bilinear form f^T w2 h."""
    w2 = np.asarray(w2)
    vecs = [np.asarray(a) for a in args]
    total = 0
    for pairs, sign in ordered_permutations(len(vecs)):
        term = sign
        for a, b in pairs:
            term = term * (vecs[a - 1] @ w2 @ vecs[b - 1])
        total = total + term
    return total


def npoint_tensor(w2, n: int) -> np.ndarray:
    """quasifree_npoint on every tuple of basis vectors, as an n-index array."""
    w2 = np.asarray(w2)
    k = w2.shape[0]
    out = np.zeros((k,) * n, dtype=complex)
    letters = "abcdefghijkl"[:n]
    for pairs, sign in ordered_permutations(n):
        spec = ",".join(letters[a - 1] + letters[b - 1] for a, b in pairs)
        out += sign * np.einsum(f"{spec}->{letters}", *([w2] * len(pairs)))
    return out


def regularized_npoint(w2, h, args) -> complex:
    """Pairing expansion with w2 - h in place of w2."""
    return quasifree_npoint(np.asarray(w2) - np.asarray(h), args)


# ---------------------------------------------------------------- functionals


def _scale(x: np.ndarray, n: int) -> np.ndarray:
    if x.dtype == object:
        return x * Fraction(1, math.factorial(n))
    return x / math.factorial(n)


def antisymmetrize(x: np.ndarray) -> np.ndarray:
    """(1/n!) sum over S_n of sign(pi) times the slot-permuted array."""
    x = np.asarray(x)
    n = x.ndim
    if n < 2:
        return x.copy()
    acc = None
    for perm in itertools.permutations(range(n)):
        term = x.transpose(perm) * permutation_sign(perm)
        acc = term if acc is None else acc + term
    return _scale(acc, n)


def is_antisymmetric(x: np.ndarray, tol: float = 0.0) -> bool:
    x = np.asarray(x)
    for i in range(x.ndim - 1):
        perm = list(range(x.ndim))
        perm[i], perm[i + 1] = perm[i + 1], perm[i]
        diff = x + x.transpose(perm)
        if x.dtype == object:
            if any(v != 0 for v in diff.flat):
                return False
        elif np.max(np.abs(diff), initial=0.0) > tol:
            return False
    return True


@dataclass
class Functional:
    """Finite sequence {F^(n)}: parts[n] is an n-index array over the basis."""

    parts: dict[int, np.ndarray] = field(default_factory=dict)

    @staticmethod
    def scalar(c, k: int | None = None) -> Functional:
        return Functional({0: np.asarray(c, dtype=complex)})

    @staticmethod
    def vector(v) -> Functional:
        return Functional({1: np.asarray(v, dtype=complex)})

    def degree(self) -> int:
        return max(self.parts, default=0)

    def __add__(self, other: Functional) -> Functional:
        out = {n: a.copy() for n, a in self.parts.items()}
        for n, a in other.parts.items():
            out[n] = out[n] + a if n in out else a.copy()
        return Functional(out)

    def __mul__(self, c) -> Functional:
        return Functional({n: a * c for n, a in self.parts.items()})

    __rmul__ = __mul__

    def __sub__(self, other: Functional) -> Functional:
        return self + other * -1

    def __neg__(self) -> Functional:
        return self * -1

    def tensor(self, other: Functional) -> Functional:
        """Unantisymmetrized F (x) G, collected by total degree."""
        out: dict[int, np.ndarray] = {}
        for p, a in self.parts.items():
            for q, b in other.parts.items():
                t = np.multiply.outer(a, b)
                out[p + q] = out[p + q] + t if p + q in out else t
        return Functional(out)

    def antisymmetrized(self) -> Functional:
        return Functional({n: antisymmetrize(a) for n, a in self.parts.items()})

    def distance(self, other: Functional) -> float:
        d = 0.0
        for n in set(self.parts) | set(other.parts):
            a = self.parts.get(n)
            b = other.parts.get(n)
            diff = a if b is None else (-b if a is None else a - b)
            d = max(d, float(np.max(np.abs(diff), initial=0.0)))
        return d

    def norm(self) -> float:
        return max((float(np.max(np.abs(a), initial=0.0)) for a in self.parts.values()),
                   default=0.0)

    def relative_distance(self, other: Functional) -> float:
        return self.distance(other) / max(1.0, self.norm(), other.norm())

    def is_even(self) -> bool:
        return all(n % 2 == 0 or not np.any(a) for n, a in self.parts.items())


def twist_array(delta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Sum over slot pairs i < j of (-1)^(j-i+1) delta contracted into slots i, j;
    the surviving slots keep their order."""
    n = x.ndim
    if n < 2:
        return x
    acc = None
    for i in range(n - 1):
        for j in range(i + 1, n):
            term = np.tensordot(x, delta, axes=([i, j], [0, 1])) * (-1) ** (j - i + 1)
            acc = term if acc is None else acc + term
    return acc


def twist(delta, F: Functional) -> Functional:
    """Gamma_delta on every degree; degrees below 2 are left unchanged, as in the
    definition, so the map is used through alpha, which only lowers degrees >= 2."""
    delta = np.asarray(delta)
    out: dict[int, np.ndarray] = {}
    for n, a in F.parts.items():
        if n < 2:
            out[n] = out[n] + a if n in out else a.copy()
        else:
            t = twist_array(delta, a)
            out[n - 2] = out[n - 2] + t if n - 2 in out else t
    return Functional(out)


def _lower(delta, F: Functional) -> Functional:
    """Gamma_delta restricted to degrees >= 2 (the part that enters exponentials)."""
    out: dict[int, np.ndarray] = {}
    for n, a in F.parts.items():
        if n >= 2:
            t = twist_array(np.asarray(delta), a)
            out[n - 2] = out[n - 2] + t if n - 2 in out else t
    return Functional(out)


def alpha(delta, F: Functional, coeff=1) -> Functional:
    """exp(coeff * Gamma_delta) F; the series terminates after deg(F)/2 steps."""
    total = Functional({n: a.copy() for n, a in F.parts.items()})
    term = F
    for m in range(1, F.degree() // 2 + 1):
        term = _lower(delta, term) * (coeff / m)
        total = total + term
    return total


def star(F: Functional, G: Functional, delta, coeff=0.5j) -> Functional:
    """A alpha(F (x) G) with alpha = exp(coeff * Gamma_delta); coeff = i/2 with the
    kernel S~ gives the star_S product."""
    return alpha(delta, F.tensor(G), coeff).antisymmetrized()


def star_s(F: Functional, G: Functional, s_tilde) -> Functional:
    return star(F, G, s_tilde, 0.5j)


def star_h(F: Functional, G: Functional, s_tilde, h) -> Functional:
    """F star_H G = alpha_H(alpha_H^-1 F star_S alpha_H^-1 G), alpha_H = exp Gamma_{h - i S~/2}."""
    d = np.asarray(h) - 0.5j * np.asarray(s_tilde)
    return alpha(d, star_s(alpha(d, F, -1), alpha(d, G, -1), s_tilde))


def _cross_twist(delta: np.ndarray, x: np.ndarray, p: int) -> np.ndarray:
    """Pairs i < p <= j only: one slot from each factor."""
    acc = None
    for i in range(p):
        for j in range(p, x.ndim):
            term = np.tensordot(x, delta, axes=([i, j], [0, 1])) * (-1) ** (j - i + 1)
            acc = term if acc is None else acc + term
    return acc


def star_cross(F: Functional, G: Functional, delta, coeff=1) -> Functional:
    """A exp(coeff * Gamma^cross_delta)(F (x) G), contracting only pairs that join
    a slot of F to a slot of G."""
    delta = np.asarray(delta)
    out = Functional()
    for p, a in F.parts.items():
        for q, b in G.parts.items():
            x = np.multiply.outer(a, b)
            total = Functional({p + q: x})
            for m in range(1, min(p, q) + 1):
                x = _cross_twist(delta, x, p - m + 1) * (coeff / m)
                total = total + Functional({p + q - 2 * m: x})
            out = out + total
    return out.antisymmetrized()


def scale_equivalence_check(F: Functional, G: Functional, s_tilde, h1, h2) -> dict:
    """F star_H2 G against alpha_d(alpha_d^-1 F star_H1 alpha_d^-1 G), d = h2 - h1."""
    d = np.asarray(h2) - np.asarray(h1)
    lhs = star_h(F, G, s_tilde, h2)
    rhs = alpha(d, star_h(alpha(d, F, -1), alpha(d, G, -1), s_tilde, h1))
    roundtrip = max(alpha(d, alpha(d, X, -1)).relative_distance(X) for X in (F, G))
    err = lhs.relative_distance(rhs)
    return {"deviation": err, "roundtrip": roundtrip, "ok": err <= 1e-12 and roundtrip <= 1e-12}


# ---------------------------------------------------------------- Fock oracle


def _jordan_wigner(modes: int) -> list[np.ndarray]:
    lower = np.array([[0, 1], [0, 0]], dtype=complex)  # |1> -> |0>
    z = np.diag([1, -1]).astype(complex)
    eye = np.eye(2, dtype=complex)
    out = []
    for j in range(modes):
        mats = [z] * j + [lower] + [eye] * (modes - j - 1)
        op = mats[0]
        for m in mats[1:]:
            op = np.kron(op, m)
        out.append(op)
    return out


@dataclass
class CarModel:
    """Self-dual CAR algebra on 2*modes test vectors: the standard basis vector j
    maps to a_j for j < modes and to a_j^* after; `frame` re-expresses the test
    basis in those coordinates.  Gamma(f + h) = conj(h) + conj(f) on the two blocks."""

    modes: int = 4
    frame: np.ndarray | None = None
    occupation: np.ndarray | None = None

    def __post_init__(self) -> None:
        k = 2 * self.modes
        self.frame = np.eye(k, dtype=complex) if self.frame is None else np.asarray(self.frame)
        a = _jordan_wigner(self.modes)
        raw = a + [m.conj().T for m in a]
        self.ops = [sum(self.frame[i, j] * raw[i] for i in range(k)) for j in range(k)]
        self.dim = 2 ** self.modes
        p = np.zeros(self.modes) if self.occupation is None else np.asarray(self.occupation)
        rho = np.array([[1.0]])
        for q in p:
            rho = np.kron(rho, np.diag([1 - q, q]))
        self.rho = rho.astype(complex)

    @staticmethod
    def random(modes: int = 4, seed: int = 0, thermal: bool = True) -> CarModel:
        rng = np.random.default_rng(seed)
        k = 2 * modes
        frame = np.eye(k) + 0.3 * (rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k)))
        occ = rng.uniform(0.05, 0.45, size=modes) if thermal else None
        return CarModel(modes, frame, occ)

    @property
    def size(self) -> int:
        return 2 * self.modes

    def field(self, f) -> np.ndarray:
        return sum(c * op for c, op in zip(np.asarray(f), self.ops))

    def conj_matrix(self) -> np.ndarray:
        """C with Gamma(e_j) = sum_i C_ij e_i, i.e. Gamma f = C conj(f)."""
        m = self.modes
        swap = np.block([[np.zeros((m, m)), np.eye(m)], [np.eye(m), np.zeros((m, m))]])
        return np.linalg.solve(self.frame, swap @ self.frame.conj())

    def gamma(self, f) -> np.ndarray:
        return self.conj_matrix() @ np.conj(np.asarray(f))

    def form(self) -> np.ndarray:
        """Matrix of the sesquilinear form (f, h) = conj(f)^T form h."""
        return self.frame.conj().T @ self.frame

    def sesq(self, f, h) -> complex:
        return np.conj(np.asarray(f)) @ self.form() @ np.asarray(h)

    def anticommutator_kernel(self) -> np.ndarray:
        """K_ab = {B(e_a), B(e_b)} = (Gamma e_a, e_b), a symmetric bilinear kernel."""
        k = self.size
        return np.array([[self.sesq(self.gamma(np.eye(k)[a]), np.eye(k)[b]) for b in range(k)]
                         for a in range(k)])

    def s_tilde(self) -> np.ndarray:
        """Kernel with i S~(f, h) = (Gamma f, h)."""
        return -1j * self.anticommutator_kernel()

    def expectation(self, op: np.ndarray) -> complex:
        return np.trace(self.rho @ op)

    def two_point(self) -> np.ndarray:
        k = self.size
        return np.array([[self.expectation(self.ops[a] @ self.ops[b]) for b in range(k)]
                         for a in range(k)])

    def moment_tensor(self, n: int) -> np.ndarray:
        """omega(B(e_i1) ... B(e_in)) for all basis tuples."""
        k = self.size
        half = n // 2

        def products(m: int) -> np.ndarray:
            acc = np.eye(self.dim, dtype=complex)[None]
            for _ in range(m):
                acc = np.einsum("aij,bjk->abik", acc, np.asarray(self.ops)).reshape(
                    -1, self.dim, self.dim)
            return acc
        left = np.einsum("ij,ajk->aik", self.rho, products(half))
        right = products(n - half)
        return np.einsum("aij,bji->ab", left, right).reshape((k,) * n)

    def represent(self, F: Functional) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for n, arr in F.parts.items():
            for idx in itertools.product(range(self.size), repeat=n):
                c = arr[idx]
                if c == 0:
                    continue
                op = np.eye(self.dim, dtype=complex)
                for i in idx:
                    op = op @ self.ops[i]
                out += c * op
        return out

    def car_residual(self) -> float:
        """max |{B(f)^*, B(h)} - (f, h)| and |B(Gamma f) - B(f)^*| over the basis."""
        k = self.size
        eye = np.eye(self.dim)
        worst = 0.0
        for a in range(k):
            fa = np.eye(k)[a]
            ba = self.field(fa)
            worst = max(worst, np.max(np.abs(self.field(self.gamma(fa)) - ba.conj().T)))
            for b in range(k):
                bb = self.ops[b]
                acomm = ba.conj().T @ bb + bb @ ba.conj().T
                worst = max(worst, np.max(np.abs(acomm - self.sesq(fa, np.eye(k)[b]) * eye)))
        return float(worst)

    def form_checks(self, trials: int = 20, seed: int = 0) -> dict:
        rng = np.random.default_rng(seed)
        k = self.size
        ev = np.linalg.eigvalsh((self.form() + self.form().conj().T) / 2)
        worst = 0.0
        for _ in range(trials):
            f = rng.normal(size=k) + 1j * rng.normal(size=k)
            h = rng.normal(size=k) + 1j * rng.normal(size=k)
            worst = max(worst, abs(self.sesq(self.gamma(f), self.gamma(h)) - self.sesq(h, f)))
        return {"min_eigenvalue": float(ev.min()), "gamma_symmetry": float(worst),
                "ok": ev.min() >= -1e-12 and worst <= 1e-10}


def wick_oracle(model: CarModel, max_n: int = 6) -> dict[int, float]:
    """Max deviation between the pairing expansion and Fock brute force, per n."""
    w2 = model.two_point()
    out = {}
    for n in range(1, max_n + 1):
        brute = model.moment_tensor(n)
        expansion = npoint_tensor(w2, n) if n % 2 == 0 else np.zeros_like(brute)
        out[n] = float(np.max(np.abs(brute - expansion)))
    return out


def random_functional(k: int, degrees, rng, antisym: bool = True) -> Functional:
    parts = {}
    for n in degrees:
        a = rng.normal(size=(k,) * n) + 1j * rng.normal(size=(k,) * n)
        parts[n] = antisymmetrize(a) if antisym else a
    return Functional(parts)


def random_antisymmetric(k: int, rng) -> np.ndarray:
    a = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    return a - a.T


def star_checks(modes: int = 2, seed: int = 0) -> dict[str, float]:
    """Deviations of the star-product identities on random data (all should be ~0).

    anticommutator: f star_S h + h star_S f = i S~(f, h), no degree-2 part;
    homomorphism: the Fock representation turns star_S into the operator product;
    associativity; scale equivalence of star_H for two Hadamard kernels."""
    model = CarModel.random(modes, seed)
    S, k = model.s_tilde(), model.size
    rng = np.random.default_rng(seed)
    f, h = (Functional.vector(rng.normal(size=k) + 1j * rng.normal(size=k)) for _ in range(2))
    ac = star_s(f, h, S) + star_s(h, f, S)
    target = Functional.scalar(1j * (f.parts[1] @ S @ h.parts[1]))
    F = random_functional(k, [0, 1, 2, 3], rng)
    G = random_functional(k, [0, 1, 2], rng)
    H = random_functional(k, [1, 2], rng)
    lhs = model.represent(star_s(F, G, S))
    rhs = model.represent(F) @ model.represent(G)
    left = star_s(star_s(F, G, S), H, S)
    h1, h2 = random_antisymmetric(k, rng), random_antisymmetric(k, rng)
    eq = scale_equivalence_check(F, G, S, h1, h2)
    return {
        "anticommutator": ac.relative_distance(target),
        "homomorphism": float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(rhs)), 1e-300)),
        "associativity": left.relative_distance(star_s(F, star_s(G, H, S), S)),
        "scale equivalence": eq["deviation"],
        "scale equivalence roundtrip": eq["roundtrip"],
    }


# ---------------------------------------------------------------- observables


def transform(F: Functional, U: np.ndarray) -> Functional:
    """Act with the matrix U on every slot of every coefficient array."""
    out = {}
    for n, a in F.parts.items():
        for s in range(n):
            a = np.moveaxis(np.tensordot(U, a, axes=([1], [s])), 0, s)
        out[n] = a
    return Functional(out)


def is_invariant(F: Functional, mats, tol: float = 1e-12) -> bool:
    """Invariance under a finite sample of representation matrices."""
    return all(transform(F, U).distance(F) <= tol * max(1.0, F.norm()) for U in mats)


def phase_rotations(model: CarModel, angles) -> list[np.ndarray]:
    """U(1) rotations a -> e^{i t} a, a^* -> e^{-i t} a^* in the test basis; they commute
    with Gamma and preserve the form, standing in for the spin-group action."""
    k, n = model.size, model.modes
    out = []
    for t in angles:
        d = np.concatenate([np.full(n, np.exp(1j * t)), np.full(n, np.exp(-1j * t))])
        f = model.frame
        out.append(np.linalg.solve(f, np.diag(d) @ f) if k else np.eye(0))
    return out


def separated_kernel(s_tilde: np.ndarray, region_a, region_b) -> np.ndarray:
    """S~ with the cross block between two regions set to zero (causal separation)."""
    s = np.array(s_tilde, dtype=complex)
    ia, ib = np.ix_(region_a, region_b), np.ix_(region_b, region_a)
    s[ia] = 0
    s[ib] = 0
    return s


def supported_functional(k: int, region, degrees, rng) -> Functional:
    """Random antisymmetric functional whose arrays vanish off the given basis subset."""
    mask = np.zeros(k)
    mask[list(region)] = 1
    F = random_functional(k, degrees, rng)
    parts = {}
    for n, a in F.parts.items():
        for s in range(n):
            shape = [1] * n
            shape[s] = k
            a = a * mask.reshape(shape)
        parts[n] = a
    return Functional(parts)


def graded_commutator(F: Functional, G: Functional, s_tilde) -> Functional:
    """F star G - (-1)^{|F||G|} G star F for homogeneous F, G."""
    sign = -1 if F.degree() % 2 and G.degree() % 2 else 1
    return star_s(F, G, s_tilde) - star_s(G, F, s_tilde) * sign


def locality_check(modes: int = 3, seed: int = 0) -> dict[str, float]:
    """Separated supports with a separated S~: even elements commute, odd ones
    anticommute; with the full S~ the odd anticommutator is generically nonzero."""
    model = CarModel.random(modes, seed)
    k = model.size
    rng = np.random.default_rng(seed)
    half = list(range(k // 2)), list(range(k // 2, k))
    S = separated_kernel(model.s_tilde(), *half)
    even_a = supported_functional(k, half[0], [2], rng)
    even_b = supported_functional(k, half[1], [2], rng)
    odd_a = supported_functional(k, half[0], [1], rng)
    odd_b = supported_functional(k, half[1], [1], rng)
    return {
        "even commute": graded_commutator(even_a, even_b, S).norm(),
        "odd anticommute": graded_commutator(odd_a, odd_b, S).norm(),
        "odd with full kernel": graded_commutator(odd_a, odd_b, model.s_tilde()).norm(),
    }
