import math

import numpy as np
import pytest

from pointsplit.wick import (CarModel, Functional, alpha, antisymmetrize, is_antisymmetric,
                             is_invariant, locality_check, npoint_tensor, ordered_permutations,
                             phase_rotations, quasifree_npoint, random_antisymmetric,
                             random_functional, scale_equivalence_check, star, star_checks,
                             star_s, transform, twist, wick_oracle)


@pytest.fixture(scope="module")
def model():
    return CarModel.random(4, seed=0)


def test_pairings_small():
    assert ordered_permutations(2) == [(((1, 2),), 1)]
    assert ordered_permutations(4) == [(((1, 2), (3, 4)), 1), (((1, 3), (2, 4)), -1),
                                       (((1, 4), (2, 3)), 1)]


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10])
def test_pairing_count(n):
    """(n - 1)!! pairings, each satisfying the two ordering conditions."""
    pairs = ordered_permutations(n)
    assert len(pairs) == math.prod(range(n - 1, 0, -2))
    for p, _ in pairs:
        assert all(a < b for a, b in p)
        assert all(p[i][0] < p[i + 1][0] for i in range(len(p) - 1))


def test_pairings_odd_and_range():
    assert ordered_permutations(5) == []
    with pytest.raises(ValueError):
        ordered_permutations(14)


def test_npoint_four_explicit():
    rng = np.random.default_rng(1)
    w = rng.normal(size=(3, 3))
    f = [rng.normal(size=3) for _ in range(4)]

    def w2(a, b):
        return f[a] @ w @ f[b]
    want = w2(0, 1) * w2(2, 3) - w2(0, 2) * w2(1, 3) + w2(0, 3) * w2(1, 2)
    assert quasifree_npoint(w, f) == pytest.approx(want, rel=1e-14)
    assert quasifree_npoint(w, f[:3]) == 0
    assert quasifree_npoint(w, f[:2]) == pytest.approx(w2(0, 1), rel=1e-14)


def test_car_relations(model):
    assert model.car_residual() <= 1e-12
    checks = model.form_checks()
    assert checks["ok"]
    assert checks["min_eigenvalue"] >= -1e-12


def test_four_point_against_fock(model):
    dev = np.max(np.abs(npoint_tensor(model.two_point(), 4) - model.moment_tensor(4)))
    assert dev <= 1e-10


@pytest.mark.parametrize("seed, thermal", [(0, True), (1, True), (2, False)])
def test_wick_oracle(seed, thermal):
    """Pairing expansions equal Fock expectations for n <= 6; odd moments vanish."""
    devs = wick_oracle(CarModel.random(4, seed, thermal), 6)
    assert max(devs.values()) <= 1e-10


def test_antisymmetrize_projection():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 3, 3))
    a = antisymmetrize(x)
    assert is_antisymmetric(a, 1e-14)
    assert np.max(np.abs(antisymmetrize(a) - a)) <= 1e-14
    s = rng.normal(size=(4, 4))
    assert np.max(np.abs(antisymmetrize(s + s.T))) <= 1e-14


def test_twist_degree_two():
    """Gamma_delta(f (x) h) = delta(f, h)."""
    rng = np.random.default_rng(3)
    d = random_antisymmetric(4, rng)
    f, h = rng.normal(size=4), rng.normal(size=4)
    out = twist(d, Functional({2: np.multiply.outer(f, h)}))
    assert out.parts[0] == pytest.approx(f @ d @ h, rel=1e-14)
    v = Functional.vector(f)
    assert twist(d, v).distance(v) == 0


def test_twist_twice_is_pairing_sum():
    """Gamma^2 / 2 on a degree-4 product is the signed full pairing sum."""
    rng = np.random.default_rng(4)
    d = random_antisymmetric(3, rng)
    fs = [rng.normal(size=3) for _ in range(4)]
    x = np.einsum("a,b,c,e->abce", *fs)
    two = twist(d, twist(d, Functional({4: x}))).parts[0] / 2
    assert two == pytest.approx(quasifree_npoint(d, fs), rel=1e-12)


def test_star_unit_and_anticommutator(model):
    S, k = model.s_tilde(), model.size
    rng = np.random.default_rng(5)
    F = random_functional(k, [0, 1, 2], rng)
    one = Functional.scalar(1.0)
    assert star_s(F, one, S).relative_distance(F.antisymmetrized()) <= 1e-14
    f, h = rng.normal(size=k), rng.normal(size=k)
    ac = star_s(Functional.vector(f), Functional.vector(h), S) + \
        star_s(Functional.vector(h), Functional.vector(f), S)
    assert np.max(np.abs(ac.parts[2]), initial=0.0) <= 1e-13
    assert ac.parts[0] == pytest.approx(1j * (f @ S @ h), rel=1e-12)


def test_star_associative(model):
    S, k = model.s_tilde(), model.size
    rng = np.random.default_rng(6)
    F, G, H = (random_functional(k, [0, 1, 2], rng) for _ in range(3))
    left = star_s(star_s(F, G, S), H, S)
    assert left.relative_distance(star_s(F, star_s(G, H, S), S)) <= 1e-12


def test_star_represents_operator_product():
    model = CarModel.random(2, seed=7)
    S, k = model.s_tilde(), model.size
    rng = np.random.default_rng(7)
    F, G = random_functional(k, [1, 2], rng), random_functional(k, [0, 1, 3], rng)
    lhs, rhs = model.represent(star_s(F, G, S)), model.represent(F) @ model.represent(G)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * np.max(np.abs(rhs))


def test_scale_equivalence():
    model = CarModel.random(2, seed=8)
    S, k = model.s_tilde(), model.size
    rng = np.random.default_rng(8)
    F, G = random_functional(k, [0, 2, 4], rng), random_functional(k, [1, 2, 3], rng)
    h1, h2 = random_antisymmetric(k, rng), random_antisymmetric(k, rng)
    assert scale_equivalence_check(F, G, S, h1, h2)["ok"]
    same = scale_equivalence_check(F, G, S, h1, h1)
    assert same["deviation"] == 0 and same["roundtrip"] == 0


def test_alpha_inverse():
    rng = np.random.default_rng(9)
    d = random_antisymmetric(3, rng)
    F = random_functional(3, [0, 1, 2, 3], rng)
    assert alpha(d, alpha(d, F, -1)).relative_distance(F) <= 1e-14
    assert alpha(np.zeros((3, 3)), F).distance(F) == 0


def test_star_checks_summary():
    out = star_checks(2, 0)
    assert max(out.values()) <= 1e-12


def test_even_and_gauge_invariant_subalgebra(model):
    """Even elements form a subalgebra; charge-neutral elements are phase invariant."""
    S, k, n = model.s_tilde(), model.size, model.modes
    rng = np.random.default_rng(10)
    E1, E2 = random_functional(k, [0, 2], rng), random_functional(k, [2, 4], rng)
    assert star_s(E1, E2, S).is_even()
    assert not random_functional(k, [1], rng).is_even()
    rots = phase_rotations(model, [0.3, 1.1])
    # a_i^* a_j in frame coordinates is charge neutral
    c = np.zeros((k, k), dtype=complex)
    c[n + 1, 2] = 1.0
    frame = np.linalg.inv(model.frame)
    neutral = transform(Functional({2: antisymmetrize(c)}), frame)
    assert is_invariant(neutral, rots, 1e-12)
    charged = Functional({2: antisymmetrize(rng.normal(size=(k, k)))})
    assert not is_invariant(charged, rots, 1e-6)


def test_locality():
    out = locality_check(3, 0)
    assert out["even commute"] <= 1e-12
    assert out["odd anticommute"] <= 1e-12
    assert out["odd with full kernel"] > 1e-3


def test_generic_star_matches_s_product(model):
    S = model.s_tilde()
    rng = np.random.default_rng(11)
    F, G = random_functional(model.size, [1, 2], rng), random_functional(model.size, [2], rng)
    assert star(F, G, S, 0.5j).distance(star_s(F, G, S)) == 0
