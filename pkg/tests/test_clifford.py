import pytest

from pointsplit.clifford import (clifford_sort, dirac_square, dirac_square_terms, gamma_contract,
                                 gamma_trace, spin_curvature_reduce)
from pointsplit.curvature import normal_form
from pointsplit.expr import canonicalize
from pointsplit.oracle import verify_identity
from pointsplit.parse import parse


def same(a, b) -> bool:
    return canonicalize(a - b).is_zero()


def test_sort_anticommutator():
    """gamma_nu gamma_mu = -gamma_mu gamma_nu + 2 g_mu_nu."""
    out = clifford_sort(parse("gamma[nu] . gamma[mu]"))
    assert same(out, parse("-gamma[mu] . gamma[nu] + 2 g[mu,nu]*Id"))


def test_sort_contracted_pair():
    assert same(clifford_sort(parse("gamma[^mu] . gamma[mu]")), parse("4 Id"))


def test_sort_fixed_point():
    e = parse("gamma[a] . gamma[b] . gamma[c]")
    assert clifford_sort(e) == e


def test_contract_three():
    assert same(gamma_contract(parse("gamma[^m] . gamma[a] . gamma[m]")), parse("-2 gamma[a]"))


def test_contract_four():
    out = gamma_contract(parse("gamma[^m] . gamma[a] . gamma[b] . gamma[m]"))
    assert same(clifford_sort(out), parse("4 g[a,b]*Id"))


def test_contract_five_reverses():
    """gamma^m gamma_a gamma_b gamma_c gamma_m = -2 gamma_c gamma_b gamma_a."""
    out = gamma_contract(parse("gamma[^m] . gamma[a] . gamma[b] . gamma[c] . gamma[m]"))
    assert same(clifford_sort(out), clifford_sort(parse("-2 gamma[c] . gamma[b] . gamma[a]")))


@pytest.mark.parametrize("src", [
    "gamma[^m] . gamma[a] . gamma[m]",
    "gamma[b] . gamma[^m] . gamma[a] . gamma[m] . gamma[c]",
    "gamma[^m] . gamma[a] . gamma[b] . gamma[c] . gamma[d] . gamma[m]",
    "gamma[a] . gamma[^m] . gamma[m] . gamma[b]",
])
def test_contract_agrees_with_sort(src):
    """Two reduction paths, one normal form, and the explicit matrices agree."""
    e = parse(src)
    assert same(clifford_sort(gamma_contract(e)), clifford_sort(e))
    assert verify_identity(e, gamma_contract(e)).ok


def test_trace_two():
    assert same(gamma_trace(parse("Tr(gamma[mu] . gamma[nu])")), parse("4 g[mu,nu]"))


def test_trace_four():
    out = gamma_trace(parse("Tr(gamma[mu] . gamma[nu] . gamma[a] . gamma[b])"))
    want = parse("4 g[mu,nu]*g[a,b] - 4 g[mu,a]*g[nu,b] + 4 g[mu,b]*g[nu,a]")
    assert same(out, want)


@pytest.mark.parametrize("src", ["Tr(gamma[a])", "Tr(gamma[a] . gamma[b] . gamma[c])",
                                 "Tr(gamma[a] . gamma[b] . gamma[c] . gamma[d] . gamma[e])"])
def test_odd_traces_vanish(src):
    assert gamma_trace(parse(src)).is_zero()


def test_trace_of_identity():
    assert same(gamma_trace(parse("Tr(Id)")), parse("4"))


def test_trace_spin_curvature_square():
    """Tr C_ab C^ab = -R_abcd^2 / 2."""
    out = normal_form(gamma_trace(parse("Tr(Cspin[a,b] . Cspin[^a,^b])")))
    assert normal_form(out - parse("-1/2 R[a,b,c,d]*R^[a,b,c,d]")).is_zero()


def test_spin_curvature_identities():
    """The spin-curvature list, each checked symbolically."""
    rows = [
        ("gamma[^a] . Cspin[a,b]", "1/2 Ric[b,a]*gamma[^a]"),
        ("Cspin[a,b] . gamma[^b]", "1/2 Ric[a,b]*gamma[^b]"),
        ("Cspin[a,b] . gamma[c] - gamma[c] . Cspin[a,b]", "R[a,b,r,c]*gamma[^r]"),
        ("Tr(Cspin[a,b] . gamma[c] . gamma[d])", "-2 R[a,b,c,d]"),
        ("Tr(Cspin[a,b] . Cspin[^a,^b] . gamma[r] . gamma[t])",
         "Tr(Cspin[a,b] . Cspin[^a,^b])*g[r,t]"),
    ]
    for lhs, rhs in rows:
        assert spin_curvature_reduce(parse(lhs) - parse(rhs)).is_zero(), lhs
        assert verify_identity(lhs, rhs).ok, lhs


def test_spin_curvature_divergence_vanishes():
    assert normal_form(parse("Cspin[a,b][;^a;^b]")).is_zero()


def test_dirac_square():
    """D'D + (box - R/4 - m^2) = 0 on a generic spinor."""
    assert dirac_square().is_zero()
    dd, target = dirac_square_terms()
    assert normal_form(dd - target).is_zero()


def test_dirac_square_massless_and_flat():
    """With m = 0 the square is box - R/4; without the R/4 the residual is visible."""
    dd, _ = dirac_square_terms()
    dd0 = dd.subs_scalar("m", 0)
    assert normal_form(dd0 + parse("X[;c;^c] - 1/4 Rs*X")).is_zero()
    assert not normal_form(dd0 + parse("X[;c;^c]")).is_zero()


def test_gamma_covariantly_constant():
    assert normal_form(parse("gamma[a][;b]")).is_zero()
