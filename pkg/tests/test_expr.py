from fractions import Fraction

import pytest

from pointsplit.curvature import contract_metric, normal_form
from pointsplit.expr import Expr, Index, canonicalize
from pointsplit.parse import ParseError, parse, parse_identity
from pointsplit.printing import from_json, render, to_json, to_latex, to_plain
from pointsplit.registry import REGISTRY, decl, is_matrix


def test_parse_contracted_riemann():
    """One term, two factors, dummy pair {a, c}."""
    e = parse("R[a,b,c,d] * g^[a,c]")
    (t,) = e.terms()
    assert len(t.factors) == 2
    assert t.dummy_names() == {"a", "c"}
    assert sorted(ix.name for ix in t.free_indices()) == ["b", "d"]


def test_parse_traced_word():
    """Tr( . ) yields a traced matrix word of length two."""
    (t,) = parse("Tr( gamma[mu] . gamma[nu] )").terms()
    assert t.traced and len(t.word) == 2 and not t.factors


def test_parse_primed_derivative():
    """An apostrophe tags the derivative index with the point y."""
    (t,) = parse("sigma[;mu;nu']").terms()
    (f,) = t.factors
    assert f.derivs == (Index("mu"), Index("nu", point="y"))


@pytest.mark.parametrize("src, fragment", [
    ("R[a,b", "line 1, column 6"),
    ("Foo[a]", "unknown symbol"),
    ("R[a,b,c]", "takes 4 indices"),
    ("v[a] + v[b]", "different free indices"),
    ("gamma[a]*gamma[b]\n + )", "line 2, column 4"),
    ("", "empty"),
])
def test_parse_errors(src, fragment):
    """Syntax, unknown symbols and arity mismatches carry a location."""
    with pytest.raises(ParseError) as exc:
        parse(src)
    assert fragment in str(exc.value)


def test_parse_identity_needs_one_separator():
    lhs, rhs = parse_identity("g[a,^a] == 4")
    assert canonicalize(contract_metric(lhs)) == rhs
    with pytest.raises(ParseError):
        parse_identity("f == f == f")


def test_riemann_pair_antisymmetry():
    """R[b,a,c,d] canonicalizes to -R[a,b,c,d]."""
    assert canonicalize(parse("R[b,a,c,d]")) == canonicalize(parse("-R[a,b,c,d]"))
    assert canonicalize(parse("R[a,b,c,d] + R[b,a,c,d]")).is_zero()
    assert canonicalize(parse("R[c,d,a,b] - R[a,b,c,d]")).is_zero()


def test_canonicalize_without_symmetry_is_identity():
    e = canonicalize(parse("v[a]*v[b]"))
    assert canonicalize(e) == e


def test_canonicalize_renames_dummies():
    """Different dummy names give the same canonical form."""
    a = canonicalize(parse("R[a,b,c,d]*R[^a,^b,^c,^d]"))
    b = canonicalize(parse("R[p,q,r,s]*R[^p,^q,^r,^s]"))
    assert a == b


def test_scalar_curvature_contraction():
    """Double trace of Riemann equals the scalar curvature symbol."""
    assert normal_form(parse("R[a,b,c,d]*g^[a,c]*g^[b,d] - Rs")).is_zero()


def test_factor_order_irrelevant_after_canonicalize():
    assert canonicalize(parse("v[a]*f")) == canonicalize(parse("f*v[a]"))


def test_expr_arithmetic():
    f = parse("f")
    assert (f - f).is_zero()
    assert parse("2 f") * Fraction(1, 2) == f
    assert parse("m^2*m") == Expr.atom("m", 3)
    assert Expr.number(0).is_zero() and Expr.zero().is_zero()
    assert parse("f*M").is_matrix() and not parse("f").is_matrix()


def test_print_plain_and_latex():
    e = parse("4 g[mu,nu]")
    assert to_plain(e) == "4 g[mu,nu]"
    assert to_latex(e) == r"4\,g_{\mu\nu}"


def test_print_deterministic():
    e = parse("R[a,b,c,d]*R[^a,^b,^c,^d] - 2 Ric[a,b]*Ric[^a,^b] + 1/3 Rs^2")
    assert to_plain(canonicalize(e)) == to_plain(canonicalize(parse(to_plain(e))))
    assert render(e, "json") == to_json(e)


def test_json_lossless():
    e = parse("1/2 m^2 * Tr(gamma[a] . gamma[b] . Cspin[^b,^a]) + Tr(M . N)*f")
    assert from_json(to_json(e)) == e


def test_registry_contents():
    """The curvature registry carries the reserved names and their arities."""
    for name, rank in [("g", 2), ("R", 4), ("Ric", 2), ("Rs", 0), ("Weyl", 4), ("G", 2),
                       ("Itens", 2), ("Jtens", 2), ("Ktens", 2), ("gamma", 1), ("Cspin", 2)]:
        assert decl(name).rank == rank, name
    assert is_matrix("gamma") and is_matrix("Cspin") and not is_matrix("R")
    assert int(REGISTRY.content_hash(), 16) >= 0
