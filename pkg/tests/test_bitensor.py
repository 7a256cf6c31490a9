import pytest

from pointsplit.bitensor import (ASSERTED, DERIVED, QUOTED_BRACKETS, SEEDED, BracketError,
                                 BracketTable, coincidence_limit, dlhopital_ratio,
                                 geometric_table)
from pointsplit.curvature import differentiate, normal_form
from pointsplit.expr import Index
from pointsplit.parse import parse


@pytest.fixture(scope="module")
def table():
    return geometric_table()


def lim(table, s):
    return normal_form(table.limit(parse(s)))


@pytest.mark.parametrize("sym, value, n", QUOTED_BRACKETS)
def test_seeds_regenerate(table, sym, value, n):
    """Higher brackets follow from [sigma] = [sigma_a] = 0, [sigma_ab] = g alone."""
    assert normal_form(table.get(sym, n) - parse(value)).is_zero()
    assert table.provenance(sym, n) == DERIVED


def test_only_three_sigma_seeds(table):
    assert [table.provenance("sigma", n) for n in range(3)] == [SEEDED] * 3


def test_quoted_seeds_marked_asserted():
    t = geometric_table(quoted_seeds=True)
    assert t.provenance("sigma", 4) == ASSERTED


@pytest.mark.parametrize("src, want", [
    ("sigma[;mu]*sigma[;^mu] - 2 sigma", "0"),
    ("sigma[;a;^a]", "4"),
    ("sigma[;mu;nu']", "-g[mu,nu]"),
    ("sigma[;mu']", "0"),
    ("I[;mu']", "0"),
    ("I[;a;b]", "1/2 Cspin[a,b]"),
    ("gpt[m,n'][;a;b]", "1/2 R[m,n,a,b]"),
])
def test_limits(table, src, want):
    assert normal_form(table.limit(parse(src)) - parse(want)).is_zero()


def test_transport_reverses_sigma_gradient(table):
    """g_mu^nu' sigma_nu' + sigma_mu vanishes with its first two derivatives."""
    e = parse("gpt[mu,^nu'] * sigma[;nu'] + sigma[;mu]")
    a, b = Index("a"), Index("b")
    for expr in (e, differentiate(e, a), differentiate(differentiate(e, a), b)):
        assert normal_form(table.limit(expr)).is_zero()


@pytest.mark.parametrize("sym, xs", [("sigma", "a;b;c"), ("sigma", "a;b"), ("gpt[m,n']", "a"),
                                     ("I", "a"), ("sigma", "a;b;c;d")])
def test_synge_rule_consistency(table, sym, xs):
    """[T_;A b'] + [T_;b A] = [T_;A]_;b for every entry where all three exist."""
    t = parse(f"{sym}[;{xs}]")
    lhs = table.limit(parse(f"{sym}[;{xs};e']")) + table.limit(parse(f"{sym}[;e;{xs}]"))
    rhs = differentiate(table.limit(t), Index("e"))
    assert normal_form(lhs - rhs).is_zero()


def test_dlhopital_trivial(table):
    s = parse("sigma")
    assert dlhopital_ratio(table, s, s) == parse("1")


def test_dlhopital_precondition_reported(table):
    with pytest.raises(BracketError, match=r"\[B\]"):
        dlhopital_ratio(table, parse("f"), parse("sigma"))


def test_underdetermined_identity_is_reported():
    """A defining identity that does not fix the bracket is an error, not a guess."""
    t = geometric_table()
    t.register("u", "u[;p]*sigma[;^p]")
    with pytest.raises(BracketError, match="does not determine"):
        t.get("u", 0)


def test_missing_identity_is_reported(table):
    with pytest.raises(BracketError, match="no defining identity"):
        table.limit(parse("W"))


def test_coincidence_limit_default_table():
    assert coincidence_limit(parse("sigma[;a;^a]")) == parse("4")


def test_table_json_roundtrip(table):
    table.get("sigma", 4)
    copy = BracketTable()
    copy.load_data(table.to_data())
    assert copy.to_json() == table.to_json()
    assert copy.get("sigma", 4) == table.get("sigma", 4)
