from fractions import Fraction

import pytest

from pointsplit.bitensor import BracketError, instantiate
from pointsplit.curvature import normal_form
from pointsplit.expr import Index
from pointsplit.hadamard import V1_QUOTED, scalar_brackets
from pointsplit.parse import parse


def nf(s: str):
    return normal_form(parse(s))


@pytest.fixture(scope="module")
def had(engine):
    return engine.hadamard


def at(value, *names):
    return normal_form(instantiate(value, tuple(Index(n) for n in names)))


def test_u_low_brackets(had):
    """[u] = 1, [u_a] = 0, [u_ab] = R_ab / 6."""
    u = had.derive_u_brackets(3)
    assert u[0] == parse("1")
    assert u[1].is_zero()
    assert normal_form(at(u[2], "a", "b") - parse("1/6 Ric[a,b]")).is_zero()
    want3 = "1/12 Ric[a,b][;c] + 1/12 Ric[a,c][;b] + 1/12 Ric[b,c][;a]"
    assert normal_form(at(u[3], "a", "b", "c") - parse(want3)).is_zero()


def test_u_double_box(had):
    """[box box u] has the standard van Vleck-Morette coefficients."""
    u4 = had.derive_u_brackets(4)[4]
    bb = normal_form(at(u4, "a", "b", "c", "d") * parse("g^[a,b]*g^[c,d]"))
    want = ("1/5 Rs[;a;^a] + 1/36 Rs^2 - 1/30 Ric[a,b]*Ric^[a,b]"
            " + 1/30 R[a,b,c,d]*R^[a,b,c,d]")
    assert normal_form(bb - parse(want)).is_zero()


def test_v0_bracket(had):
    """[V0] = -[P_x U]/2 = (m^2/2 + R/24) Id."""
    assert normal_form(had.v0_bracket() - parse("(1/2 m^2 + 1/24 Rs)*Id")).is_zero()


def scalar_v1_closed_form(xi: Fraction):
    """Closed form of [v1] for P = box - xi R - m^2, written out independently."""
    d = xi - Fraction(1, 6)
    return (parse("1/8 m^4 - 1/720 Ric[a,b]*Ric^[a,b] + 1/720 R[a,b,c,d]*R^[a,b,c,d]")
            + parse("m^2*Rs") * (d / 4)
            + parse("Rs[;a;^a]") * (-(xi - Fraction(1, 5)) / 24)
            + parse("Rs^2") * (d * d / 8))


@pytest.mark.parametrize("xi", [Fraction(0), Fraction(1, 6), Fraction(1, 4), Fraction(1, 2)])
def test_scalar_recursion_closed_form(xi):
    v0, v1 = scalar_brackets(xi)
    assert normal_form(v0 - parse("1/2 m^2") - parse("Rs") * ((xi - Fraction(1, 6)) / 2)).is_zero()
    assert normal_form(v1 - scalar_v1_closed_form(xi)).is_zero()


def test_v1_scalar_part_is_scalar_recursion(had):
    """[V1] = [v1](xi = 1/4) Id + C_ab C^ab / 48."""
    _, v1 = scalar_brackets(Fraction(1, 4))
    rest = had.v1_bracket() - v1 * parse("Id") - parse("1/48 Cspin[a,b] . Cspin^[a,b]")
    assert normal_form(rest).is_zero()


def test_v1_literature_difference(had):
    """The derived bracket differs from the quoted one only in the box R term."""
    assert normal_form(had.v1_residual() - parse("-1/240 Rs[;a;^a]*Id")).is_zero()
    assert normal_form(had.v1_bracket() - parse(V1_QUOTED)
                       - parse("-1/240 Rs[;a;^a]*Id")).is_zero()


def test_v1_massless_flat_vanishes(had):
    v1 = had.v1_bracket().subs_scalar("m", 0)
    assert all(any(f.symbol in ("R", "Ric", "Rs") for f in t.factors) for t in v1.terms())


def test_higher_v_not_implemented(had):
    with pytest.raises(BracketError):
        had.derive_V_brackets(2, 0)


def test_z1_limits(had):
    rep = had.z1_limits()
    assert rep.ok
    assert rep.values["[Z1]"].is_zero() and rep.values["[Z1;a]"].is_zero()


def test_z2_commutator(had):
    """[Z2] = 0 and [Z2;a] = [[V1], gamma_a], whose trace vanishes."""
    rep = had.z2_commutator()
    assert rep.ok
    assert rep.values["[Z2]"].is_zero()
    assert normal_form(rep.values["[Z2;a]"].traced()).is_zero()


def test_cplimits_items(had):
    """All four items of the coincidence-limit proposition hold exactly."""
    suite = had.cplimits_suite()
    assert set(suite) == {"1", "2", "3", "4"}
    for item, rep in suite.items():
        assert rep.residuals, item
        for name, res in rep.residuals.items():
            assert res.is_zero(), (item, name)


def test_pxh_head(had):
    """P_x H = 2 V1;p sigma^p + V1 (box sigma + 2) + O(sigma); its limit is 6 [V1]."""
    assert had.pxh() == parse("V1*(sigma[;p;^p] + 2) + 2 sigma[;^p]*V1[;p]")
    assert normal_form(had.limit(had.pxh()) - parse("6 lim_V1")).is_zero()
