from fractions import Fraction

import pytest
import sympy as sp

from pointsplit import anomaly as an
from pointsplit.curvature import divergence, local_tensors, normal_form, trace, weyl_collect
from pointsplit.expr import Expr
from pointsplit.parse import parse


def test_conservation_affine_in_c(derived):
    """The residual is -(1 + 6c) Tr[V1];nu with the unique root c = -1/6."""
    run, reps = derived
    rep = reps["conservation"]
    assert rep.results["root c"] == Fraction(-1, 6)
    assert rep.ok
    res = rep.results["residual(c)"]
    tr_nu = normal_form(divergence(run.engine.tr_v1() * parse("g[mu,nu]"), "mu"))
    for c in (Fraction(0), Fraction(1), Fraction(-1, 4), Fraction(-1, 6)):
        want = tr_nu * (-(1 + 6 * c))
        assert normal_form(res.subs_scalar("c", c) - want).is_zero(), c


def test_conservation_canonical_tensor_fails(derived):
    """c = 0 leaves -Tr[V1];nu, which is not zero."""
    run, _ = derived
    assert not run.residual_at(Fraction(0)).is_zero()


def test_completeness(derived):
    """The divergence remainder for generic W is a combination of equation brackets
    that adds nothing on W = -H."""
    rep = derived[1]["completeness"]
    assert rep.ok
    assert rep.results["fit"]


def test_trace_identity(engine):
    assert engine.trace_identity("c").is_zero()


def test_trace_two_routes(engine):
    """Direct assembly and the -6(4c+1) shortcut give -Tr[V1]/(4 pi^2) at m = 0."""
    direct = engine.trace_expectation(Fraction(-1, 6), m=0)
    shortcut = normal_form((engine.tr_v1() * Expr.atom("pi", -2) * Fraction(-1, 4))
                           .subs_scalar("m", 0))
    assert normal_form(direct - shortcut).is_zero()


def test_lagrangian_term_state_free(engine):
    """Tr[(D'_x D'_y - P_y) H] = -12 Tr[V1] carries no state atoms."""
    added = engine.lagrangian_term()
    assert normal_form(added + engine.tr_v1() * 12).is_zero()
    assert not an.has_state_atoms(added)


def test_traceless_choice_leaves_state_term(engine):
    """c = -1/4 kills the geometric part of the trace."""
    out = engine.trace_expectation_scaled(Fraction(-1, 4))
    assert normal_form(out - an.state_atom() * Expr.atom("m")).is_zero()


def test_anomaly_forms_agree():
    assert an.anomaly_forms_agree().is_zero()
    assert normal_form(weyl_collect(an.anomaly_form1()) - an.anomaly_form2()).is_zero()


def test_anomaly_weyl_form(derived):
    """The derived m = 0 trace, rewritten in the Weyl basis, equals its Riemann form."""
    rep = derived[1]["anomaly"]
    assert rep.ok
    weyl = rep.results["trace, m = 0, Weyl form"]
    assert any(f.symbol == "Weyl" for t in weyl.terms() for f in t.factors)


def test_anomaly_literature_difference(derived):
    """The only difference from the quoted trace is box R / (240 pi^2)."""
    diff = derived[1]["anomaly"].comparisons["trace, m = 0 - literature"]
    assert normal_form(diff - parse("1/240 Rs[;a;^a]") * Expr.atom("pi", -2)).is_zero()


def test_scale_shift(derived):
    """Tr[D^c V] lies in the span of m^4 g, m^2 G, I, J; divergence and m = 0 trace vanish."""
    rep = derived[1]["scale-shift"]
    assert rep.ok
    assert rep.results["decomposition"] == {"m4g": Fraction(1, 2), "m2G": Fraction(-1, 6),
                                            "I": Fraction(-1, 60), "J": Fraction(1, 20)}
    shift = rep.results["Tr[D^c V]"]
    assert normal_form(divergence(shift, "mu")).is_zero()
    assert normal_form(trace(shift.subs_scalar("m", 0), "mu", "nu")).is_zero()


def test_fit_span_exact_and_missing():
    lt = local_tensors()
    basis = {"I": normal_form(lt["I"]), "J": normal_form(lt["J"])}
    target = normal_form(lt["I"] * Fraction(2, 3) - lt["J"])
    assert an.fit_span(target, basis) == {"I": Fraction(2, 3), "J": Fraction(-1)}
    assert an.fit_span(normal_form(parse("Ric[mu,nu]")), basis) is None


def test_scale_shift_quoted_in_span():
    coeffs = an.scale_shift_decomposition(an.scale_shift_quoted())
    assert coeffs == {"m4g": Fraction(1, 2), "m2G": Fraction(-1, 6),
                      "I": Fraction(1, 60), "J": Fraction(-1, 20)}


def test_minkowski_vanishes_at_scale():
    val = an.minkowski_expectation()
    lsq = an.minkowski_lambda()
    assert sp.simplify(val.subs(an.lam_s, sp.sqrt(lsq))) == 0
    assert sp.simplify(lsq - 2 * sp.exp(sp.Rational(3, 2) - 2 * an.EULER) / an.m_s**2) == 0


def test_minkowski_massless_vanishes():
    assert sp.limit(an.minkowski_expectation(), an.m_s, 0) == 0


def test_minkowski_tail_independent():
    """The order sigma^2 remainder never reaches the limit."""
    a = an.minkowski_expectation(tail=sp.Symbol("f3"))
    b = an.minkowski_expectation(tail=sp.Symbol("f3") + 17 * an.m_s**6)
    assert sp.simplify(a - b) == 0


def test_minkowski_scale_dependence_matches_flat_shift():
    """d omega / d ln(lambda^2) is the flat part (m^4/2) g of the scale shift over 8 pi^2."""
    val = an.minkowski_expectation()
    slope = sp.simplify(sp.diff(val, an.lam_s) * an.lam_s / 2)
    assert sp.simplify(slope - an.m_s**4 / 2 / (8 * sp.pi**2)) == 0


def test_minkowski_literature_differs():
    val = an.minkowski_expectation()
    assert sp.simplify(val - an.minkowski_quoted()) != 0


def test_wald_report(derived):
    run, reps = derived
    cons = run.residual_at(Fraction(-1, 6))
    mink = reps["lambda-m"].residuals["omega_Mink at lambda^2"]
    data = an.wald_axiom_report(run.engine, cons, mink)
    assert [data[k]["ok"] for k in "1234"] == [True, True, True, True]
    assert data["1"]["state_atoms"] == []
    assert data["3"]["residual"] == "0"
    assert data["5"]["ok"] is None


@pytest.mark.parametrize("c", [Fraction(0), Fraction(1, 3)])
def test_wald_conservation_flagged(engine, derived, c):
    """A wrong c shows up as a failed conservation axiom."""
    run, reps = derived
    data = an.wald_axiom_report(engine, run.residual_at(c),
                                reps["lambda-m"].residuals["omega_Mink at lambda^2"])
    assert data["3"]["ok"] is False
