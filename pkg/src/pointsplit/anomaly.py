"""Point-split stress tensor: conservation fixes c, the trace anomaly, the
scale-change tensor, the Minkowski normalization and the Wald-axiom report."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import sympy as sp

from pointsplit.bitensor import BracketError
from pointsplit.clifford import gamma
from pointsplit.curvature import (
    contract_metric, differentiate, fresh_name, local_tensors, metric, normal_form, trace,
    weyl_collect,
)
from pointsplit.expr import Expr, Factor, Index
from pointsplit.hadamard import (
    Hadamard, P, dpx, dpy, dx, p_op, sort_opaque, substitute_limit, symmetrize_opaque,
)
from pointsplit.registry import CONST, LOCAL, METRIC, REGISTRY, STATE

Number = int | Fraction


def _c(c: Number | str | Expr) -> Expr:
    if isinstance(c, Expr):
        return c
    if isinstance(c, str):
        return Expr.atom(c)
    return Expr.number(Fraction(c))


def _used(e: Expr) -> set[str]:
    return {n for t in e.terms() for n in t.names()}


def transported_derivative(e: Expr, nu: str) -> Expr:
    """g_nu^{nu'} nabla_{nu'} e (parallel propagator times a y-derivative)."""
    k = fresh_name(_used(e) | {nu}, "_q")
    g = Expr.of(Factor("gpt", (Index(nu, False, "x"), Index(k, True, "y")), (), ""))
    return g * differentiate(e, Index(k, False, "y"))


def d_can(e: Expr, mu: str, nu: str) -> Expr:
    """-1/2 gamma_(mu (nabla_nu) - g_nu)^nu' nabla_nu') D'_y applied to e."""
    dy = dpy(e)

    def half(a: str, b: str) -> Expr:
        inner = differentiate(dy, Index(b)) - transported_derivative(dy, b)
        return gamma(Index(a)) * inner
    return (half(mu, nu) + half(nu, mu)) * Fraction(-1, 4)


def d_c(e: Expr, c, mu: str = "mu", nu: str = "nu") -> Expr:
    """D^c_{mu nu} = D^can - c/2 g_{mu nu} (D'_x D'_y - P_y)."""
    extra = metric(Index(mu), Index(nu)) * (dpx(dpy(e)) - p_op(e, "y"))
    return d_can(e, mu, nu) - extra * _c(c) * Fraction(1, 2)


def conservation_operator(A: Expr, B: Expr, C: Expr, c, nu: str = "nu") -> Expr:
    """The divergence operator applied to W, written through A = D'_x D'_y W,
    B = P_y W and C = P_x W."""
    quarter = (transported_derivative(A + B, nu) - differentiate(A + B, Index(nu))) * Fraction(1, 4)
    mixed = gamma(Index(nu)) * dpy(B - C) * Fraction(1, 4)
    cterm = (transported_derivative(A - B, nu) + differentiate(A - B, Index(nu))) \
        * _c(c) * Fraction(1, 2)
    return quarter + mixed - cterm


def state_atom() -> Expr:
    return Expr.of(Factor("TrDyW", (), (), "x"))


@dataclass
class AnomalyEngine:
    hadamard: Hadamard = field(default_factory=Hadamard)

    @property
    def table(self):
        return self.hadamard.table

    def limit(self, e: Expr) -> Expr:
        return self.table.limit(e)

    def tr_v1(self) -> Expr:
        return normal_form(self.hadamard.v1_bracket().traced())

    def _sub_v1(self, e: Expr) -> Expr:
        return normal_form(substitute_limit(e, "V1", self.hadamard.v1_bracket()))

    # ------------------------------------------------------------ conservation
    def divergence_identity(self, c="c") -> Expr:
        """nabla^mu [Tr D^c_{mu nu} W] - [Tr O_nu W] for an opaque smooth W.

        Not zero for generic W: the remainder lies in the span of equation brackets
        and vanishes on W = -H (see conservation_completeness)."""
        W = P("W")
        lhs = differentiate(self.limit(d_c(W, c).traced()), Index("mu", True))
        rhs = self.limit(conservation_operator(
            dpx(dpy(W)), p_op(W, "y"), p_op(W, "x"), c).traced())
        return normal_form(symmetrize_opaque(contract_metric(lhs - rhs), "W", self.table))

    def conservation_residual(self, c="c") -> Expr:
        """8 pi^2 nabla^mu omega(:T_{mu nu}:) after W -> -H, with the explicit [V1]."""
        h = self.hadamard
        h.cplimits_suite()  # proves and seeds the Z1/Z2 limits
        pxh, pyh = h.pxh(), h.pyh()
        smooth = self.limit(conservation_operator(pxh, -pyh, -pxh, c).traced())
        tx = h.traced_dxz2_derivative("x", "nu")
        ty = h.traced_dxz2_derivative("y", "nu")
        z2 = (ty - tx) * Fraction(1, 4) - (ty + tx) * _c(c) * Fraction(1, 2)
        return self._sub_v1(smooth + z2)

    def conservation_target(self, c="c") -> Expr:
        """-(1 + 6c) Tr[V1]_;nu."""
        dtr = differentiate(self.tr_v1(), Index("nu"))
        return normal_form(dtr * (_c(1) + _c(c) * 6) * -1)

    # ------------------------------------------------------------ trace
    def trace_identity(self, c="c") -> Expr:
        """g^{mu nu}[Tr D^c W] - [Tr{-(2c+1/2)(D'_x D'_y - P_y) + m D'_y} W] (must be 0)."""
        W = P("W")
        lhs = trace(self.limit(d_c(W, c).traced()), "mu", "nu")
        k = _c(c) * 2 + Fraction(1, 2)
        op = (dpx(dpy(W)) - p_op(W, "y")) * k * -1 + dpy(W) * Expr.atom("m")
        rhs = self.limit(op.traced())
        return normal_form(symmetrize_opaque(lhs - rhs, "W", self.table))

    def lagrangian_term(self) -> Expr:
        """Tr[(D'_x D'_y - P_y) H] = -12 Tr[V1]: the state-independent addition."""
        h = self.hadamard
        if not self.table.has("Z2", 1):  # a loaded table already carries the Z limits
            h.cplimits_suite()
        dd = -h.pxh() - dpx(P("Z2"))
        return self._sub_v1(self.limit((dd - h.pyh()).traced()))

    def trace_expectation_scaled(self, c="c") -> Expr:
        """8 pi^2 g^{mu nu} omega(:T_{mu nu}:) = (2c + 1/2) Tr[(D'D' - P_y)H] + m Tr[D'_y W]."""
        k = _c(c) * 2 + Fraction(1, 2)
        return normal_form(self.lagrangian_term() * k + state_atom() * Expr.atom("m"))

    def trace_expectation(self, c="c", m=None) -> Expr:
        """g^{mu nu} omega(:T_{mu nu}:) with the 1/(8 pi^2) normalization; m=0 drops
        the mass terms."""
        e = self.trace_expectation_scaled(c) * Expr.atom("pi", -2) * Fraction(1, 8)
        if m is not None:
            e = e.subs_scalar("m", m)
        return normal_form(e)

    # ------------------------------------------------------------ scale change
    def scale_shift_tensor(self, c=Fraction(-1, 6)) -> Expr:
        """Tr[D^c_{mu nu} V] with V = V0 + V1 sigma."""
        V = P("v0*I + Vt0 + sigma*V1")
        return self._sub_v1(self.limit(d_c(V, c).traced()))


def scale_shift_quoted() -> Expr:
    lt = local_tensors()
    e = P("1/2 m^4 * g[mu,nu] - 1/6 m^2 * Ric[mu,nu] + 1/12 m^2 * g[mu,nu]*Rs")
    return normal_form(e + (lt["I"] - lt["J"] * 3) * Fraction(1, 60))


def anomaly_form1() -> Expr:
    return normal_form(P("-1/1152 Rs*Rs - 1/480 Rs[;a;^a] + 1/720 Ric[a,b]*Ric^[a,b]"
                         " + 7/5760 R[a,b,c,d]*R^[a,b,c,d]") * Expr.atom("pi", -2))


def anomaly_form2() -> Expr:
    e = P("7/2 Weyl[a,b,c,d]*Weyl^[a,b,c,d] + 11 Ric[a,b]*Ric^[a,b] - 11/3 Rs*Rs"
          " - 6 Rs[;a;^a]")
    return e * Expr.atom("pi", -2) * Fraction(1, 2880)


def anomaly_forms_agree() -> Expr:
    return normal_form(weyl_collect(anomaly_form1()) - anomaly_form2())


def has_state_atoms(e: Expr) -> bool:
    return any(REGISTRY.get(s).kind == STATE for s in e.symbols() if s in REGISTRY)


# ---------------------------------------------------------------- Minkowski


@dataclass
class FlatSeriesKernel:
    """8 pi^2 W_Mink = (a0 + a1 sigma + tail sigma^2) Id."""

    a0: sp.Expr
    a1: sp.Expr
    tail: sp.Expr


m_s, lam_s, sigma_s = sp.symbols("m lambda sigma", positive=True)
EULER = sp.EulerGamma


def log_scale(lam=lam_s, m=m_s) -> sp.Expr:
    return sp.log(sp.exp(2 * EULER) * m**2 * lam**2 / 2)


def minkowski_kernel(tail=sp.Symbol("f3")) -> FlatSeriesKernel:
    """Smooth part of the flat vacuum two-point function after subtracting H."""
    L = log_scale()
    return FlatSeriesKernel(m_s**2 / 2 * (L - 1), m_s**4 / 8 * L - sp.Rational(5, 16) * m_s**4,
                            tail)


def flat_trace_dc(k: FlatSeriesKernel, c) -> sp.Expr:
    """Coefficient of g_{mu nu} in Tr[D^c_{mu nu} W] for W = w(sigma) Id in flat space.

    With [sigma_a] = 0, [sigma_ab] = g, [sigma_ab'] = -g and [w'] = a1:
    (nabla_nu - nabla_nu') D'_y W -> -2 a1 gamma_nu, so the canonical part gives a1 g;
    (D'_x D'_y - P_y) W -> -8 a1 + 2 m^2 a0.  The tail (order sigma^2) never
    survives two derivatives and the limit.
    """
    c = sp.Rational(c.numerator, c.denominator) if isinstance(c, Fraction) else sp.sympify(c)
    canon = 4 * k.a1
    lag = -c / 2 * 4 * (-8 * k.a1 + 2 * m_s**2 * k.a0)
    return sp.expand(canon + lag)


def minkowski_expectation(c=Fraction(-1, 6), tail=sp.Symbol("f3")) -> sp.Expr:
    """omega_Mink(:T_{mu nu}:) / g_{mu nu}."""
    return sp.simplify(flat_trace_dc(minkowski_kernel(tail), c) / (8 * sp.pi**2))


def minkowski_lambda(c=Fraction(-1, 6)) -> sp.Expr:
    """Value of lambda^2 at which the Minkowski expectation vanishes."""
    L = sp.Symbol("L")
    val = sp.expand(minkowski_expectation(c).subs(log_scale(), L))
    val = sp.expand(sp.expand_log(val, force=True))
    lsq = sp.Symbol("lsq", positive=True)
    expr = sp.expand_log(val, force=True)
    expr = expr.subs(sp.log(lam_s), sp.log(lsq) / 2)
    sol = sp.solve(expr, lsq)
    if len(sol) != 1:
        raise BracketError(f"no unique normalization scale: {sol}")
    return sp.simplify(sol[0])


def minkowski_quoted() -> sp.Expr:
    return -m_s**4 / 8 * (log_scale() - sp.Rational(7, 2))


def lambda_quoted() -> sp.Expr:
    return 2 * sp.exp(sp.Rational(7, 2) - 2 * EULER) / m_s**2


# ---------------------------------------------------------------- Wald axioms


def wald_axiom_report(engine: AnomalyEngine | None = None, conservation: Expr | None = None,
                      minkowski: sp.Expr | None = None) -> dict:
    """Evidence per axiom; `conservation` (residual at c = -1/6) and `minkowski`
    (the vacuum value at the normalization scale) may be passed in precomputed."""
    eng = engine or AnomalyEngine()
    added = eng.lagrangian_term()
    if conservation is None:
        conservation = eng.conservation_residual(Fraction(-1, 6))
    cons = normal_form(conservation)
    if minkowski is None:
        minkowski = minkowski_expectation().subs(lam_s, sp.sqrt(minkowski_lambda()))
    mink = sp.simplify(minkowski)
    out = {
        "1": {"claim": "difference of two states is state independent",
              "evidence": f"added term Tr[(D'xD'y - Py)H] = {added}",
              "state_atoms": sorted(s for s in added.symbols()
                                    if s in REGISTRY and REGISTRY.get(s).kind == STATE),
              "ok": not has_state_atoms(added)},
        "2": {"claim": "local covariance",
              "evidence": "outputs are built from curvature symbols and m only",
              "ok": _only_geometric(cons) and _only_geometric(added)},
        "3": {"claim": "conservation", "residual": str(cons), "ok": cons.is_zero()},
        "4": {"claim": "vanishing Minkowski vacuum expectation",
              "residual": str(mink), "ok": mink == 0},
        "5": {"claim": "derivative-order bound",
              "status": "not satisfiable in general; out of scope", "ok": None},
    }
    return out


def _only_geometric(e: Expr) -> bool:
    return all(REGISTRY.get(s).kind in (LOCAL, METRIC, CONST) for s in e.symbols())


# ---------------------------------------------------------------- exact span fits


def fit_span(target: Expr, basis: dict[str, Expr], keep=None) -> dict[str, Fraction] | None:
    """Rational coefficients a with sum_k a_k basis[k] = target on the monomials
    selected by keep (all by default); None when no such combination exists.
    Free directions of an underdetermined system are set to 0."""
    keep = keep or (lambda t: True)
    vecs = {k: {t: c for t, c in v.items() if keep(t)} for k, v in basis.items()}
    goal = {t: c for t, c in target.items() if keep(t)}
    mons = sorted({t for v in list(vecs.values()) + [goal] for t in v}, key=repr)
    names = list(vecs)
    if not mons:
        return {k: Fraction(0) for k in names}
    row = {t: i for i, t in enumerate(mons)}
    A = sp.zeros(len(mons), len(names))
    b = sp.zeros(len(mons), 1)
    for j, k in enumerate(names):
        for t, c in vecs[k].items():
            A[row[t], j] = sp.Rational(c.numerator, c.denominator)
    for t, c in goal.items():
        b[row[t], 0] = sp.Rational(c.numerator, c.denominator)
    sol = sp.linsolve((A, b))
    if not sol:
        return None
    (vals,) = sol
    out = {}
    for k, v in zip(names, vals):
        v = sp.Rational(v.subs({s: 0 for s in v.free_symbols}))
        out[k] = Fraction(int(v.p), int(v.q))
    return out


def combine(basis: dict[str, Expr], coeffs: dict[str, Fraction]) -> Expr:
    return Expr.sum(basis[k] * q for k, q in coeffs.items() if q)


def scale_shift_basis() -> dict[str, Expr]:
    """The regularisation freedom: m^4 g, m^2 G, I and J."""
    lt = local_tensors()
    return {"m4g": P("m^4 * g[mu,nu]"),
            "m2G": normal_form(P("m^2 * Ric[mu,nu] - 1/2 m^2 * g[mu,nu]*Rs")),
            "I": lt["I"], "J": lt["J"]}


def scale_shift_decomposition(shift: Expr) -> dict[str, Fraction] | None:
    basis = {k: normal_form(v) for k, v in scale_shift_basis().items()}
    return fit_span(normal_form(shift), basis)


# ---------------------------------------------------------------- completeness


def _g(name: str, up: bool = False) -> Expr:
    return gamma(Index(name, up, "x"))


def _nab(e: Expr, name: str, up: bool = False, point: str = "x") -> Expr:
    return differentiate(e, Index(name, up, point))


def equation_brackets(E: dict[str, Expr]) -> dict[str, Expr]:
    """Vector-valued brackets built from E1 = D'_x D'_y W, E2 = P_y W, E3 = P_x W
    and E4 = (D_x - D'_y) W that vanish whenever W solves the field equations."""
    out = {}
    E4 = E["E4"]
    for p1, p2 in (("x", "x"), ("x", "y"), ("y", "x"), ("y", "y")):
        dd = _nab(_nab(E4, "b", True, p2), "a", True, p1)
        for label, word in (("nu.a.b", _g("nu") * _g("a") * _g("b")),
                            ("a.nu.b", _g("a") * _g("nu") * _g("b")),
                            ("a.b.nu", _g("a") * _g("b") * _g("nu"))):
            out[f"E4;{p1}{p2} {label}"] = word * dd
        out[f"E4;a nu {p1}{p2}"] = _g("a") * _nab(_nab(E4, "nu", False, p2), "a", True, p1)
        out[f"E4;nu a {p1}{p2}"] = _g("a") * _nab(_nab(E4, "a", True, p2), "nu", False, p1)
    for label, k in (("Ric g", P("Ric[nu,a]") * _g("a", True)), ("Rs g", P("Rs") * _g("nu")),
                     ("Riem ggg", P("R[nu,a,b,c]") * _g("a", True) * _g("b", True)
                      * _g("c", True)),
                     ("Ric ggg", P("Ric[a,b]") * _g("a", True) * _g("nu") * _g("b", True))):
        out["E4 " + label] = k * E4
    for en in ("E1", "E2", "E3"):
        for pt in ("x", "y"):
            d = _nab(E[en], "a", True, pt)
            out[f"{en};{pt} nu.a"] = _g("nu") * _g("a") * d
            out[f"{en};{pt} a.nu"] = _g("a") * _g("nu") * d
            out[f"{en};{pt} nu"] = _nab(E[en], "nu", False, pt)
        out[f"{en} m"] = _g("nu") * E[en] * Expr.atom("m")
    return out


def _has_limit(symbol: str):
    def keep(t) -> bool:
        return any(f.symbol == "lim_" + symbol for f in t.all_factors())
    return keep


def conservation_completeness(engine: AnomalyEngine | None = None, c="c") -> dict:
    """Check that the divergence operator used in conservation_residual misses
    nothing for W = -H.

    For a generic smooth W the divergence of [Tr D^c W] differs from the bracket
    of the divergence operator by a remainder.  The remainder is fitted exactly
    against equation brackets, which are then evaluated on W = -H; after
    eliminating second derivatives of Z2 through the relations it satisfies, the
    correction to the conservation residual must vanish."""
    eng = engine or AnomalyEngine()
    T, h = eng.table, eng.hadamard
    W = P("W")
    remainder = eng.divergence_identity(c)
    generic = equation_brackets({"E1": dpx(dpy(W)), "E2": p_op(W, "y"), "E3": p_op(W, "x"),
                                 "E4": dx(W) - dpy(W)})
    vecs = {k: normal_form(symmetrize_opaque(T.limit(v.traced()), "W", T))
            for k, v in generic.items()}
    coeffs = fit_span(-remainder, vecs)
    if coeffs is None:
        return {"fit": None, "correction": None, "ok": False}
    h.cplimits_suite()
    Z2 = P("Z2")
    pxh, pyh = h.pxh(), h.pyh()
    onshell = equation_brackets({"E1": pxh + dpx(Z2), "E2": -pyh, "E3": -pxh, "E4": -Z2})
    extra = Expr.sum(T.limit(onshell[k].traced()) * q for k, q in coeffs.items() if q)
    extra = sort_opaque(extra, "Z2", T)

    def diff_xy(e: Expr) -> Expr:
        return dx(e) - dpy(e)
    rels = {"Px": _g("nu") * (p_op(Z2) - diff_xy(pxh)),
            "Py": _g("nu") * (p_op(Z2, "y") - diff_xy(pyh))}
    base = dpy(Z2) - dpx(Z2) - pxh + pyh
    for pt in ("x", "y"):
        rels[f"base;{pt} nu"] = _nab(base, "nu", False, pt)
        rels[f"base;{pt} nu.a"] = _g("nu") * _g("a") * _nab(base, "a", True, pt)
        rels[f"base;{pt} a.nu"] = _g("a") * _g("nu") * _nab(base, "a", True, pt)

    def prep(e: Expr) -> Expr:
        return normal_form(symmetrize_opaque(contract_metric(e), "Z2", T))
    rvals = {k: prep(T.limit(v.traced())) for k, v in rels.items()}
    extra = prep(extra)
    elim = fit_span(-extra, rvals, keep=_has_limit("Z2"))
    if elim is None:
        return {"fit": coeffs, "correction": None, "ok": False}
    total = eng._sub_v1(extra + combine(rvals, elim))
    return {"fit": {k: str(q) for k, q in coeffs.items() if q},
            "elimination": {k: str(q) for k, q in elim.items() if q},
            "correction": total, "ok": total.is_zero()}
