"""Derivation targets, run configuration, caching and versioned JSON reports."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import sympy as sp

from pointsplit import anomaly as an
from pointsplit.bitensor import QUOTED_BRACKETS, BracketError, geometric_table
from pointsplit.clifford import dirac_square
from pointsplit.curvature import (
    check_gauss_bonnet, differentiate, local_tensors, normal_form, trace, weyl_collect,
)
from pointsplit.expr import Expr, Index
from pointsplit.hadamard import U_IDENTITY, V0_SCALAR_IDENTITY, V1_QUOTED, VT0_IDENTITY, P
from pointsplit.printing import expr_from_data, expr_to_data, render
from pointsplit.registry import REGISTRY

REPORT_SCHEMA = "pointsplit-report/1"
CACHE_SCHEMA = "pointsplit-cache/1"
FORMATS = ("plain", "latex", "json")


class ConfigError(ValueError):
    pass


class CacheError(RuntimeError):
    pass


# ---------------------------------------------------------------- configuration


@dataclass
class RunConfig:
    targets: list[str] = field(default_factory=list)
    u_order: int = 4
    v0_order: int = 2
    format: str = "plain"
    cache: str | None = None
    trials: int = 3
    seed: int = 0
    tol: float = 1e-12
    # regularisation freedom added to the stress tensor: a m^2 G + b I + c J
    knob_m2g: Fraction = Fraction(0)
    knob_i: Fraction = Fraction(0)
    knob_j: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}")
        for name in ("knob_m2g", "knob_i", "knob_j"):
            setattr(self, name, Fraction(getattr(self, name)))

    def knobs(self) -> dict[str, Fraction]:
        return {"m2G": self.knob_m2g, "I": self.knob_i, "J": self.knob_j}


def load_config(path: str | Path) -> RunConfig:
    """Read an INI file with a [run] section; keys are the RunConfig field names."""
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(str(exc)) from None
    if not cp.has_section("run"):
        raise ConfigError("config needs a [run] section")
    known = {f.name: f for f in fields(RunConfig)}
    kw: dict[str, Any] = {}
    for key, raw in cp.items("run"):
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            if key == "targets":
                kw[key] = raw.split()
            elif key in ("u_order", "v0_order", "trials", "seed"):
                kw[key] = int(raw)
            elif key == "tol":
                kw[key] = float(raw)
            elif key.startswith("knob_"):
                kw[key] = Fraction(raw)
            else:
                kw[key] = raw
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    return RunConfig(**kw)


# ---------------------------------------------------------------- values


def encode(v) -> Any:
    if isinstance(v, Expr):
        return {"expr": expr_to_data(v)}
    if isinstance(v, sp.Basic):
        return {"sympy": sp.srepr(v)}
    if isinstance(v, Fraction):
        return {"fraction": str(v)}
    if isinstance(v, dict):
        return {k: encode(x) for k, x in v.items()}
    return v


def decode(v) -> Any:
    if isinstance(v, dict):
        if set(v) == {"expr"}:
            return expr_from_data(v["expr"])
        if set(v) == {"sympy"}:
            return sp.sympify(v["sympy"])
        if set(v) == {"fraction"}:
            return Fraction(v["fraction"])
        return {k: decode(x) for k, x in v.items()}
    return v


def is_zero(v) -> bool:
    if isinstance(v, Expr):
        return v.is_zero()
    if isinstance(v, sp.Basic):
        return sp.simplify(v) == 0
    return v == 0


def show(v, fmt: str) -> Any:
    if isinstance(v, Expr):
        return expr_to_data(v) if fmt == "json" else render(v, fmt)
    if isinstance(v, sp.Basic):
        return sp.latex(v) if fmt == "latex" else str(v)
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, dict):
        return {k: show(x, fmt) for k, x in v.items()}
    return v


@dataclass
class TargetReport:
    """results: derived values; residuals: internal identities that must vanish;
    comparisons: differences from the literature values (reported, checked by
    `check`)."""

    target: str
    results: dict[str, Any] = field(default_factory=dict)
    residuals: dict[str, Any] = field(default_factory=dict)
    comparisons: dict[str, Any] = field(default_factory=dict)
    provenance: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(is_zero(v) for v in self.residuals.values())

    @property
    def matches_literature(self) -> bool:
        return all(is_zero(v) for v in self.comparisons.values())

    def to_data(self) -> dict:
        return {"target": self.target, "results": encode(self.results),
                "residuals": encode(self.residuals), "comparisons": encode(self.comparisons),
                "provenance": list(self.provenance)}

    @staticmethod
    def from_data(d: dict) -> TargetReport:
        return TargetReport(d["target"], decode(d["results"]), decode(d["residuals"]),
                            decode(d["comparisons"]), list(d["provenance"]))

    def render(self, fmt: str) -> dict:
        return {"target": self.target, "ok": self.ok,
                "matches_literature": self.matches_literature,
                "results": show(self.results, fmt), "residuals": show(self.residuals, fmt),
                "comparisons": show(self.comparisons, fmt), "provenance": self.provenance}


# ---------------------------------------------------------------- cache


def content_hash() -> str:
    """Registry hash plus every identity the derivations start from."""
    h = hashlib.sha256(REGISTRY.content_hash().encode())
    for text in (U_IDENTITY, V0_SCALAR_IDENTITY, VT0_IDENTITY, V1_QUOTED, repr(QUOTED_BRACKETS)):
        h.update(text.encode())
    return h.hexdigest()


class Cache:
    """JSON file of target reports and the bracket-table snapshot."""

    def __init__(self, path: str | Path | None) -> None:
        self.path = Path(path) if path else None
        self.data: dict = {"schema": CACHE_SCHEMA, "key": content_hash(), "reports": {},
                           "table": None}
        if self.path and self.path.exists():
            try:
                stored = json.loads(self.path.read_text())
            except json.JSONDecodeError as exc:
                raise CacheError(f"unreadable cache {self.path}: {exc}") from None
            if stored.get("schema") != CACHE_SCHEMA:
                raise CacheError(f"cache {self.path} has schema {stored.get('schema')!r}, "
                                 f"expected {CACHE_SCHEMA!r}")
            if stored.get("key") == self.data["key"]:
                self.data = stored

    def get(self, key: str) -> TargetReport | None:
        d = self.data["reports"].get(key)
        return TargetReport.from_data(d) if d else None

    def put(self, key: str, rep: TargetReport) -> None:
        self.data["reports"][key] = rep.to_data()

    def save(self) -> None:
        if self.path:
            self.path.write_text(json.dumps(self.data, sort_keys=True))


# ---------------------------------------------------------------- targets


class Runner:
    """Executes targets in dependency order over one shared engine."""

    ORDER = ("u", "v0", "v1", "cplimits", "conservation", "completeness", "anomaly",
             "scale-shift", "lambda-m")
    DEPS = {"u": (), "v0": ("u",), "v1": ("v0",), "cplimits": ("v1",),
            "conservation": ("cplimits",), "completeness": ("cplimits",), "anomaly": ("conservation",),
            "scale-shift": ("v1",), "lambda-m": ("conservation",)}

    def __init__(self, config: RunConfig, cache: Cache | None = None,
                 engine: an.AnomalyEngine | None = None) -> None:
        self.config = config
        self.cache = cache or Cache(config.cache)
        self.engine = engine or an.AnomalyEngine()
        table = self.cache.data.get("table")
        if table:
            try:
                self.engine.table.load_data(table)
            except BracketError as exc:
                raise CacheError(str(exc)) from None
        self.done: dict[str, TargetReport] = {}

    def plan(self, targets: list[str]) -> list[str]:
        unknown = [t for t in targets if t not in self.DEPS]
        if unknown:
            raise ConfigError(f"unknown target(s): {', '.join(unknown)}")
        need: set[str] = set()

        def add(t: str) -> None:
            if t not in need:
                need.add(t)
                for d in self.DEPS[t]:
                    add(d)
        for t in targets:
            add(t)
        return [t for t in self.ORDER if t in need]

    def _key(self, target: str) -> str:
        c = self.config
        parts = {"u": f"u:{c.u_order}", "v0": f"v0:{c.v0_order}",
                 "anomaly": f"anomaly:{c.knob_m2g}:{c.knob_i}:{c.knob_j}"}
        return parts.get(target, target)

    def get(self, target: str) -> TargetReport:
        if target in self.done:
            return self.done[target]
        key = self._key(target)
        rep = self.cache.get(key)
        if rep is None:
            for dep in self.DEPS[target]:
                self.get(dep)
            rep = getattr(self, "t_" + target.replace("-", "_"))()
            self.cache.put(key, rep)
        self.done[target] = rep
        return rep

    def run(self, targets: list[str]) -> list[TargetReport]:
        out = [self.get(t) for t in self.plan(targets)]
        self.cache.data["table"] = self.engine.table.to_data()
        self.cache.save()
        wanted = set(targets)
        return [r for r in out if r.target in wanted]

    # derivations ----------------------------------------------------------
    def t_u(self) -> TargetReport:
        h = self.engine.hadamard
        rep = TargetReport("u", provenance=[
            "seeded [sigma], [sigma_a], [sigma_ab], [g_parallel], [I]",
            "transport identity of u with [u] = 1"])
        for n, v in h.derive_u_brackets(self.config.u_order).items():
            rep.results[f"[u;{n}]"] = v
        return rep

    def t_v0(self) -> TargetReport:
        h = self.engine.hadamard
        rep = TargetReport("v0", provenance=["u brackets", "transport identities of v0, Vt0"])
        for n, v in h.derive_V_brackets(0, self.config.v0_order).items():
            rep.results[f"[V0;{n}]"] = v
        return rep

    def t_v1(self) -> TargetReport:
        h = self.engine.hadamard
        v1 = h.v1_bracket()
        return TargetReport("v1", {"[V1]": v1, "Tr[V1]": normal_form(v1.traced())}, {},
                            {"[V1] - literature": h.v1_residual()},
                            ["V0 brackets", "[V1] = -[P_x V0]/4"])

    def t_cplimits(self) -> TargetReport:
        rep = TargetReport("cplimits", provenance=[
            "[V1]", "Z1, Z2 limits from the Hadamard recursion",
            "opaque Z2 derivatives eliminated through D'_y Z2 - D'_x Z2"])
        for item, r in self.engine.hadamard.cplimits_suite().items():
            for name, res in r.residuals.items():
                rep.residuals[f"item {item}: {name}"] = res
        return rep

    def conservation_c(self) -> Expr:
        return self.get("conservation").results["residual(c)"]

    def residual_at(self, c: Fraction) -> Expr:
        return normal_form(self.conservation_c().subs_scalar("c", c))

    def t_conservation(self) -> TargetReport:
        eng = self.engine
        res = eng.conservation_residual("c")
        target = eng.conservation_target("c")
        r0 = normal_form(res.subs_scalar("c", 0))
        slope = normal_form(res.subs_scalar("c", 1) - r0)
        fit = an.fit_span(r0, {"slope": slope}) if not slope.is_zero() else None
        root = -fit["slope"] if fit else None
        rep = TargetReport("conservation", provenance=[
            "cplimits items 1-4", "[V1]", "divergence of D^c applied to -H"])
        rep.results["residual(c)"] = res
        rep.results["root c"] = root
        rep.residuals["residual(c) + (1 + 6c) Tr[V1];nu"] = normal_form(res - target)
        rep.residuals["residual at root"] = (normal_form(res.subs_scalar("c", root))
                                             if root is not None else Expr.number(1))
        return rep

    def t_completeness(self) -> TargetReport:
        out = an.conservation_completeness(self.engine)
        rep = TargetReport("completeness", provenance=[
            "cplimits items 1-4", "exact fit of the divergence remainder on equation brackets",
            "elimination of opaque Z2 second derivatives"])
        rep.results["fit"] = {k: Fraction(v) for k, v in (out.get("fit") or {}).items()}
        rep.results["elimination"] = {k: Fraction(v)
                                      for k, v in (out.get("elimination") or {}).items()}
        corr = out.get("correction")
        rep.residuals["correction to the conservation residual"] = (
            corr if corr is not None else Expr.number(1))
        return rep

    def t_anomaly(self) -> TargetReport:
        eng = self.engine
        c = self.get("conservation").results["root c"]
        tr = eng.trace_expectation(c)
        tr0 = eng.trace_expectation(c, m=0)
        lt = local_tensors()
        freedom = Expr.zero()
        for name, q in self.config.knobs().items():
            if q:
                base = (P("m^2*Ric[mu,nu] - 1/2 m^2*g[mu,nu]*Rs") if name == "m2G"
                        else lt[name])
                freedom = freedom + normal_form(trace(base, "mu", "nu")) * q
        tr = normal_form(tr + freedom)
        tr0 = normal_form(tr0 + freedom.subs_scalar("m", 0))
        rep = TargetReport("anomaly", provenance=[
            "conservation root c", "Tr[(D'_x D'_y - P_y) H] = -12 Tr[V1]", "[V1]"])
        rep.results["c"] = c
        rep.results["trace"] = tr
        rep.results["trace, m = 0"] = tr0
        rep.results["trace, m = 0, Weyl form"] = weyl_collect(tr0)
        rep.residuals["trace identity"] = eng.trace_identity("c")
        rep.residuals["Weyl form - Riemann form"] = normal_form(weyl_collect(tr0) - tr0)
        rep.residuals["literature forms agree"] = an.anomaly_forms_agree()
        rep.comparisons["trace, m = 0 - literature"] = normal_form(tr0 - an.anomaly_form1())
        return rep

    def t_scale_shift(self) -> TargetReport:
        eng = self.engine
        shift = eng.scale_shift_tensor()
        coeffs = an.scale_shift_decomposition(shift)
        rep = TargetReport("scale-shift", provenance=["[V0] brackets", "[V1]",
                                                      "D^c with c = -1/6 applied to V"])
        rep.results["Tr[D^c V]"] = shift
        rep.results["decomposition"] = coeffs or {}
        rep.residuals["divergence"] = normal_form(differentiate(shift, Index("mu", True)))
        rep.residuals["trace at m = 0"] = normal_form(trace(shift.subs_scalar("m", 0),
                                                            "mu", "nu"))
        rep.residuals["in span of m^4 g, m^2 G, I, J"] = Expr.zero() if coeffs else Expr.number(1)
        rep.comparisons["Tr[D^c V] - literature"] = normal_form(shift - an.scale_shift_quoted())
        return rep

    def t_lambda_m(self) -> TargetReport:
        c = self.get("conservation").results["root c"]
        val = an.minkowski_expectation(c)
        lsq = an.minkowski_lambda(c)
        at = sp.simplify(val.subs(an.lam_s, sp.sqrt(lsq)))
        rep = TargetReport("lambda-m", provenance=["conservation root c",
                                                  "flat massive vacuum kernel"])
        rep.results["omega_Mink / g"] = val
        rep.results["lambda^2"] = lsq
        rep.residuals["omega_Mink at lambda^2"] = at
        rep.residuals["omega_Mink at m = 0"] = sp.limit(val, an.m_s, 0)
        rep.comparisons["omega_Mink - literature"] = sp.simplify(val - an.minkowski_quoted())
        rep.comparisons["lambda^2 - literature"] = sp.simplify(lsq - an.lambda_quoted())
        return rep


# ---------------------------------------------------------------- quick checks


def quick_checks() -> dict[str, Callable[[], TargetReport]]:
    """Targets for `check` that do not need the Hadamard pipeline."""
    def local() -> TargetReport:
        lt = local_tensors()
        return TargetReport("local-tensors", residuals={
            "K - I + 4J": check_gauss_bonnet(),
            "tr(I - 3J)": normal_form(trace(lt["I"] - lt["J"] * 3, "mu", "nu")),
            "tr I - 6 box R": normal_form(trace(lt["I"], "mu", "nu") - P("6 Rs[;a;^a]")),
            "tr J - 2 box R": normal_form(trace(lt["J"], "mu", "nu") - P("2 Rs[;a;^a]"))},
            provenance=["metric variations of the quadratic actions"])

    def dirac() -> TargetReport:
        return TargetReport("dirac-square", residuals={"D'D + P": dirac_square()},
                            provenance=["Clifford relations", "spin curvature"])

    def seeds() -> TargetReport:
        t = geometric_table()
        rep = TargetReport("seeds", provenance=["[sigma] = 0, [sigma_a] = 0, [sigma_ab] = g"])
        for sym, val, n in QUOTED_BRACKETS:
            rep.residuals[f"[{sym};{n}] - literature"] = normal_form(
                t.get(sym, n) - P(val))
        return rep
    return {"local-tensors": local, "dirac-square": dirac, "seeds": seeds}


def report_json(reports: list[TargetReport], fmt: str = "json") -> str:
    """Versioned, byte-reproducible JSON document."""
    return json.dumps({"schema": REPORT_SCHEMA, "reports": [r.render(fmt) for r in reports]},
                      sort_keys=True, indent=2)
