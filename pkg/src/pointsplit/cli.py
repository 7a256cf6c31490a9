"""Command-line front end."""

from __future__ import annotations

import json
import sys
from fractions import Fraction

import click
import numpy as np

from pointsplit import runner as rn
from pointsplit.runner import Cache, CacheError, ConfigError, RunConfig, Runner, TargetReport


def _fraction(ctx, param, value):
    if value is None:
        return None
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise click.BadParameter(f"{value!r} is not a rational number") from None


def _config(ctx: click.Context, **over) -> RunConfig:
    base: RunConfig = ctx.obj["config"]
    kw = {k: getattr(base, k) for k in base.__dataclass_fields__}
    kw.update({k: v for k, v in over.items() if v is not None})
    try:
        return RunConfig(**kw)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from None


def _emit(reports: list[TargetReport], fmt: str, literature: bool) -> int:
    if fmt == "json":
        click.echo(rn.report_json(reports, "json"))
    else:
        for rep in reports:
            data = rep.render(fmt)
            click.echo(f"== {rep.target}")
            for section in ("results", "residuals", "comparisons"):
                for name, val in data[section].items():
                    if isinstance(val, dict):
                        val = ", ".join(f"{k}: {v}" for k, v in val.items())
                    click.echo(f"  {section[:-1] if section != 'residuals' else 'residual'}"
                               f" {name}: {val}")
            click.echo(f"  provenance: {' <- '.join(reversed(rep.provenance))}")
            status = "ok" if rep.ok else "FAILED"
            if literature:
                status += ", matches literature" if rep.matches_literature \
                    else ", differs from literature"
            click.echo(f"  status: {status}")
    bad = [r for r in reports if not r.ok or (literature and not r.matches_literature)]
    return 1 if bad else 0


def _runner(cfg: RunConfig) -> Runner:
    try:
        return Runner(cfg)
    except CacheError as exc:
        raise click.ClickException(f"cache: {exc}") from None


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="INI file with a [run] section.")
@click.option("--cache", type=click.Path(dir_okay=False), help="JSON cache file.")
@click.option("--knob-m2g", callback=_fraction, help="Coefficient of m^2 G added to T.")
@click.option("--knob-i", callback=_fraction, help="Coefficient of I added to T.")
@click.option("--knob-j", callback=_fraction, help="Coefficient of J added to T.")
@click.pass_context
def main(ctx, config_path, cache, knob_m2g, knob_i, knob_j):
    """Point-split stress tensor derivations for the Dirac field."""
    try:
        cfg = rn.load_config(config_path) if config_path else RunConfig()
    except ConfigError as exc:
        raise click.UsageError(f"config: {exc}") from None
    ctx.obj = {"config": cfg}
    ctx.obj["config"] = _config(ctx, cache=cache, knob_m2g=knob_m2g, knob_i=knob_i,
                                knob_j=knob_j)


@main.command()
@click.argument("targets", nargs=-1)
@click.option("--format", "fmt", type=click.Choice(rn.FORMATS), default=None)
@click.pass_context
def derive(ctx, targets, fmt):
    """Derive TARGETS: u, v0, v1, cplimits, conservation, completeness, anomaly,
    scale-shift, lambda-m."""
    cfg = _config(ctx, format=fmt)
    targets = list(targets) or list(cfg.targets)
    if not targets:
        return
    try:
        reports = _runner(cfg).run(targets)
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from None
    sys.exit(_emit(reports, cfg.format, literature=False))


CHECKS = ("conservation", "completeness", "v1", "cplimits", "anomaly", "scale-shift",
          "lambda-m", "local-tensors", "dirac-square", "seeds")


@main.command()
@click.argument("target", type=click.Choice(CHECKS))
@click.option("--c", "c", callback=_fraction, default=None,
              help="Coefficient c for the conservation check (default: the derived root).")
@click.option("--format", "fmt", type=click.Choice(rn.FORMATS), default=None)
@click.pass_context
def check(ctx, target, c, fmt):
    """Check TARGET; exit status 0 only if every residual and literature difference is 0."""
    cfg = _config(ctx, format=fmt)
    quick = rn.quick_checks()
    if target in quick:
        sys.exit(_emit([quick[target]()], cfg.format, literature=True))
    run = _runner(cfg)
    if target == "conservation" and c is not None:
        res = run.residual_at(c)
        rep = TargetReport("conservation", {"c": c}, {f"residual at c = {c}": res},
                           provenance=run.get("conservation").provenance)
        run.run([])
        sys.exit(_emit([rep], cfg.format, literature=True))
    reports = run.run([target])
    sys.exit(_emit(reports, cfg.format, literature=True))


@main.group()
def report():
    """Structured reports."""


@report.command("wald")
@click.pass_context
def report_wald(ctx):
    """Status of each Wald axiom for the derived prescription."""
    from pointsplit.anomaly import wald_axiom_report
    run = _runner(ctx.obj["config"])
    run.get("cplimits")
    cons = run.residual_at(run.get("conservation").results["root c"])
    mink = run.get("lambda-m").residuals["omega_Mink at lambda^2"]
    data = wald_axiom_report(run.engine, cons, mink)
    run.run([])
    click.echo(json.dumps({"schema": rn.REPORT_SCHEMA, "wald": data}, sort_keys=True, indent=2))
    sys.exit(0 if all(v["ok"] in (True, None) for v in data.values()) else 1)


@main.group()
def oracle():
    """Numeric oracle on random metrics."""


@oracle.command("verify")
@click.argument("identity_file", type=click.File("r"))
@click.option("--trials", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--tol", type=float, default=None)
@click.pass_context
def oracle_verify(ctx, identity_file, trials, seed, tol):
    """Verify `lhs == rhs` lines of IDENTITY_FILE numerically."""
    from pointsplit.oracle import verify_file
    from pointsplit.parse import ParseError
    cfg = _config(ctx, trials=trials, seed=seed, tol=tol)
    try:
        reps = verify_file(identity_file.read(), cfg.trials, cfg.seed, cfg.tol)
    except (ParseError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    for r in reps:
        click.echo(f"{'PASS' if r.ok else 'FAIL'} {r.deviation:.3e} seeds={r.seeds} {r.name}")
    sys.exit(0 if all(r.ok for r in reps) else 1)


@oracle.command("clifford")
@click.option("--trials", type=int, default=2)
@click.option("--seed", type=int, default=0)
def oracle_clifford(trials, seed):
    """Identity catalogue and negative controls, symbolic and numeric."""
    from pointsplit.oracle import clifford_suite
    suite = clifford_suite(trials, seed)
    ok = True
    for c in suite["identities"]:
        ok &= c.holds
        click.echo(f"{'PASS' if c.holds else 'FAIL'} identity {c.name}: symbolic="
                   f"{c.symbolic_zero} numeric={c.numeric.deviation:.2e}")
    for c in suite["controls"]:
        ok &= c.refuted
        click.echo(f"{'PASS' if c.refuted else 'FAIL'} control {c.name}: symbolic="
                   f"{c.symbolic_zero} numeric={c.numeric.deviation:.2e}")
    sys.exit(0 if ok else 1)


@main.group()
def wick():
    """Fermionic quasi-free states and star products."""


@wick.command("npoint")
@click.option("--n", "n", type=int, default=4)
@click.option("--modes", type=int, default=4)
@click.option("--seed", type=int, default=0)
def wick_npoint(n, modes, seed):
    """Compare the pairing expansion of the n-point function with the Fock model."""
    from pointsplit.wick import CarModel, npoint_tensor
    model = CarModel.random(modes, seed)
    dev = float(np.max(np.abs(npoint_tensor(model.two_point(), n) - model.moment_tensor(n)),
                       initial=0.0))
    click.echo(f"n={n} modes={modes} seed={seed} max deviation {dev:.3e}")
    sys.exit(0 if dev <= 1e-10 else 1)


@wick.command("oracle")
@click.option("--max-n", type=int, default=6)
@click.option("--modes", type=int, default=4)
@click.option("--seed", type=int, default=0)
def wick_oracle_cmd(max_n, modes, seed):
    """Pairing expansions against brute-force Fock expectations for n <= MAX_N."""
    from pointsplit.wick import CarModel, wick_oracle
    devs = wick_oracle(CarModel.random(modes, seed), max_n)
    for n, d in devs.items():
        click.echo(f"n={n} max deviation {d:.3e}")
    sys.exit(0 if max(devs.values()) <= 1e-10 else 1)


@wick.command("star")
@click.option("--modes", type=int, default=2,
              help="Fock model size; the cost grows steeply with it.")
@click.option("--seed", type=int, default=0)
def wick_star(modes, seed):
    """Anticommutator, associativity, homomorphism and scale-equivalence checks."""
    from pointsplit.wick import star_checks
    out = star_checks(modes, seed)
    for name, dev in out.items():
        click.echo(f"{'PASS' if dev <= 1e-12 else 'FAIL'} {name}: {dev:.3e}")
    sys.exit(0 if all(v <= 1e-12 for v in out.values()) else 1)


if __name__ == "__main__":  # pragma: no cover
    main()
