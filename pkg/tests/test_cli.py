import json

import pytest
from click.testing import CliRunner

from pointsplit.cli import main
from pointsplit.runner import CACHE_SCHEMA, REPORT_SCHEMA


@pytest.fixture(scope="module")
def cli():
    return CliRunner()


@pytest.fixture(scope="module")
def cached(derived, cache_file):
    """Cache path that already holds every target."""
    return str(cache_file)


def test_derive_nothing(cli):
    out = cli.invoke(main, ["derive"])
    assert out.exit_code == 0 and out.output == ""


def test_derive_unknown_target(cli):
    out = cli.invoke(main, ["derive", "nonsense"])
    assert out.exit_code == 2
    assert "unknown target" in out.output


def test_derive_json_reproducible(cli, cached):
    """Two runs from the same cache print byte-identical versioned JSON."""
    args = ["--cache", cached, "derive", "v1", "conservation", "--format", "json"]
    a, b = cli.invoke(main, args), cli.invoke(main, args)
    assert a.exit_code == 0, a.output
    assert a.output == b.output
    data = json.loads(a.output)
    assert data["schema"] == REPORT_SCHEMA
    assert [r["target"] for r in data["reports"]] == ["v1", "conservation"]


def test_derive_plain(cli, cached):
    out = cli.invoke(main, ["--cache", cached, "derive", "conservation"])
    assert out.exit_code == 0
    assert "root c: -1/6" in out.output
    assert "provenance:" in out.output


def test_check_conservation_wrong_c(cli, cached):
    out = cli.invoke(main, ["--cache", cached, "check", "conservation", "--c", "0"])
    assert out.exit_code == 1
    assert "FAILED" in out.output


def test_check_conservation_root(cli, cached):
    out = cli.invoke(main, ["--cache", cached, "check", "conservation", "--c", "-1/6"])
    assert out.exit_code == 0, out.output


def test_check_bad_rational(cli):
    out = cli.invoke(main, ["check", "conservation", "--c", "one"])
    assert out.exit_code == 2


def test_check_differs_from_literature(cli, cached):
    """v1 is derived consistently but differs from the quoted bracket, so exit 1."""
    out = cli.invoke(main, ["--cache", cached, "check", "v1"])
    assert out.exit_code == 1
    assert "differs from literature" in out.output


@pytest.mark.parametrize("target", ["local-tensors", "dirac-square", "seeds"])
def test_quick_checks(cli, target):
    out = cli.invoke(main, ["check", target])
    assert out.exit_code == 0, out.output
    assert "status: ok, matches literature" in out.output


def test_report_wald(cli, cached):
    out = cli.invoke(main, ["--cache", cached, "report", "wald"])
    assert out.exit_code == 0, out.output
    data = json.loads(out.output)
    assert data["schema"] == REPORT_SCHEMA
    assert data["wald"]["3"]["ok"] is True


def test_oracle_verify(cli, tmp_path):
    good = tmp_path / "good.txt"
    good.write_text("Ric[a,b] == Ric[b,a]\nWeyl[a,b,^a,d] == 0\n")
    out = cli.invoke(main, ["oracle", "verify", str(good), "--trials", "2"])
    assert out.exit_code == 0
    assert out.output.count("PASS") == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("Tr(gamma[a] . gamma[b]) == 3 g[a,b]\n")
    out = cli.invoke(main, ["oracle", "verify", str(bad)])
    assert out.exit_code == 1 and out.output.startswith("FAIL")


def test_oracle_verify_parse_error(cli, tmp_path):
    f = tmp_path / "broken.txt"
    f.write_text("R[a,b == 0\n")
    out = cli.invoke(main, ["oracle", "verify", str(f)])
    assert out.exit_code == 1
    assert "Error" in out.output


def test_oracle_clifford(cli):
    out = cli.invoke(main, ["oracle", "clifford", "--trials", "1"])
    assert out.exit_code == 0
    assert "FAIL" not in out.output


def test_wick_commands(cli):
    assert cli.invoke(main, ["wick", "npoint", "--n", "4", "--modes", "3"]).exit_code == 0
    out = cli.invoke(main, ["wick", "oracle", "--max-n", "4", "--modes", "3"])
    assert out.exit_code == 0 and out.output.count("n=") == 4
    out = cli.invoke(main, ["wick", "star"])
    assert out.exit_code == 0 and out.output.count("PASS") == 5


def test_config_file(cli, tmp_path, cached):
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[run]\ntargets = conservation\nformat = json\ncache = {cached}\n")
    out = cli.invoke(main, ["--config", str(cfg), "derive"])
    assert out.exit_code == 0, out.output
    assert json.loads(out.output)["reports"][0]["target"] == "conservation"


@pytest.mark.parametrize("text, msg", [
    ("[other]\nx = 1\n", "[run] section"),
    ("[run]\ncolour = red\n", "unknown config key"),
    ("[run]\ntrials = many\n", "bad value for trials"),
    ("[run]\nformat = html\n", "unknown format"),
])
def test_config_errors(cli, tmp_path, text, msg):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(text)
    out = cli.invoke(main, ["--config", str(cfg), "derive"])
    assert out.exit_code == 2
    assert msg in out.output


def test_cache_schema_mismatch(cli, tmp_path):
    f = tmp_path / "old.json"
    f.write_text(json.dumps({"schema": "pointsplit-cache/0", "reports": {}}))
    out = cli.invoke(main, ["--cache", str(f), "derive", "u"])
    assert out.exit_code == 1
    assert CACHE_SCHEMA in out.output


def test_cache_unreadable(cli, tmp_path):
    f = tmp_path / "junk.json"
    f.write_text("{not json")
    out = cli.invoke(main, ["--cache", str(f), "derive", "u"])
    assert out.exit_code == 1
    assert "unreadable cache" in out.output


def test_knob_changes_anomaly(cli, cached):
    """Adding I to T through a knob changes the derived m = 0 trace."""
    base = cli.invoke(main, ["--cache", cached, "derive", "anomaly", "--format", "json"])
    knob = cli.invoke(main, ["--cache", cached, "--knob-i", "1/2", "derive", "anomaly",
                             "--format", "json"])
    assert base.exit_code == 0 and knob.exit_code == 0
    a = json.loads(base.output)["reports"][0]["results"]["trace, m = 0"]
    b = json.loads(knob.output)["reports"][0]["results"]["trace, m = 0"]
    assert a != b
