import pytest

from pointsplit.anomaly import AnomalyEngine
from pointsplit.runner import RunConfig, Runner

ALL_TARGETS = list(Runner.ORDER)


@pytest.fixture(scope="session")
def engine():
    """One anomaly engine shared by every test; its bracket table grows monotonically."""
    return AnomalyEngine()


@pytest.fixture(scope="session")
def cache_file(tmp_path_factory):
    return tmp_path_factory.mktemp("cache") / "cache.json"


@pytest.fixture(scope="session")
def derived(engine, cache_file):
    """Every derivation target run once; the cache file is reused by the CLI tests."""
    run = Runner(RunConfig(cache=str(cache_file)), engine=engine)
    reports = {r.target: r for r in run.run(ALL_TARGETS)}
    return run, reports
