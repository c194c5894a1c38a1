import pytest

from wgopo import cavity, spdc
from wgopo.config import RunConfig
from wgopo.reproduce import Context


@pytest.fixture(scope="session")
def resonator():
    return cavity.default_resonator()


@pytest.fixture(scope="session")
def pump():
    return spdc.PumpSpec()


@pytest.fixture(scope="session")
def qpm(pump):
    return spdc.calibrate_qpm(pump)


@pytest.fixture(scope="session")
def default_context(tmp_path_factory):
    return Context(RunConfig.load(), tmp_path_factory.mktemp("ctx"))


@pytest.fixture(scope="session")
def resonance_temperature(default_context):
    return default_context.double_resonance.temperature


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        ok, detail = mod.RESULTS[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:>2} {mod.NAMES[k]}: {detail}")
