import numpy as np
import pytest

from superholder.cloud import ParticleCloud
from superholder.params import ModelParams


@pytest.fixture
def continuous_params():
    return ModelParams(alpha=1.8, beta=0.5)


@pytest.fixture
def origin_cloud():
    return ParticleCloud.point_mass(0.0, 1.0, 1000)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def report(pytestconfig):
    """Write ``ACn PASS/FAIL ...`` to the terminal at once and keep it for the run summary.

    A criterion passes only when its check holds and it finished within ``limit`` seconds.
    """
    tr = pytestconfig.pluginmanager.getplugin("terminalreporter")

    def emit(label, ok, detail, elapsed, limit):
        ok = bool(ok) and elapsed < limit
        line = f"{label} {'PASS' if ok else 'FAIL'}: {detail} [{elapsed:.1f}s, limit {limit:g}s]"
        pytestconfig.stash.setdefault(ACCEPTANCE_LINES, []).append(line)
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
