import numpy as np
import pytest

from psafe import maps
from psafe.forcing import ForcingConfig, make_forcing
from psafe.grid import decompose_domain
from psafe.safety import assemble_frame

MAP_BUILDERS = {
    "empty": maps.empty_room,
    "block": maps.block_room,
    "multi": maps.multi_obstacle,
}


@pytest.fixture(scope="session")
def solved():
    """Cache of (decomp, forcing, frame) keyed by (map name, forcing method)."""
    cache = {}

    def get(name, method="avgflux"):
        key = (name, method)
        if key not in cache:
            d = decompose_domain(MAP_BUILDERS[name]())
            f, _ = make_forcing(d, ForcingConfig(method))
            cache[key] = (d, f, assemble_frame(d, f))
        return cache[key]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
