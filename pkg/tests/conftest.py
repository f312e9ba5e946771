import itertools
import warnings

import pytest

from tsgraph.store.deploy import deploy
from tsgraph.store.host import Deployment
from tsgraph.store.layout import LayoutConfig

_counter = itertools.count()


@pytest.fixture
def deploy_to(tmp_path):
    """``deploy_to(collection, hosts, bins=1, ipack=1, seed=0) -> Deployment`` under tmp_path."""

    def _deploy(collection, hosts=1, bins=1, ipack=1, seed=0):
        root = tmp_path / f"dep{next(_counter)}"
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            deploy(collection, hosts, LayoutConfig(bins, ipack), root, seed=seed)
        return Deployment(root)

    return _deploy


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
