"""
Pytest configuration for montevideo-sim tests.

Full-size acceptance grids are marked ``slow`` and only run with --slow;
each has a reduced counterpart that always runs.
"""

from typing import List

import numpy as np
import pytest
from _pytest.config import Config
from _pytest.config.argparsing import Parser
from _pytest.nodes import Item


def pytest_addoption(parser: Parser) -> None:
    parser.addoption(
        "--slow",
        action="store_true",
        default=False,
        help="Run full-size acceptance grids",
    )


def pytest_configure(config: Config) -> None:
    config.addinivalue_line("markers", "slow: full-size acceptance test")
    config.addinivalue_line("markers", "unit: fast unit test")


def pytest_collection_modifyitems(config: Config, items: List[Item]) -> None:
    if not config.getoption("--slow"):
        skip_slow = pytest.mark.skip(reason="Need --slow option to run")
        for item in items:
            if "slow" in item.keywords:
                item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator shared by randomized tests."""
    return np.random.default_rng(20240607)
