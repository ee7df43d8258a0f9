from pathlib import Path

import pytest

from quantumness.topology import load_device, partition_rectangles

SAMPLES = Path(__file__).resolve().parents[1] / "src" / "quantumness" / "data" / "samples"


@pytest.fixture(scope="session")
def samples() -> Path:
    return SAMPLES


@pytest.fixture(scope="session")
def heron():
    return load_device("heron-like")


@pytest.fixture(scope="session")
def eagle():
    return load_device("eagle-like")


@pytest.fixture(scope="session")
def ibex():
    return load_device("ibex-like")


@pytest.fixture(scope="session")
def heron_rects(heron):
    return partition_rectangles(heron)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
