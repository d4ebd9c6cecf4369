"""Shared fixtures.  Full antenna runs are expensive, so each is done once per session."""

import warnings

import pytest

from esiwfdtd.geometry import AntennaParams
from esiwfdtd.pipeline import Settings, analyse_antenna

warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

# lines printed by the acceptance tests, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


_cache: dict = {}


def antenna(name: str):
    if name not in _cache:
        s = Settings()
        if name == "transverse":
            p = AntennaParams.transverse()
        elif name == "longitudinal":
            p = AntennaParams.longitudinal()
        elif name == "transverse_lossless":
            p = AntennaParams.transverse(lossless=True)
        else:
            raise KeyError(name)
        _cache[name] = analyse_antenna(p, s)
    return _cache[name]


@pytest.fixture(scope="session")
def transverse():
    return antenna("transverse")


@pytest.fixture(scope="session")
def longitudinal():
    return antenna("longitudinal")


@pytest.fixture(scope="session")
def transverse_lossless():
    return antenna("transverse_lossless")
