import sys

import pytest

import gpp
from gpp.syntax import PSample, Trace


@pytest.fixture(scope="session")
def toy():
    return gpp.load_corpus("toy")


@pytest.fixture(scope="session")
def corpus():
    return {name: gpp.load_corpus(name) for name in gpp.corpus_names()}


@pytest.fixture
def obs08():
    return Trace((PSample(0.8),))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
