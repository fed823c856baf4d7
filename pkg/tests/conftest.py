from __future__ import annotations

import sys

import pytest

from trustdomains.dsl import load_model
from trustdomains.fixtures import fixture_path, read_fixture
from trustdomains.simulation import parse_requests, simulate


@pytest.fixture(scope="session")
def healthcare():
    return load_model(read_fixture("healthcare.tdm"))


@pytest.fixture(scope="session")
def confichair():
    return load_model(read_fixture("confichair.tdm"))


@pytest.fixture()
def confichair_run(confichair):
    return simulate(confichair, parse_requests(read_fixture("confichair-requests.txt")))


@pytest.fixture(scope="session")
def paths():
    return {name: str(fixture_path(name)) for name in
            ("healthcare.tdm", "confichair.tdm", "confichair-requests.txt",
             "healthcare-flows.log")}


@pytest.fixture(scope="session")
def confichair_store_bytes(confichair):
    run = simulate(confichair, parse_requests(read_fixture("confichair-requests.txt")))
    return run.store.dumps()


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.result_lines():
        terminalreporter.write_line(line)
