"""Example models, a request script and a flow log."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

NAMES = ("healthcare.tdm", "confichair.tdm", "confichair-requests.txt", "healthcare-flows.log")


def fixture_path(name: str) -> Path:
    if name not in NAMES:
        raise KeyError(name)
    return Path(str(resources.files(__name__).joinpath(name)))


def read_fixture(name: str) -> str:
    return fixture_path(name).read_text(encoding="utf-8")
