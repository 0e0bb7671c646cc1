from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from mpstbang.cli import corpus_dir  # noqa: E402
from mpstbang.parser import parse_file  # noqa: E402

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large]
)
settings.load_profile("default")

CORPUS = corpus_dir()
CORPUS_FILES = sorted(p.name for p in CORPUS.glob("*.mpst"))


def load(name: str):
    return parse_file(str(CORPUS / name))


@pytest.fixture(scope="session")
def corpus():
    return {name: load(name) for name in CORPUS_FILES}


def first_protocol(name: str):
    prog = load(name)
    return next(iter(prog.protocols.values()))


# ---------------------------------------------------------------- acceptance report

_CRITERIA: dict = {}   # (number, title) -> every test of the criterion passed so far


@pytest.fixture
def criterion(record_property):
    def mark(number: int, title: str) -> None:
        record_property("criterion", (number, title))
    return mark


def pytest_runtest_logreport(report):
    if report.when == "call" or report.failed:
        for key, value in report.user_properties:
            if key == "criterion":
                _CRITERIA[value] = _CRITERIA.get(value, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), passed in sorted(_CRITERIA.items()):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {number:>2}  {title}")
