from pathlib import Path

import pytest

from flowkit.corpus import entries
from flowkit.lang import parse

CORPUS_DIR = Path(__file__).resolve().parent.parent / "corpus"


@pytest.fixture(scope="session")
def corpus_dir():
    return CORPUS_DIR


@pytest.fixture(scope="session")
def corpus():
    return {e.name: e for e in entries()}


def parse_ok(text):
    model, diags = parse(text, "t.fm")
    assert diags == [], [str(d) for d in diags]
    return model


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(test_acceptance.RESULTS):
        title, passed, detail = test_acceptance.RESULTS[number]
        terminalreporter.write_line(test_acceptance.report_line(number, title, passed, detail))
