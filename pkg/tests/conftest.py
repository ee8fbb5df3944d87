import sys

import pytest

from fragsel.types import Document, Query


@pytest.fixture
def query():
    return Query("q1", "Who won the Nobel Peace Prize in 2019?")


@pytest.fixture
def abcd_doc():
    return Document.text("doc", "A. B. C. D.")


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.report_lines():
        terminalreporter.write_line(line)
