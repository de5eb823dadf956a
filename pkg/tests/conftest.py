import pytest

from nactree.tree import parse_tree

NESTED3 = "(U1,(U2,U3))"
TWO_PAIRS = "((U1,U2),(U3,U4))"
SEVEN = "((U1,(U2,U3)),(U4,(U5,(U6,U7))))"

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture
def nested3():
    return parse_tree(NESTED3)


@pytest.fixture
def two_pairs():
    return parse_tree(TWO_PAIRS)


@pytest.fixture
def seven():
    return parse_tree(SEVEN)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
