import pytest

# criterion number -> [(passed, detail), ...], filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def record():
    def _record(criterion, passed, detail):
        ACCEPTANCE.setdefault(criterion, []).append((bool(passed), detail))

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[criterion]
        passed = all(p for p, _ in parts)
        detail = "; ".join(("" if p else "[failed] ") + d for p, d in parts)
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
