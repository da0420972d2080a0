import pytest

VERDICTS = []


@pytest.fixture
def verdict():
    def record(name, ok, detail):
        line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
        VERDICTS.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance")
        for line in VERDICTS:
            terminalreporter.write_line(line)
