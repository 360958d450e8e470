import pytest

_ACCEPTANCE: list[tuple[int, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call":
        return
    doc = (item.obj.__doc__ or item.name).strip().splitlines()[0]
    _ACCEPTANCE.append((int(mark.args[0]), doc, "PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k, doc, status in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"AC{k:<2d} {status}  {doc}")
