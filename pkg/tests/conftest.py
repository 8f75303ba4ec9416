import _report


def _order(key):
    return int(key[1:]) if key[1:].isdigit() else 99


def pytest_terminal_summary(terminalreporter):
    if not _report.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_report.LINES, key=_order):
        terminalreporter.write_line(_report.LINES[key])
