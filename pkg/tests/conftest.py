import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

import _acceptance_log  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_log.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_acceptance_log.LINES, key=lambda item: item[0]):
        terminalreporter.write_line(line)
