import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

import acceptance_log  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(acceptance_log.LINES):
        terminalreporter.write_line(acceptance_log.LINES[k])
