import os

from hypothesis import settings

import _report

settings.register_profile("ci", deadline=None, print_blob=True)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def pytest_terminal_summary(terminalreporter):
    if _report.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_report.LINES):
            terminalreporter.write_line(line)
