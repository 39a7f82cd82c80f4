import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # surface the one-line acceptance verdicts, which are otherwise hidden
    # by output capture on passing tests
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
