import sys


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criteria verdict lines collected during the run."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
