def pytest_terminal_summary(terminalreporter):
    import util

    if util.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in util.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
