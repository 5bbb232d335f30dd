def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get("acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
