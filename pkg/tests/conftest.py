ACCEPTANCE_KEY = "trustcal_acceptance_lines"


def pytest_configure(config):
    setattr(config, ACCEPTANCE_KEY, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
