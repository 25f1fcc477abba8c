import pytest


@pytest.fixture(scope="session")
def terminal_line(request):
    """Write a line that shows up even while output capture is active."""
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is None:
        return print
    return reporter.write_line
