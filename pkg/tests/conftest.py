import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

_quiet = [HealthCheck.too_slow, HealthCheck.data_too_large]
# fixed example sequence so every run checks the same cases;
# HYPOTHESIS_PROFILE=explore draws fresh ones
settings.register_profile("default", deadline=None, max_examples=60, derandomize=True,
                          suppress_health_check=_quiet)
settings.register_profile("explore", deadline=None, max_examples=300, suppress_health_check=_quiet)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
