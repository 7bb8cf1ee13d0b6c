import os
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_RESULTS: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(ident, title): one acceptance criterion")


@pytest.fixture
def criterion(request):
    """Collects detail lines that the terminal summary prints under the criterion."""
    lines = []
    request.node.user_properties.append(("acceptance_detail", lines))
    t0 = time.perf_counter()
    yield lines
    lines.append(f"elapsed {time.perf_counter() - t0:.2f} s")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = dict(report.user_properties).get("acceptance_marker")
    if marker is None:
        return
    ident, title = marker
    detail = dict(report.user_properties).get("acceptance_detail", [])
    _RESULTS[ident] = {"title": title, "outcome": report.outcome, "detail": list(detail),
                       "duration": report.duration}


def pytest_runtest_setup(item):
    m = item.get_closest_marker("acceptance")
    if m is not None:
        item.user_properties.append(("acceptance_marker", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for ident in sorted(_RESULTS, key=lambda k: int(k.lstrip("AC"))):
        r = _RESULTS[ident]
        flag = "PASS" if r["outcome"] == "passed" else "FAIL"
        tr.write_line(f"[{flag}] {ident} {r['title']} ({r['duration']:.2f} s)")
        for line in r["detail"]:
            tr.write_line(f"       {line}")
