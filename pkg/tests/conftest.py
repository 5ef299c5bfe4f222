import os

from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        _criteria.setdefault(name, report.outcome)
        if report.outcome != "passed":
            _criteria[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance")
    for name in sorted(_criteria):
        number, label = name[len("test_criterion_"):].split("_", 1)
        verdict = {"passed": "PASS", "skipped": "SKIP"}.get(_criteria[name], "FAIL")
        terminalreporter.write_line(f"criterion {int(number):2d} {label.replace('_', ' '):22s} {verdict}")
