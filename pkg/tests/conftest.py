import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=25, deadline=None)
settings.load_profile("default")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run the slow tier (large sectors)")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion")
    config._criteria = []


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow tier; pass --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        detail = dict(item.user_properties).get("detail", "")
        status = "SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL")
        item.config._criteria.append((mark.args[0], mark.args[1], status, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = getattr(config, "_criteria", [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for number, label, status, detail in sorted(rows, key=lambda r: (r[0], r[1])):
        tail = f"  [{detail}]" if detail else ""
        terminalreporter.write_line(f"criterion {number} {status}: {label}{tail}")
