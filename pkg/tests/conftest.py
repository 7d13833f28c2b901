"""Acceptance bookkeeping: one PASS/FAIL line per criterion in the terminal summary."""
import re

import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid): acceptance criterion identifier")
    config._criteria = {}
    config._info = []


def _entry(config, nodeid):
    return config._criteria.setdefault(nodeid, {"detail": []})


@pytest.fixture
def report(request):
    """Attach a detail line to the current criterion's summary entry."""
    entry = _entry(request.config, request.node.nodeid)
    return entry["detail"].append


@pytest.fixture
def info(request):
    """Record an informational line printed after the criterion table."""
    return request.config._info.append


@pytest.fixture(scope="session")
def physicality_log():
    """Physicality statistics of every dynamics run made by the acceptance tests."""
    return []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = _entry(item.config, item.nodeid)
    entry["id"] = marker.args[0]
    entry["label"] = item.callspec.id if hasattr(item, "callspec") else ""
    if rep.when == "call" or rep.outcome != "passed":
        entry.setdefault("outcome", rep.outcome)
        if rep.when == "call":
            entry["outcome"] = rep.outcome
        if rep.failed and call.excinfo is not None:
            entry["error"] = call.excinfo.exconly().splitlines()[0][:160]


def _order(cid):
    m = re.match(r"C(\d+)", cid)
    return int(m.group(1)) if m else 99


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    entries = [e for e in config._criteria.values() if "id" in e and "outcome" in e]
    if not entries:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for e in sorted(entries, key=lambda e: (_order(e["id"]), e["label"])):
        verdict = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[e["outcome"]]
        label = f" [{e['label']}]" if e["label"] else ""
        tr.write_line(f"{e['id']}{label}: {verdict}")
        for line in e["detail"]:
            tr.write_line(f"    {line}")
        if "error" in e:
            tr.write_line(f"    {e['error']}")
    if config._info:
        tr.write_line("informational:")
        for line in config._info:
            tr.write_line(f"    {line}")
