"""Acceptance bookkeeping: tests tagged ``@pytest.mark.acceptance(k)`` feed a
per-criterion PASS/FAIL line printed at the end of the session."""

import pytest

_OUTCOMES = {}   # criterion -> list of (nodeid, passed)
_DETAILS = {}    # criterion -> list of detail strings


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(k): test belongs to acceptance criterion k")


@pytest.fixture
def detail(request):
    """Attach a measured-value note to the criterion of the running test."""
    marker = request.node.get_closest_marker("acceptance")

    def note(text):
        if marker is not None:
            _DETAILS.setdefault(marker.args[0], []).append(text)
    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _OUTCOMES.setdefault(marker.args[0], []).append((item.nodeid, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_OUTCOMES):
        results = _OUTCOMES[k]
        ok = all(p for _, p in results)
        failed = [nid.split("::")[-1] for nid, p in results if not p]
        line = f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  ({sum(p for _, p in results)}/{len(results)} tests)"
        notes = _DETAILS.get(k, [])
        if notes:
            line += "  " + "; ".join(notes)
        if failed:
            line += "  failing: " + ", ".join(failed)
        tr.write_line(line)
