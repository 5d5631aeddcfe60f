"""Collects acceptance outcomes and prints one line per criterion at the end."""
import pytest

_RESULTS = {}


@pytest.fixture
def detail(request):
    """Call with a short string to attach measured values to the summary line."""
    def add(text):
        request.node.user_properties.append(("detail", text))
    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    number, title = mark.args
    entry = _RESULTS.setdefault(number, {"title": title, "ok": True, "notes": []})
    entry["ok"] = entry["ok"] and rep.passed
    entry["notes"] += [v for k, v in item.user_properties if k == "detail"]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        e = _RESULTS[number]
        line = f"[{'PASS' if e['ok'] else 'FAIL'}] {number:>2}. {e['title']}"
        terminalreporter.write_line(f"{line}  ({'; '.join(e['notes'])})" if e["notes"] else line)
