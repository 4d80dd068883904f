"""Per-criterion PASS/FAIL lines for the acceptance suite."""

from collections import defaultdict

import pytest

_OUTCOMES: dict[int, list[tuple[str, str, str]]] = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        if hasattr(rep, "wasxfail"):
            status = "XFAIL" if rep.skipped else "XPASS"
            detail = rep.wasxfail
        else:
            status = rep.outcome.upper()
            detail = ""
        _OUTCOMES[mark.args[0]].append((item.name, status, detail))
        line = f"criterion {mark.args[0]:>2} {item.name}: {'PASS' if status == 'PASSED' else 'FAIL'}"
        print(f"\n{line}" + (f" ({detail})" if detail else ""))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_OUTCOMES):
        results = _OUTCOMES[k]
        ok = all(s == "PASSED" for _, s, _ in results)
        notes = "; ".join(f"{n}: {d}" for n, s, d in results if s != "PASSED")
        tr.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}" + (f" ({notes})" if notes else ""))
