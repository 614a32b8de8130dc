"""Prints one ACCEPTANCE n: PASS/FAIL line per acceptance criterion run."""
import re

_PAT = re.compile(r"test_criterion_(\d+)")


def pytest_terminal_summary(terminalreporter):
    results = {}
    for key, reports in terminalreporter.stats.items():
        if key not in ("passed", "failed", "error"):
            continue
        for rep in reports:
            m = _PAT.search(getattr(rep, "nodeid", ""))
            if not m:
                continue
            n = int(m.group(1))
            results[n] = results.get(n, True) and key == "passed"
    if not results:
        return
    terminalreporter.write_line("")
    for n in sorted(results):
        verdict = "PASS" if results[n] else "FAIL"
        terminalreporter.write_line(f"ACCEPTANCE {n}: {verdict}")
