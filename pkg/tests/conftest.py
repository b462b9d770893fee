import os

os.environ.setdefault("ACTIVITY_HMM_THREADS", "4")


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _RESULTS.append((props["criterion"], report.outcome, props.get("detail", "")))


_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, outcome, detail in sorted(_RESULTS, key=lambda r: r[0]):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {detail}")
