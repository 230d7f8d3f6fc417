from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    # a failure in any phase marks the criterion as failed
    entry = _ACCEPTANCE.setdefault(props["criterion"], {"passed": True, "detail": "", "runtime": 0.0})
    if report.when == "call":
        entry["detail"] = props.get("detail", "")
        entry["runtime"] = props.get("runtime", report.duration)
    if report.failed:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=int):
        e = _ACCEPTANCE[key]
        status = "PASS" if e["passed"] else "FAIL"
        terminalreporter.write_line(f"criterion {key:>2}: {status}  ({e['runtime']:.1f} s)  {e['detail']}")
