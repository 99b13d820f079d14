import sys


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: long-running acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k, passed, detail in sorted(results, key=lambda r: r[0]):
        terminalreporter.write_line(f"{k}: {'PASS' if passed else 'FAIL'} - {detail}")
