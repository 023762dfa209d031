import numpy as np
import pytest

from wfkit.trace import SyntheticConfig, generate_synthetic


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic(SyntheticConfig(n_classes=5, n_instances=20, trace_len_mean=80), seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion, printed after the run
_acceptance: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if report.failed or (report.when == "call" and name not in _acceptance):
        _acceptance[name] = ("PASS" if report.passed else "FAIL", report.nodeid)
    elif report.skipped:
        _acceptance[name] = ("SKIP", report.nodeid)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance):
        status, _ = _acceptance[name]
        num = name.split("_")[1][1:]
        title = name.split("_", 2)[2].replace("_", " ")
        terminalreporter.write_line(f"criterion {int(num):2d}: {status}  {title}")
