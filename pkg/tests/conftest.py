import re
from collections import OrderedDict

import numpy as np
import pytest

_ACCEPTANCE = OrderedDict()


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    m = re.search(r"test_acceptance\.py::test_c(\d+)_(\w+)", report.nodeid)
    if m:
        label = m.group(2).replace("_", " ")
        _ACCEPTANCE[int(m.group(1))] = (label, report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        label, outcome, duration = _ACCEPTANCE[num]
        status = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(
            f"criterion {num:2d} ({label}): {status} [{duration:.2f}s]"
        )


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(a)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))
