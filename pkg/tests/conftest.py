import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from pmica.symtensor import SymTensor  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_tensor(rng, n, d, scale=1.0):
    return SymTensor(scale * rng.standard_normal(math.comb(n + d - 1, d)), d, n)


@st.composite
def shapes(draw, max_n=4, min_d=2, max_d=5):
    return draw(st.integers(1, max_n)), draw(st.integers(min_d, max_d))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ------------------------------------------------------------ acceptance gate
# Tests marked ``@pytest.mark.acceptance(k, "title")`` report one line each in
# the terminal summary; details come from ``record_property("detail", ...)``.

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        _ACCEPTANCE[marker[0]] = (marker[1], report.outcome == "passed", detail)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("acceptance")
    if m is not None:
        outcome.get_result().acceptance = m.args


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[k]
        line = f"{'PASS' if ok else 'FAIL'} criterion {k:2d}: {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
