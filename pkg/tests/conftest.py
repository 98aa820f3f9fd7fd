import re
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


# --- shared strategies ----------------------------------------------------------

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@st.composite
def discrete_1d(draw, max_atoms=12):
    """(points, weights) of a 1D discrete measure with positive weights."""
    k = draw(st.integers(1, max_atoms))
    pts = draw(st.lists(finite, min_size=k, max_size=k))
    w = draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k))
    return np.array(pts), np.array(w)


@st.composite
def simplex_vec(draw, n, floor=0.0):
    w = np.array(draw(st.lists(st.floats(floor + 1e-3, 1.0), min_size=n, max_size=n)))
    return w / w.sum()


# --- acceptance reporting ---------------------------------------------------------


def pytest_configure(config):
    config._acceptance_lines = {}


@pytest.fixture
def acceptance(request):
    """record(k, ok, detail) prints and stores one pass/fail line for criterion k."""
    def record(k, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d}: {detail}"
        print(line)
        request.config._acceptance_lines[k] = line
        return ok
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = re.match(r"test_criterion_(\d+)", item.name)
    if m and rep.when == "call" and rep.failed:
        k = int(m.group(1))
        lines = item.config._acceptance_lines
        if k not in lines:
            lines[k] = f"[FAIL] criterion {k:2d}: raised {call.excinfo.typename}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
