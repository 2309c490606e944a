import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from gstmar.ar_stationary import pacf_to_ar
from gstmar.model import GStmarModel

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@st.composite
def stationary_ar(draw, p):
    partials = draw(st.lists(st.floats(-0.9, 0.9), min_size=p, max_size=p))
    return pacf_to_ar(partials)


@st.composite
def models(draw, max_p=3, max_m=3, p=None, m1=None, m2=None):
    """Random valid G-StMAR models with moderate parameters."""
    p = p or draw(st.integers(1, max_p))
    if m1 is None or m2 is None:
        M = draw(st.integers(1, max_m))
        m1 = draw(st.integers(0, M))
        m2 = M - m1
    M = m1 + m2
    phi = [draw(stationary_ar(p)) for _ in range(M)]
    phi0 = draw(st.lists(st.floats(-2, 2), min_size=M, max_size=M))
    sigma2 = draw(st.lists(st.floats(0.05, 3), min_size=M, max_size=M))
    raw = draw(st.lists(st.floats(0.2, 1.0), min_size=M, max_size=M))
    alphas = np.array(raw) / np.sum(raw)
    nu = draw(st.lists(st.floats(2.5, 30), min_size=m2, max_size=m2))
    return GStmarModel.from_arrays(p, m1, m2, phi0, phi, sigma2, alphas, nu)


# acceptance summary: one line per criterion at the end of the run
_ACCEPTANCE: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], "PASS" if report.passed else "FAIL"))
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.failed:
        _ACCEPTANCE.append((report.nodeid.split("::")[-1], "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE:
        terminalreporter.write_line(f"{outcome}  {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
