import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def complex_gaussian(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@st.composite
def matrix_shapes(draw, max_rows=24, max_cols=12, tall=True):
    cols = draw(st.integers(1, max_cols))
    rows = draw(st.integers(cols if tall else 1, max_rows if max_rows >= cols else cols))
    return rows, cols


_criteria: list[tuple[int, str]] = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _criteria.extend(v for k, v in report.user_properties if k == "acceptance")


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_criteria):
            terminalreporter.write_line(line)
