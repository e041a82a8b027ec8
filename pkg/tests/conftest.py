import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from driftboost.schema import Batch, FeatureSchema, Role

settings.register_profile(
    "default", max_examples=100, deadline=None,
    # the shared fixtures are immutable, so reuse across examples is safe
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture
def mixed_schema():
    return FeatureSchema(
        (("cat", Role.CAT), ("num", Role.NUM), ("tags", Role.MVC), ("ts", Role.TIME)),
        label="y", positive_label="click",
    )


@pytest.fixture
def mixed_batch():
    cols = {
        "cat": np.array(["x", "y", None, "x"], dtype=object),
        "num": np.array([1.0, np.nan, 3.0, -0.5]),
        "tags": np.array(["a,b,a", None, "b", "c"], dtype=object),
        "ts": np.array([0.0, 90061.0, np.nan, 1533081600.0]),
    }
    return Batch(1, cols, np.array([1, 0, 0, 1], dtype=np.int8))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
