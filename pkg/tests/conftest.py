import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from relscatter import fields as fl

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


def mixed_field_3d(scale=1.0):
    return fl.SumField([
        fl.gaussian_electric(3, v0=0.4 * scale, w=1.0, center=[0.3, 0.0, -0.2]),
        fl.localized_magnetic(3, b0=0.5 * scale, w=0.8, center=[-0.2, 0.4, 0.1]),
    ], name="mixed3d")


@pytest.fixture(scope="session")
def demo2d():
    return fl.with_estimated_beta(fl.demo_field_2d(1.0))


@pytest.fixture(scope="session")
def weak2d():
    return fl.with_estimated_beta(fl.demo_field_2d(1e-10))


@pytest.fixture(scope="session")
def mixed3d():
    return fl.with_estimated_beta(mixed_field_3d())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
