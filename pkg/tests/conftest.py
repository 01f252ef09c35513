import numpy as np
import pytest
from hypothesis import settings

from ssboost.core import DEFAULT_CHANNELS, Band, ChannelSet
from ssboost.synthgen import PlantSpec, generate_session

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

PLANTED = ChannelSet.from_names(["C3", "CP3"], DEFAULT_CHANNELS)


@pytest.fixture(scope="session")
def small_session():
    """Short, strongly planted session used by the fast unit tests."""
    spec = PlantSpec(PLANTED, Band(8, 13), snr=5.0, n_trials=40, n_samples=256, seed=3)
    return generate_session(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
