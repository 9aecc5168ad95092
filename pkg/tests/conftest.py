import numpy as np
import pytest

from photon_correlator import TagStream


def random_stream(rng, n_tags, duration_ps, n_channels=3):
    """A sorted random stream for property tests."""
    times = np.sort(rng.integers(0, duration_ps, n_tags))
    channels = rng.integers(0, n_channels, n_tags)
    order = np.lexsort((channels, times))
    return TagStream(channels[order].astype(np.uint8), times[order], duration_ps)


def poisson_stream(rng, rate_hz, duration_ps, channel=0, t_min=0, t_max=None):
    """Homogeneous Poisson arrivals over [t_min, t_max) within the window."""
    t_max = duration_ps if t_max is None else t_max
    span_s = (t_max - t_min) * 1e-12
    n = rng.poisson(rate_hz * span_s)
    times = np.sort(rng.integers(t_min, t_max, n))
    return TagStream(np.full(n, channel, np.uint8), times, duration_ps)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
