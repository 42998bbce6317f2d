import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from crowdmodal import presets
from crowdmodal.trips import GpsTrack, TripMeta, TripRecord

settings.register_profile("ci", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture(scope="session")
def ggb_frame():
    return presets.ggb_frame()


@pytest.fixture(scope="session")
def short_frame():
    return presets.short_frame()


def make_trip(n=10, trip_id="t0", fs=100.0, gps=None, **kw):
    t = np.arange(n) / fs
    accel = np.column_stack([np.zeros(n), np.zeros(n), np.full(n, 9.8)])
    if gps is None:
        gps = GpsTrack(t=[0.0], lat=[37.8], lon=[-122.4], err=[4.0])
    return TripRecord(trip_id=trip_id, t=t, accel=accel, gps=gps, **kw)


@pytest.fixture
def tiny_trip():
    return make_trip(meta=TripMeta(controllability="controlled"))


@pytest.fixture(scope="session")
def small_ggb_corpus():
    """Twelve simulated long-span crossings with their truth records."""
    from crowdmodal.simulator import simulate_corpus

    cfg = presets.ggb_sim(seed=7)
    return cfg, simulate_corpus(cfg, 12)


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
