import numpy as np
import pytest
from hypothesis import settings

from microgrid_pfc.fleet import FleetState, MAX_WINDOWS
from microgrid_pfc.profiles import DAY_S

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_fleet(socs, plugged=True, charger_kw=10.0, capacity_kwh=40.0, **kw) -> FleetState:
    """Hand-built fleet: every unit plugged all day (or never)."""
    n = len(socs)
    start = np.full((n, MAX_WINDOWS), np.nan)
    end = np.full((n, MAX_WINDOWS), np.nan)
    if plugged:
        start[:, 0], end[:, 0] = 0.0, DAY_S
    return FleetState(profile_id=np.full(n, 5, dtype=np.int64), soc=np.array(socs, dtype=float),
                      capacity_kwh=np.full(n, float(capacity_kwh)), charger_kw=np.full(n, float(charger_kw)),
                      plug_start=start, plug_end=end, **kw)


@pytest.fixture
def fleet_factory():
    return make_fleet
