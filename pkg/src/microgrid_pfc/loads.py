"""Demand models: residential profile load and a squirrel-cage induction motor start."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from numba import njit

from .profiles import Profile, hold_value, residential_multiplier


@dataclass(frozen=True)
class ResidentialLoad:
    p_nominal_mw: float = 10.0
    power_factor: float = 0.95          # metadata only; dynamics use active power
    profile: Profile = field(default_factory=residential_multiplier)

    def __post_init__(self):
        v = self.profile.values
        if v.min() < 0.0 or v.max() > 1.5:
            raise ValueError("residential multiplier must lie in [0, 1.5]")


def residential_power(load: ResidentialLoad, t_s: float) -> float:
    return load.p_nominal_mw * hold_value(load.profile, t_s)


@dataclass(frozen=True)
class AsyncMachine:
    """Direct-on-line started induction motor seen as an active-power envelope."""
    s_rated_mva: float = 0.78
    power_factor: float = 0.9
    inrush_factor: float = 7.0
    start_time_s: float = math.inf
    start_window_s: float = 20.0
    running: bool = False

    def __post_init__(self):
        if not 6.0 <= self.inrush_factor <= 8.0:
            raise ValueError("inrush_factor must lie in [6, 8]")
        if self.s_rated_mva < 0 or not 0 < self.power_factor <= 1:
            raise ValueError("need s_rated_mva >= 0 and power_factor in (0, 1]")
        if not self.start_window_s > 0:
            raise ValueError("start_window_s must be > 0")

    @property
    def p_rated_mw(self) -> float:
        return self.s_rated_mva * self.power_factor


def acm_shaft_power(m: AsyncMachine, speed_pu: float) -> float:
    """Fan-type load: torque ~ speed^2, so shaft power ~ speed^3 (rated at speed 1)."""
    return m.p_rated_mw * speed_pu ** 3


@njit(cache=True)
def _acm_power_mw(t_s, start_s, window_s, inrush, p_rated):
    if not t_s >= start_s:
        return 0.0
    x = (t_s - start_s) / window_s
    if x >= 1.0:
        return p_rated
    return p_rated * (inrush - (inrush - 1.0) * x)


def acm_power(m: AsyncMachine, t_s: float) -> float:
    """Active draw [MW]: zero before start, inrush decaying linearly to rated, then rated."""
    return _acm_power_mw(t_s, m.start_time_s, m.start_window_s, m.inrush_factor,
                         acm_shaft_power(m, 1.0))
