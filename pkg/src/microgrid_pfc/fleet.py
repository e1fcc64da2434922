"""
Aggregated EV fleet: per-vehicle SOC bookkeeping, availability estimate (SE%),
dispatchable limits and the first-order aggregate power response.

Vehicles are stored column-wise in numpy arrays so the integrator can work on
them in place; :class:`EvUnit` is a read-only row view for callers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path

import numpy as np
from numba import njit

from .profiles import DAY_S

N_PROFILES = 5
# plug-in windows per profile, seconds of day, end exclusive
PROFILE_WINDOWS: dict[int, tuple[tuple[float, float], ...]] = {
    1: ((0.0, 25_200.0), (68_400.0, DAY_S)),        # overnight: away 07:00-19:00
    2: ((0.0, 25_200.0), (32_400.0, DAY_S)),        # morning commute: away 07:00-09:00
    3: ((30_600.0, 63_000.0),),                     # workplace day: plugged 08:30-17:30
    4: ((0.0, 61_200.0), (75_600.0, DAY_S)),        # evening: away 17:00-21:00
    5: ((0.0, DAY_S),),                             # always plugged
}
PROFILE_SOC0 = {1: 0.3, 2: 0.4, 3: 0.5, 4: 0.6, 5: 0.7}
MAX_WINDOWS = 2
# per-unit seeded jitter
PLUG_JITTER_S = 900.0
SOC_JITTER = 0.02

ALLOC_TOL_MW = 1e-9
RESP_FLUSH_MW = 1e-12


class Mode(IntEnum):
    IDLE = 0
    CHARGING = 1
    REGULATION = 2


class AllocationFault(RuntimeError):
    pass


@dataclass(frozen=True)
class EvUnit:
    profile_id: int
    soc: float
    capacity_kwh: float
    p_charger_kw: float
    plug_schedule: tuple[tuple[float, float], ...]

    def plugged(self, t_s: float) -> bool:
        tod = t_s % DAY_S
        return any(a <= tod < b for a, b in self.plug_schedule)


@dataclass
class FleetState:
    profile_id: np.ndarray
    soc: np.ndarray
    capacity_kwh: np.ndarray
    charger_kw: np.ndarray
    plug_start: np.ndarray      # (n, MAX_WINDOWS), NaN padded
    plug_end: np.ndarray
    p_cap_mw: float = 4.0
    k_ev: float = 0.333
    t_ev_s: float = 1.0
    p_resp_mw: float = 0.0
    mode: Mode = Mode.IDLE
    soc_min: float = 0.2
    soc_max: float = 0.8
    eta: float = 1.0

    def __post_init__(self):
        if not (self.k_ev > 0 and self.t_ev_s > 0):
            raise ValueError("k_ev and t_ev_s must be > 0")
        if not 0 <= self.soc_min < self.soc_max <= 1:
            raise ValueError("need 0 <= soc_min < soc_max <= 1")
        n = self.soc.size
        for name in ("profile_id", "capacity_kwh", "charger_kw"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
        if self.plug_start.shape != (n, MAX_WINDOWS) or self.plug_end.shape != (n, MAX_WINDOWS):
            raise ValueError(f"plug windows must have shape ({n}, {MAX_WINDOWS})")

    def __len__(self):
        return self.soc.size

    @property
    def units(self) -> list[EvUnit]:
        out = []
        for k in range(len(self)):
            sched = tuple((float(a), float(b)) for a, b in zip(self.plug_start[k], self.plug_end[k])
                          if not np.isnan(a))
            out.append(EvUnit(int(self.profile_id[k]), float(self.soc[k]),
                              float(self.capacity_kwh[k]), float(self.charger_kw[k]), sched))
        return out

    def copy(self) -> "FleetState":
        return replace(self, profile_id=self.profile_id.copy(), soc=self.soc.copy(),
                       capacity_kwh=self.capacity_kwh.copy(), charger_kw=self.charger_kw.copy(),
                       plug_start=self.plug_start.copy(), plug_end=self.plug_end.copy())

    @classmethod
    def from_units(cls, units: list[EvUnit], **kw) -> "FleetState":
        n = len(units)
        start = np.full((n, MAX_WINDOWS), np.nan)
        end = np.full((n, MAX_WINDOWS), np.nan)
        for k, u in enumerate(units):
            if len(u.plug_schedule) > MAX_WINDOWS:
                raise ValueError(f"unit {k}: at most {MAX_WINDOWS} plug windows")
            for j, (a, b) in enumerate(u.plug_schedule):
                start[k, j], end[k, j] = a, b
        return cls(
            profile_id=np.array([u.profile_id for u in units], dtype=np.int64),
            soc=np.array([u.soc for u in units], dtype=np.float64),
            capacity_kwh=np.array([u.capacity_kwh for u in units], dtype=np.float64),
            charger_kw=np.array([u.p_charger_kw for u in units], dtype=np.float64),
            plug_start=start, plug_end=end, **kw)


def build_fleet(n_evs: int, profile_seed: int = 0, capacity_kwh: float = 40.0,
                charger_kw: float = 45.0, **kw) -> FleetState:
    """Spread ``n_evs`` evenly over the five profile templates.

    The remainder goes to the lowest profile ids. Each vehicle gets a small
    plug-time and SOC jitter drawn from a generator keyed on
    ``(profile_seed, profile, index-within-profile)``, so a larger fleet built
    with the same seed contains the smaller one.
    """
    if n_evs < 0:
        raise ValueError("n_evs must be >= 0")
    base, extra = divmod(n_evs, N_PROFILES)
    units = []
    for pid in range(1, N_PROFILES + 1):
        for j in range(base + (1 if pid <= extra else 0)):
            rng = np.random.default_rng([profile_seed, pid, j])
            shift, dsoc = rng.uniform(-1.0, 1.0, size=2)
            sched = []
            for a, b in PROFILE_WINDOWS[pid]:
                # day edges stay fixed so overnight windows keep wrapping
                a2 = a if a == 0.0 else a + shift * PLUG_JITTER_S
                b2 = b if b == DAY_S else b + shift * PLUG_JITTER_S
                sched.append((a2, b2))
            units.append(EvUnit(pid, PROFILE_SOC0[pid] + dsoc * SOC_JITTER,
                                capacity_kwh, charger_kw, tuple(sched)))
    return FleetState.from_units(units, **kw)


def load_roster_csv(path: str | Path, **kw) -> FleetState:
    """Fleet roster with columns profile_id, capacity_kwh, charger_kw,
    initial_soc, plug_intervals (``start-end`` pairs separated by ``;``)."""
    path = Path(path)
    units = []
    with path.open(newline="") as fh:
        for n, row in enumerate(csv.DictReader(fh), start=2):
            try:
                sched = tuple(tuple(float(x) for x in span.split("-"))
                              for span in row["plug_intervals"].split(";") if span.strip())
                units.append(EvUnit(int(row["profile_id"]), float(row["initial_soc"]),
                                    float(row["capacity_kwh"]), float(row["charger_kw"]), sched))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{n}: bad roster row ({exc})") from exc
    return FleetState.from_units(units, **kw)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _plugged(plug_start, plug_end, k, tod):
    for j in range(plug_start.shape[1]):
        if plug_start[k, j] <= tod < plug_end[k, j]:
            return True
    return False


@njit(cache=True)
def _fill_plugged(plug_start, plug_end, t_s, out):
    tod = t_s % 86_400.0
    for k in range(out.size):
        out[k] = _plugged(plug_start, plug_end, k, tod)


@njit(cache=True)
def _se_percent(plugged, soc, soc_min, soc_max):
    n = soc.size
    if n == 0:
        return 0.0
    c = 0
    for k in range(n):
        if plugged[k] and soc_min < soc[k] < soc_max:
            c += 1
    return 100.0 * c / n


@njit(cache=True)
def _unit_caps_kw(plugged, soc, capacity_kwh, charger_kw, soc_min, soc_max, eta, dt_s,
                  charge, caps):
    """Per-unit power headroom [kW] in one direction; dt_s <= 0 ignores energy."""
    total = 0.0
    for k in range(soc.size):
        c = 0.0
        if plugged[k]:
            room = soc_max - soc[k] if charge else soc[k] - soc_min
            if room > 0.0:
                c = charger_kw[k]
                if dt_s > 0.0:
                    c = min(c, room * capacity_kwh[k] * 3600.0 / (eta * dt_s))
        caps[k] = c
        total += c
    return total


@njit(cache=True)
def _limits_mw(plugged, soc, capacity_kwh, charger_kw, soc_min, soc_max, eta, p_cap, dt_s, caps):
    chg = _unit_caps_kw(plugged, soc, capacity_kwh, charger_kw, soc_min, soc_max, eta, dt_s, True, caps)
    dis = _unit_caps_kw(plugged, soc, capacity_kwh, charger_kw, soc_min, soc_max, eta, dt_s, False, caps)
    return min(p_cap, chg * 1e-3), min(p_cap, dis * 1e-3)


@njit(cache=True)
def _response_update(p_resp, k_ev, p_cmd, t_ev, dt_s, max_chg, max_dis):
    p = p_resp + dt_s * (k_ev * p_cmd - p_resp) / t_ev
    # an idle decay otherwise stalls on a subnormal fixed point
    if abs(p) < RESP_FLUSH_MW:
        p = 0.0
    return min(max(p, -max_dis), max_chg)


@njit(cache=True)
def _allocate(p_resp_mw, plugged, soc, capacity_kwh, charger_kw, soc_min, soc_max, eta, dt_s,
              caps, alloc, active):
    """Split ``p_resp_mw`` pro rata by SOC headroom with per-unit caps, then
    update SOC in place. Returns the unallocated remainder in MW."""
    n = soc.size
    for k in range(n):
        alloc[k] = 0.0
    if p_resp_mw == 0.0 or n == 0:
        return 0.0
    charge = p_resp_mw > 0.0
    _unit_caps_kw(plugged, soc, capacity_kwh, charger_kw, soc_min, soc_max, eta, dt_s, charge, caps)
    target = abs(p_resp_mw) * 1e3
    for k in range(n):
        active[k] = caps[k] > 0.0
    # water filling: units whose pro-rata share exceeds their cap are pinned
    remaining = target
    while remaining > 0.0:
        wsum = 0.0
        for k in range(n):
            if active[k]:
                wsum += soc_max - soc[k] if charge else soc[k] - soc_min
        if wsum <= 0.0:
            break
        pinned = False
        for k in range(n):
            if active[k]:
                w = soc_max - soc[k] if charge else soc[k] - soc_min
                if remaining * w / wsum >= caps[k]:
                    alloc[k] = caps[k]
                    active[k] = False
                    pinned = True
        if pinned:
            remaining = target
            for k in range(n):
                remaining -= alloc[k]
            continue
        for k in range(n):
            if active[k]:
                w = soc_max - soc[k] if charge else soc[k] - soc_min
                alloc[k] = remaining * w / wsum
        remaining = 0.0
    total = 0.0
    for k in range(n):
        total += alloc[k]
        if alloc[k] > 0.0:
            d = eta * alloc[k] * dt_s / 3600.0 / capacity_kwh[k]
            if charge:
                soc[k] = min(soc[k] + d, soc_max)
            else:
                soc[k] = max(soc[k] - d, soc_min)
    if not charge:
        for k in range(n):
            alloc[k] = -alloc[k]
    return abs(p_resp_mw) - total * 1e-3


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def plugged_mask(fleet: FleetState, t_s: float) -> np.ndarray:
    out = np.zeros(len(fleet), dtype=np.bool_)
    _fill_plugged(fleet.plug_start, fleet.plug_end, float(t_s), out)
    return out


def se_percent(fleet: FleetState, t_s: float) -> float:
    """Share of vehicles plugged in with SOC strictly inside the band, in %."""
    return _se_percent(plugged_mask(fleet, t_s), fleet.soc, fleet.soc_min, fleet.soc_max)


def dispatchable_limits(fleet: FleetState, t_s: float, dt_s: float | None = None) -> tuple[float, float]:
    """``(max_charge_mw, max_discharge_mw)`` available at ``t_s``.

    With ``dt_s`` each vehicle is additionally capped by the power that would
    take it exactly to the SOC band edge within one step.
    """
    caps = np.empty(len(fleet))
    return _limits_mw(plugged_mask(fleet, t_s), fleet.soc, fleet.capacity_kwh, fleet.charger_kw,
                      fleet.soc_min, fleet.soc_max, fleet.eta, fleet.p_cap_mw,
                      -1.0 if dt_s is None else float(dt_s), caps)


def aggregate_response_step(fleet: FleetState, p_cmd_mw: float, dt_s: float,
                            t_s: float = 0.0) -> FleetState:
    """Euler step of ``T_ev dp/dt = K_ev p_cmd - p``, clamped to the fleet limits."""
    if not np.isfinite(p_cmd_mw):
        raise ValueError("p_cmd_mw must be finite")
    max_chg, max_dis = dispatchable_limits(fleet, t_s, dt_s)
    p = _response_update(fleet.p_resp_mw, fleet.k_ev, p_cmd_mw, fleet.t_ev_s, dt_s, max_chg, max_dis)
    return replace(fleet, p_resp_mw=p)


def command_for_setpoint(fleet: FleetState, p_set_mw: float) -> float:
    """Aggregator command whose steady-state response is ``p_set_mw``."""
    return p_set_mw / fleet.k_ev


def allocate_and_update_soc(fleet: FleetState, dt_s: float, t_s: float = 0.0) -> tuple[FleetState, np.ndarray]:
    """Distribute the fleet response over vehicles and integrate their SOC.

    Returns the updated fleet and the per-vehicle power in kW (signed,
    positive = charging).
    """
    out = fleet.copy()
    n = len(out)
    caps, alloc, active = np.empty(n), np.empty(n), np.empty(n, dtype=np.bool_)
    resid = _allocate(out.p_resp_mw, plugged_mask(out, t_s), out.soc, out.capacity_kwh,
                      out.charger_kw, out.soc_min, out.soc_max, out.eta, float(dt_s),
                      caps, alloc, active)
    if abs(resid) > ALLOC_TOL_MW:
        raise AllocationFault(f"allocation residual {resid:.3e} MW at t={t_s}")
    return out, alloc
