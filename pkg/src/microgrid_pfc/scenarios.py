"""Contingency scenarios, V2G cases, single runs and the 3x3 batch."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from .config import RunConfig
from .fleet import FleetState, Mode, build_fleet, load_roster_csv
from .loads import AsyncMachine, ResidentialLoad
from .profiles import (Profile, clear_sky_irradiance, diurnal_wind, load_profile_csv,
                       residential_multiplier)
from .simcore import Components, Event, EventKind, RunResult, SimConfig, SimTrace, simulate
from .sources import DieselGen, PvFarm, SolarCellParams, WindFarm, size_array


class ScenarioId(str, Enum):
    PV_DROP = "pv_drop"
    WIND_TRIP = "wind_trip"
    ACM_START = "acm_start"


class CaseId(str, Enum):
    V2G_OFF = "v2g_off"
    EV100 = "ev100"
    EV200 = "ev200"


CASE_FLEET_SIZE = {CaseId.V2G_OFF: 0, CaseId.EV100: 100, CaseId.EV200: 200}
SCENARIO_ORDER = (ScenarioId.PV_DROP, ScenarioId.WIND_TRIP, ScenarioId.ACM_START)
CASE_ORDER = (CaseId.V2G_OFF, CaseId.EV100, CaseId.EV200)
SCENARIO_TITLES = {ScenarioId.PV_DROP: "Scenario 1: PV output drop",
                   ScenarioId.WIND_TRIP: "Scenario 2: wind farm trip",
                   ScenarioId.ACM_START: "Scenario 3: induction motor start"}
CASE_TITLES = {CaseId.V2G_OFF: "V2G Off", CaseId.EV100: "100 EVs", CaseId.EV200: "200 EVs"}


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    id: ScenarioId
    case_id: CaseId
    events: tuple[Event, ...]
    n_evs: int
    config: RunConfig = field(default_factory=RunConfig)

    def __post_init__(self):
        horizon = self.config.sim.duration_s
        for ev in self.events:
            if not 0.0 <= ev.t_s <= horizon:
                raise ScenarioError(f"event at {ev.t_s} s outside [0, {horizon}] s")
        families = {_FAMILY[ev.kind] for ev in self.events}
        if len(families) > 1:
            raise ScenarioError("a scenario holds exactly one contingency family")


_FAMILY = {EventKind.PV_DERATE: ScenarioId.PV_DROP, EventKind.WIND_SPEED: ScenarioId.WIND_TRIP,
           EventKind.ACM_START: ScenarioId.ACM_START}


def _parse_id(enum, value, what):
    try:
        return enum(value.value if isinstance(value, Enum) else value)
    except ValueError:
        names = ", ".join(e.value for e in enum)
        raise ScenarioError(f"unknown {what} {value!r} (expected one of {names})") from None


def build_scenario(scenario_id, case_id, config: RunConfig | None = None) -> ScenarioSpec:
    """Timed events for one contingency plus the fleet size of the case."""
    cfg = config or RunConfig()
    sid = _parse_id(ScenarioId, scenario_id, "scenario")
    cid = _parse_id(CaseId, case_id, "case")
    sc = cfg.scenario
    events: list[Event] = []
    if sc.contingency:
        horizon = cfg.sim.duration_s
        if sid is ScenarioId.PV_DROP:
            end = sc.pv_dip_start_s + sc.pv_dip_duration_s
            events = [Event(sc.pv_dip_start_s, EventKind.PV_DERATE, sc.pv_derate)]
            if end <= horizon:
                events.append(Event(end, EventKind.PV_DERATE, 1.0))
        elif sid is ScenarioId.WIND_TRIP:
            end = sc.gust_start_s + sc.gust_duration_s
            events = [Event(sc.gust_start_s, EventKind.WIND_SPEED, sc.gust_speed_m_s)]
            if end <= horizon:
                events.append(Event(end, EventKind.WIND_SPEED, math.nan))
        else:
            events = [Event(sc.acm_start_s, EventKind.ACM_START)]
    n = cfg.fleet.n_evs if cfg.fleet.n_evs >= 0 else CASE_FLEET_SIZE[cid]
    if cid is CaseId.V2G_OFF:
        n = 0
    return ScenarioSpec(sid, cid, tuple(events), n, cfg)


@lru_cache(maxsize=8)
def _sized_cell(cell: SolarCellParams, p_rated_mw: float) -> SolarCellParams:
    return size_array(cell, p_rated_mw)


def build_microgrid(spec: ScenarioSpec) -> Components:
    """Instantiate every component for ``spec`` from its configuration."""
    cfg = spec.config
    pv_s, w_s, l_s, a_s, f_s, d_s = cfg.pv, cfg.wind, cfg.load, cfg.acm, cfg.fleet, cfg.diesel

    cell = SolarCellParams(i_l_a=pv_s.i_l_a, i_o_a=pv_s.i_o_a, xi=pv_s.xi, v_t_v=pv_s.v_t_v,
                           r_s_ohm=pv_s.r_s_ohm, r_sh_ohm=pv_s.r_sh_ohm, n_series=pv_s.n_series)
    irr = (load_profile_csv(pv_s.profile_file) if pv_s.profile_file
           else clear_sky_irradiance(pv_s.sunrise_s, pv_s.sunset_s, pv_s.peak_w_m2))
    pv = PvFarm(p_rated_mw=pv_s.p_rated_mw, cell=_sized_cell(cell, pv_s.p_rated_mw),
                irradiance_profile=irr, mppt_step_v=pv_s.mppt_step_v, mppt_tol=pv_s.mppt_tol)

    wind_prof = (load_profile_csv(w_s.profile_file) if w_s.profile_file
                 else diurnal_wind(w_s.mean_m_s, w_s.swing_m_s))
    wind = WindFarm(p_rated_mw=w_s.p_rated_mw, rho_kg_m3=w_s.rho_kg_m3, cp=w_s.cp,
                    v_rated_m_s=w_s.v_rated_m_s, v_trip_m_s=w_s.v_trip_m_s,
                    v_reconnect_m_s=w_s.v_reconnect_m_s, wind_profile=wind_prof)

    load_prof = (load_profile_csv(l_s.profile_file) if l_s.profile_file
                 else residential_multiplier(l_s.night_pu, l_s.day_pu))
    load = ResidentialLoad(l_s.p_nominal_mw, l_s.power_factor, load_prof)
    acm = AsyncMachine(a_s.s_rated_mva, a_s.power_factor, a_s.inrush_factor,
                       start_window_s=a_s.start_window_s)

    fleet = make_fleet(cfg, spec.n_evs)
    diesel = DieselGen(p_rated_mw=d_s.p_rated_mw, droop_r_pu=d_s.droop_r_pu, t_gov_s=d_s.t_gov_s,
                       t_dispatch_s=d_s.t_dispatch_s)
    return Components(diesel, pv, wind, load, acm, fleet, cfg.controller, list(spec.events))


def make_fleet(cfg: RunConfig, n_evs: int) -> FleetState:
    f = cfg.fleet
    cap = f.p_cap_mw if f.cap_per_ev_mw <= 0 else f.cap_per_ev_mw * n_evs
    kw = dict(p_cap_mw=cap, k_ev=f.k_ev, t_ev_s=f.t_ev_s, soc_min=f.soc_min, soc_max=f.soc_max,
              eta=f.eta)
    if f.roster_file:
        fleet = load_roster_csv(f.roster_file, **kw)
        return fleet if n_evs >= len(fleet) else _take(fleet, n_evs)
    return build_fleet(n_evs, f.seed, f.capacity_kwh, f.charger_kw, **kw)


def _take(fleet: FleetState, n: int) -> FleetState:
    return replace(fleet, profile_id=fleet.profile_id[:n].copy(), soc=fleet.soc[:n].copy(),
                   capacity_kwh=fleet.capacity_kwh[:n].copy(), charger_kw=fleet.charger_kw[:n].copy(),
                   plug_start=fleet.plug_start[:n].copy(), plug_end=fleet.plug_end[:n].copy())


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunSummary:
    f_min_hz: float
    f_max_hz: float
    max_abs_dev_hz: float
    time_of_nadir_s: float
    mode_duty: dict[str, float]
    final_mean_soc: float

    def to_dict(self) -> dict:
        return {"f_min_hz": self.f_min_hz, "f_max_hz": self.f_max_hz,
                "max_abs_dev_hz": self.max_abs_dev_hz, "time_of_nadir_s": self.time_of_nadir_s,
                "mode_duty": dict(self.mode_duty), "final_mean_soc": self.final_mean_soc}

    @classmethod
    def from_dict(cls, d: dict) -> "RunSummary":
        return cls(d["f_min_hz"], d["f_max_hz"], d["max_abs_dev_hz"], d["time_of_nadir_s"],
                   dict(d["mode_duty"]), d["final_mean_soc"])


def summarize(trace: SimTrace, f_nom_hz: float | None = None) -> RunSummary:
    """Exact extrema over the recorded samples."""
    if len(trace) == 0:
        raise ValueError("cannot summarize an empty trace")
    f_nom = trace.f_nom_hz if f_nom_hz is None else f_nom_hz
    f = f_nom + trace.delta_f_hz
    k_min = int(np.argmin(f))
    f_min, f_max = float(f[k_min]), float(np.max(f))
    duty = {m.name.lower(): float(np.mean(trace.mode == m.value)) for m in Mode}
    soc = trace.mean_soc[-1]
    return RunSummary(f_min, f_max, max(abs(f_min - f_nom), abs(f_max - f_nom)),
                      float(trace.t_s[k_min]), duty, float(soc))


@dataclass
class CellResult:
    scenario: ScenarioId
    case: CaseId
    summary: RunSummary | None
    error: str | None = None
    result: RunResult | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def run_scenario(scenario_id, case_id, config: RunConfig | None = None) -> tuple[ScenarioSpec, RunResult]:
    spec = build_scenario(scenario_id, case_id, config)
    return spec, simulate(spec.config.sim, build_microgrid(spec))


def run_cell(scenario_id, case_id, config: RunConfig | None = None) -> CellResult:
    try:
        spec, res = run_scenario(scenario_id, case_id, config)
    except Exception as exc:       # per-cell isolation
        return CellResult(_parse_id(ScenarioId, scenario_id, "scenario"),
                          _parse_id(CaseId, case_id, "case"), None, f"{type(exc).__name__}: {exc}")
    summary = summarize(res.trace) if len(res.trace) else None
    err = str(res.error) if res.error is not None else None
    return CellResult(spec.id, spec.case_id, summary, err, res)


def run_batch(config: RunConfig | None = None, keep_traces: bool = True) -> list[CellResult]:
    """All nine (scenario, case) cells in declaration order; faults stay per cell."""
    out = []
    for sid in SCENARIO_ORDER:
        for cid in CASE_ORDER:
            cell = run_cell(sid, cid, config)
            if not keep_traces:
                cell.result = None
            out.append(cell)
    return out
