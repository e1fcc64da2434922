"""
Fixed-step engine: per-unit aggregate swing dynamics with every component
advanced on a common clock.

Step order (fixed):

1. apply events due at this step, sample environment profiles
2. wind trip logic and wind power, PV MPPT and power, loads, diesel dispatch
   and governor
3. controller, fleet response, per-vehicle allocation and SOC
4. power imbalance ``diesel + pv + wind - load - ev``
5. explicit Euler swing update of the frequency deviation
6. clock advance

A trace sample taken at ``t`` holds the frequency at ``t`` and the component
powers of the step that ended at ``t``; the first sample holds the balanced
initial operating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from numba import njit

from .controller import FopidParams, _dead_band, _fopid, _limit, _push, _raw_setpoint, \
    _select_mode, effective_length, gl_weights
from .fleet import ALLOC_TOL_MW, FleetState, _allocate, _fill_plugged, _limits_mw, \
    _response_update, _se_percent
from .loads import AsyncMachine, ResidentialLoad, _acm_power_mw
from .sources import NEWTON_OK, DieselGen, PvFarm, WindFarm, _cell_current, _dispatch_update, \
    _governor_target, _governor_update, _inc_step, _pv_power_mw, _wind_online, _wind_power_mw


class SimulationFault(RuntimeError):
    """A component failed mid-run; carries the component name and time."""

    def __init__(self, component: str, t_s: float, detail: str = ""):
        self.component = component
        self.t_s = t_s
        super().__init__(f"{component} fault at t={t_s:.2f} s" + (f": {detail}" if detail else ""))


@dataclass(frozen=True)
class SimConfig:
    dt_s: float = 0.01
    duration_s: float = 86_400.0
    sample_every_s: float = 1.0
    f_nom_hz: float = 50.0
    s_base_mva: float = 15.0
    inertia_h_s: float = 50.0
    damping_d_pu: float = 8.0

    def __post_init__(self):
        if not self.dt_s > 0:
            raise ValueError("dt_s must be > 0")
        if self.duration_s < 0 or not _is_multiple(self.duration_s, self.dt_s):
            raise ValueError("duration_s must be a non-negative integer multiple of dt_s")
        if self.sample_every_s < self.dt_s or not _is_multiple(self.sample_every_s, self.dt_s):
            raise ValueError("sample_every_s must be a multiple of dt_s and >= dt_s")
        if not (self.f_nom_hz > 0 and self.s_base_mva > 0 and self.inertia_h_s > 0):
            raise ValueError("f_nom_hz, s_base_mva and inertia_h_s must be > 0")
        if self.damping_d_pu < 0:
            raise ValueError("damping_d_pu must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_s / self.dt_s))

    @property
    def sample_stride(self) -> int:
        return int(round(self.sample_every_s / self.dt_s))

    @property
    def n_samples(self) -> int:
        return self.n_steps // self.sample_stride + 1


def _is_multiple(x: float, step: float) -> bool:
    r = x / step
    return abs(r - round(r)) <= 1e-9 * max(1.0, abs(r))


def step_index(t_s: float, dt_s: float) -> int:
    """First step whose start time is at or after ``t_s``."""
    return int(math.ceil(t_s / dt_s - 1e-9))


# ---------------------------------------------------------------------------
# swing equation
# ---------------------------------------------------------------------------

@njit(cache=True)
def _swing(delta_f_hz, p_imb_mw, dt_s, f_nom, s_base, h, d):
    df_pu = delta_f_hz / f_nom
    return f_nom * (df_pu + dt_s * (p_imb_mw / s_base - d * df_pu) / (2.0 * h))


def swing_step(delta_f_hz: float, p_imbalance_mw: float, cfg: SimConfig) -> float:
    """
    One explicit-Euler step of ``2H d(df_pu)/dt = P_imb/S_base - D df_pu``.

    Parameters
    ----------
    delta_f_hz : float
        Frequency deviation from nominal [Hz].
    p_imbalance_mw : float
        Generation minus consumption [MW].
    cfg : SimConfig
        Supplies ``dt_s``, ``f_nom_hz``, ``s_base_mva``, ``inertia_h_s``, ``damping_d_pu``.

    Returns
    -------
    float
        Deviation after ``dt_s`` [Hz].
    """
    if not (math.isfinite(delta_f_hz) and math.isfinite(p_imbalance_mw)):
        raise SimulationFault("swing", math.nan, "non-finite input")
    return _swing(delta_f_hz, p_imbalance_mw, cfg.dt_s, cfg.f_nom_hz, cfg.s_base_mva,
                  cfg.inertia_h_s, cfg.damping_d_pu)


# ---------------------------------------------------------------------------
# events
# ---------------------------------------------------------------------------

class EventKind(IntEnum):
    PV_DERATE = 0      # value: derate factor
    WIND_SPEED = 1     # value: forced wind speed, NaN releases the override
    ACM_START = 2      # value unused


@dataclass(frozen=True)
class Event:
    t_s: float
    kind: EventKind
    value: float = 0.0


# ---------------------------------------------------------------------------
# component bundle and state
# ---------------------------------------------------------------------------

@dataclass
class Components:
    diesel: DieselGen
    pv: PvFarm
    wind: WindFarm
    load: ResidentialLoad
    acm: AsyncMachine
    fleet: FleetState
    controller: FopidParams
    events: list[Event] = field(default_factory=list)


@dataclass(frozen=True)
class MicrogridState:
    t_s: float
    delta_f_hz: float
    p_diesel_mw: float
    p_pv_mw: float
    p_wind_mw: float
    p_load_mw: float
    p_ev_mw: float

    @property
    def p_imbalance_mw(self) -> float:
        return self.p_diesel_mw + self.p_pv_mw + self.p_wind_mw - self.p_load_mw - self.p_ev_mw


TRACE_COLUMNS = ("t_s", "delta_f_hz", "p_diesel_mw", "p_pv_mw", "p_wind_mw", "p_load_mw",
                 "p_ev_mw", "mean_soc", "mode", "wind_speed_m_s", "se_percent")


@dataclass
class SimTrace:
    t_s: np.ndarray
    delta_f_hz: np.ndarray
    p_diesel_mw: np.ndarray
    p_pv_mw: np.ndarray
    p_wind_mw: np.ndarray
    p_load_mw: np.ndarray
    p_ev_mw: np.ndarray
    mean_soc: np.ndarray
    mode: np.ndarray
    wind_speed_m_s: np.ndarray
    se_percent: np.ndarray
    f_nom_hz: float = 50.0

    def __len__(self):
        return self.t_s.size

    @property
    def f_hz(self) -> np.ndarray:
        return self.f_nom_hz + self.delta_f_hz

    @classmethod
    def from_matrix(cls, m: np.ndarray, f_nom_hz: float) -> "SimTrace":
        cols = {name: m[:, k].copy() for k, name in enumerate(TRACE_COLUMNS)}
        cols["mode"] = cols["mode"].astype(np.int8)
        # k*dt carries representation noise (35*0.01 != 0.35)
        cols["t_s"] = np.round(cols["t_s"], 9)
        return cls(**cols, f_nom_hz=f_nom_hz)

    def head(self, n: int) -> "SimTrace":
        return SimTrace(**{c: getattr(self, c)[:n].copy() for c in TRACE_COLUMNS}, f_nom_hz=self.f_nom_hz)


@dataclass
class RunDiagnostics:
    max_alloc_residual_mw: float = 0.0
    conservation_mismatches: int = 0
    soc_min_seen: float = math.inf
    soc_max_seen: float = -math.inf


# state-vector slots
S_DF, S_PD, S_PREF, S_PPV, S_PW, S_PL, S_PEV, S_PSET, S_ONLINE, S_DERATE, S_WOVR, S_ACM_T, \
    S_VOP, S_VLAST, S_ILAST, S_INOW, S_MODE, S_HEAD, S_COUNT, S_QUIET, S_SE, S_VW, \
    S_RESID, S_MISMATCH, S_SOCMIN, S_SOCMAX, S_MEANSOC = range(27)
N_STATE = 27

# parameter-vector slots
(P_DT, P_FNOM, P_SBASE, P_H, P_D,
 P_DG_RATED, P_DG_R, P_DG_TGOV, P_DG_TDISP,
 P_IL, P_IO, P_XI, P_VT, P_RS, P_RSH, P_NCELLS, P_GREF, P_PV_RATED, P_MPPT_DV, P_MPPT_TOL, P_MPPT_VMAX,
 P_RHO, P_AREA, P_CP, P_W_RATED, P_VTRIP, P_VREC,
 P_LOAD_NOM, P_ACM_RATED, P_ACM_INRUSH, P_ACM_WIN,
 P_FL_CAP, P_KEV, P_TEV, P_SOCMIN, P_SOCMAX, P_ETA,
 P_KP, P_KI, P_KD, P_LAM, P_MU, P_G1, P_K1, P_K2, P_DB, P_DB_OFF, P_RATE, P_OSCALE, P_EGAIN,
 P_MEM, P_N_INT, P_N_DER,
 P_IRR_STEP, P_WIND_STEP, P_LOADP_STEP) = range(56)
N_PARAMS = 56

FAULT_NONE, FAULT_NONFINITE, FAULT_PV_SOLVER, FAULT_ALLOCATION = 0, 1, 2, 3
FAULT_COMPONENT = {FAULT_NONFINITE: "swing", FAULT_PV_SOLVER: "pv", FAULT_ALLOCATION: "ev-fleet"}


@njit(cache=True)
def _hold(values, step_s, t_s):
    k = int(math.floor(t_s / step_s))
    if k < 0:
        k = 0
    elif k >= values.size:
        k = values.size - 1
    return values[k]


@njit(cache=True)
def _advance(k0, n, s, p, irr, wind, loadp, ev_step, ev_kind, ev_val, ev_ptr,
             soc, cap_kwh, chg_kw, plug_a, plug_b, plugged, caps, alloc, active,
             hbuf, w_int, w_der, stride, trace, n_rec):
    """Advance ``n`` steps starting at step ``k0``; mutates all state in place.

    Returns ``(fault_code, step_index, n_rec, ev_ptr)``.
    """
    dt = p[P_DT]
    mem = int(p[P_MEM])
    n_int = int(p[P_N_INT])
    n_der = int(p[P_N_DER])
    n_ev = soc.size
    for k in range(k0, k0 + n):
        t = k * dt
        # 1. events and environment
        while ev_ptr < ev_step.size and ev_step[ev_ptr] <= k:
            kind = ev_kind[ev_ptr]
            if kind == 0:
                s[S_DERATE] = ev_val[ev_ptr]
            elif kind == 1:
                s[S_WOVR] = ev_val[ev_ptr]
            else:
                s[S_ACM_T] = ev_step[ev_ptr] * dt
            ev_ptr += 1
        g = _hold(irr, p[P_IRR_STEP], t)
        v_w = s[S_WOVR] if not math.isnan(s[S_WOVR]) else _hold(wind, p[P_WIND_STEP], t)
        mult = _hold(loadp, p[P_LOADP_STEP], t)
        s[S_VW] = v_w

        # 2. sources and loads
        online = _wind_online(s[S_ONLINE] > 0.5, v_w, p[P_VTRIP], p[P_VREC])
        s[S_ONLINE] = 1.0 if online else 0.0
        pw = _wind_power_mw(v_w, online, p[P_RHO], p[P_AREA], p[P_CP], p[P_W_RATED])
        ppv = 0.0
        if g > 0.0:
            i_l = p[P_IL] * g / p[P_GREF]
            v_op = s[S_VOP]
            i_now, status = _cell_current(v_op, i_l, p[P_IO], p[P_XI], p[P_VT], p[P_RS], p[P_RSH], i_l)
            if status != NEWTON_OK:
                return FAULT_PV_SOLVER, k, n_rec, ev_ptr
            v_new = _inc_step(v_op, s[S_VLAST], s[S_ILAST], i_now, p[P_MPPT_DV], p[P_MPPT_TOL],
                              p[P_MPPT_VMAX])
            s[S_VLAST] = v_op
            s[S_ILAST] = i_now
            s[S_INOW] = i_now
            s[S_VOP] = v_new
            ppv = _pv_power_mw(v_op, i_now, p[P_NCELLS], s[S_DERATE], p[P_PV_RATED])
        pl = p[P_LOAD_NOM] * mult + _acm_power_mw(t, s[S_ACM_T], p[P_ACM_WIN], p[P_ACM_INRUSH],
                                                  p[P_ACM_RATED])
        s[S_PREF] = _dispatch_update(s[S_PREF], pl - ppv - pw, p[P_DG_RATED], p[P_DG_TDISP], dt)
        target = _governor_target(s[S_PREF], s[S_DF], p[P_FNOM], p[P_DG_R], p[P_DG_RATED])
        pd = _governor_update(s[S_PD], target, p[P_DG_TGOV], dt)

        # 3. controller and fleet
        p_t = pd + ppv + pw - pl
        pev = 0.0
        if n_ev > 0:
            _fill_plugged(plug_a, plug_b, t, plugged)
            se = _se_percent(plugged, soc, p[P_SOCMIN], p[P_SOCMAX])
            max_chg, max_dis = _limits_mw(plugged, soc, cap_kwh, chg_kw, p[P_SOCMIN], p[P_SOCMAX],
                                          p[P_ETA], p[P_FL_CAP], dt, caps)
            df_f = _dead_band(s[S_DF], p[P_FNOM], p[P_DB], p[P_DB_OFF] > 0.5)
            e = -p[P_EGAIN] * df_f
            head, count = _push(hbuf, int(s[S_HEAD]), int(s[S_COUNT]), mem, e)
            s[S_HEAD] = head
            s[S_COUNT] = count
            if e == 0.0:
                s[S_QUIET] += 1.0
            else:
                s[S_QUIET] = 0.0
            if s[S_QUIET] >= mem:
                u = 0.0     # window holds only zeros
            else:
                u = _fopid(hbuf, head, count, mem, e, p[P_KP], p[P_KI], p[P_KD], p[P_LAM], p[P_MU],
                           dt, w_int, n_int, w_der, n_der)
            mode = _select_mode(p_t, u, se, p[P_K1], p[P_K2], dt)
            raw = _raw_setpoint(mode, u, p_t, max_chg, p[P_G1], p[P_OSCALE])
            p_set = _limit(raw, s[S_PSET], max_chg, max_dis, p[P_RATE], dt)
            s[S_PSET] = p_set
            s[S_MODE] = mode
            s[S_SE] = se
            pev = _response_update(s[S_PEV], p[P_KEV], p_set / p[P_KEV], p[P_TEV], dt, max_chg, max_dis)
            resid = _allocate(pev, plugged, soc, cap_kwh, chg_kw, p[P_SOCMIN], p[P_SOCMAX], p[P_ETA],
                              dt, caps, alloc, active)
            if abs(resid) > s[S_RESID]:
                s[S_RESID] = abs(resid)
            if abs(resid) > 1e-9:
                return FAULT_ALLOCATION, k, n_rec, ev_ptr
            acc = 0.0
            for j in range(n_ev):
                acc += soc[j]
                if soc[j] < s[S_SOCMIN]:
                    s[S_SOCMIN] = soc[j]
                if soc[j] > s[S_SOCMAX]:
                    s[S_SOCMAX] = soc[j]
            s[S_MEANSOC] = acc / n_ev
        s[S_PD] = pd
        s[S_PPV] = ppv
        s[S_PW] = pw
        s[S_PL] = pl
        s[S_PEV] = pev

        # 4-5. imbalance and swing
        imb = pd + ppv + pw - pl - pev
        df_new = _swing(s[S_DF], imb, dt, p[P_FNOM], p[P_SBASE], p[P_H], p[P_D])
        # recompute from the stored powers: no other term may enter the update
        check = _swing(s[S_DF], s[S_PD] + s[S_PPV] + s[S_PW] - s[S_PL] - s[S_PEV], dt, p[P_FNOM],
                       p[P_SBASE], p[P_H], p[P_D])
        if check != df_new:
            s[S_MISMATCH] += 1.0
        if not (math.isfinite(df_new) and math.isfinite(imb)):
            return FAULT_NONFINITE, k, n_rec, ev_ptr
        s[S_DF] = df_new

        # 6. clock; record the sample that closes this step
        if (k + 1) % stride == 0 and n_rec < trace.shape[0]:
            _record(trace, n_rec, (k + 1) * dt, s)
            n_rec += 1
    return FAULT_NONE, k0 + n, n_rec, ev_ptr


@njit(cache=True)
def _record(trace, i, t, s):
    trace[i, 0] = t
    trace[i, 1] = s[S_DF]
    trace[i, 2] = s[S_PD]
    trace[i, 3] = s[S_PPV]
    trace[i, 4] = s[S_PW]
    trace[i, 5] = s[S_PL]
    trace[i, 6] = s[S_PEV]
    trace[i, 7] = s[S_MEANSOC]
    trace[i, 8] = s[S_MODE]
    trace[i, 9] = s[S_VW]
    trace[i, 10] = s[S_SE]


# ---------------------------------------------------------------------------
# simulator
# ---------------------------------------------------------------------------

class Simulator:
    """Owns the packed state of one run.

    ``step()`` advances one step and returns the new :class:`MicrogridState`;
    ``advance(n)`` runs ``n`` steps inside the compiled loop; ``run()`` goes
    to the end of the horizon and returns the recorded trace.
    """

    def __init__(self, cfg: SimConfig, comp: Components):
        self.cfg = cfg
        self.comp = comp
        dt = cfg.dt_s
        self.k = 0
        self.fault: SimulationFault | None = None

        self.p = self._pack_params(cfg, comp)
        evs = sorted(enumerate(comp.events), key=lambda ie: (step_index(ie[1].t_s, dt), ie[0]))
        for _, ev in evs:
            if not 0.0 <= ev.t_s <= cfg.duration_s:
                raise ValueError(f"event time {ev.t_s} outside [0, {cfg.duration_s}]")
        self.ev_step = np.array([step_index(ev.t_s, dt) for _, ev in evs], dtype=np.int64)
        self.ev_kind = np.array([int(ev.kind) for _, ev in evs], dtype=np.int64)
        self.ev_val = np.array([ev.value for _, ev in evs], dtype=np.float64)
        self.ev_ptr = 0

        fl = comp.fleet.copy()
        self.fleet = fl
        n = len(fl)
        self.plugged = np.zeros(n, dtype=np.bool_)
        self.caps = np.zeros(n)
        self.alloc = np.zeros(n)
        self.active = np.zeros(n, dtype=np.bool_)
        self.hbuf = np.zeros(2 * comp.controller.memory_len)
        self.w_int = gl_weights(-comp.controller.lam, comp.controller.memory_len)
        self.w_der = gl_weights(comp.controller.mu, comp.controller.memory_len)
        self.p[P_N_INT] = effective_length(self.w_int)
        self.p[P_N_DER] = effective_length(self.w_der)

        self.s = self._initial_state(cfg, comp)
        self.trace = np.zeros((cfg.n_samples, len(TRACE_COLUMNS)))
        _record(self.trace, 0, 0.0, self.s)
        self.n_rec = 1

    @staticmethod
    def _profile(prof):
        if prof is None:
            return np.zeros(1), 60.0
        return prof.values, prof.step_s

    def _pack_params(self, cfg: SimConfig, c: Components) -> np.ndarray:
        p = np.zeros(N_PARAMS)
        p[P_DT], p[P_FNOM], p[P_SBASE], p[P_H], p[P_D] = (cfg.dt_s, cfg.f_nom_hz, cfg.s_base_mva,
                                                           cfg.inertia_h_s, cfg.damping_d_pu)
        d = c.diesel
        p[P_DG_RATED], p[P_DG_R], p[P_DG_TGOV], p[P_DG_TDISP] = (d.p_rated_mw, d.droop_r_pu,
                                                                 d.t_gov_s, d.t_dispatch_s)
        cell = c.pv.cell
        p[P_IL], p[P_IO], p[P_XI], p[P_VT], p[P_RS], p[P_RSH] = (cell.i_l_a, cell.i_o_a, cell.xi,
                                                                 cell.v_t_v, cell.r_s_ohm, cell.r_sh_ohm)
        p[P_NCELLS], p[P_GREF], p[P_PV_RATED] = c.pv.n_cells, cell.g_ref_w_m2, c.pv.p_rated_mw
        p[P_MPPT_DV], p[P_MPPT_TOL], p[P_MPPT_VMAX] = c.pv.mppt_step_v, c.pv.mppt_tol, c.pv.v_max
        w = c.wind
        p[P_RHO], p[P_AREA], p[P_CP], p[P_W_RATED], p[P_VTRIP], p[P_VREC] = (
            w.rho_kg_m3, w.area_m2, w.cp, w.p_rated_mw, w.v_trip_m_s, w.v_reconnect_m_s)
        p[P_LOAD_NOM] = c.load.p_nominal_mw
        p[P_ACM_RATED], p[P_ACM_INRUSH], p[P_ACM_WIN] = (c.acm.p_rated_mw, c.acm.inrush_factor,
                                                         c.acm.start_window_s)
        f = c.fleet
        p[P_FL_CAP], p[P_KEV], p[P_TEV], p[P_SOCMIN], p[P_SOCMAX], p[P_ETA] = (
            f.p_cap_mw, f.k_ev, f.t_ev_s, f.soc_min, f.soc_max, f.eta)
        k = c.controller
        (p[P_KP], p[P_KI], p[P_KD], p[P_LAM], p[P_MU], p[P_G1], p[P_K1], p[P_K2], p[P_DB], p[P_DB_OFF],
         p[P_RATE], p[P_OSCALE], p[P_EGAIN], p[P_MEM]) = (
            k.kp, k.ki, k.kd, k.lam, k.mu, k.g1, k.k1, k.k2_threshold, k.dead_band_pu,
            float(k.dead_band_offset), k.rate_limit_mw_per_s, k.output_scale_mw, k.error_gain,
            k.memory_len)
        self.irr, p[P_IRR_STEP] = self._profile(c.pv.irradiance_profile)
        self.wind_v, p[P_WIND_STEP] = self._profile(c.wind.wind_profile)
        self.loadp, p[P_LOADP_STEP] = self._profile(c.load.profile)
        return p

    def _initial_state(self, cfg: SimConfig, c: Components) -> np.ndarray:
        """Balanced operating point at t = 0: diesel covers the net demand."""
        s = np.zeros(N_STATE)
        p = self.p
        s[S_DERATE] = c.pv.derate_factor
        s[S_WOVR] = math.nan
        s[S_ACM_T] = c.acm.start_time_s if not c.acm.running else -math.inf
        s[S_VOP] = c.pv.mppt.v_op
        s[S_VLAST], s[S_ILAST], s[S_INOW] = c.pv.mppt.v_last, c.pv.mppt.i_last, c.pv.mppt.i_now
        s[S_HEAD], s[S_COUNT] = -1.0, 0.0
        s[S_SOCMIN], s[S_SOCMAX] = math.inf, -math.inf
        fl = self.fleet
        if len(fl):
            s[S_MEANSOC] = float(np.mean(fl.soc))
            s[S_SOCMIN], s[S_SOCMAX] = float(fl.soc.min()), float(fl.soc.max())
            _fill_plugged(fl.plug_start, fl.plug_end, 0.0, self.plugged)
            s[S_SE] = _se_percent(self.plugged, fl.soc, fl.soc_min, fl.soc_max)
        else:
            s[S_MEANSOC] = math.nan

        v_w = _hold(self.wind_v, p[P_WIND_STEP], 0.0)
        online = c.wind.online and not v_w > c.wind.v_trip_m_s
        s[S_ONLINE] = float(online)
        s[S_VW] = v_w
        s[S_PW] = _wind_power_mw(v_w, online, p[P_RHO], p[P_AREA], p[P_CP], p[P_W_RATED])
        g = _hold(self.irr, p[P_IRR_STEP], 0.0)
        if g > 0.0:
            i_l = p[P_IL] * g / p[P_GREF]
            i, status = _cell_current(s[S_VOP], i_l, p[P_IO], p[P_XI], p[P_VT], p[P_RS], p[P_RSH], i_l)
            if status != NEWTON_OK:
                raise SimulationFault("pv", 0.0, "Newton failed at the initial operating point")
            s[S_PPV] = _pv_power_mw(s[S_VOP], i, p[P_NCELLS], s[S_DERATE], p[P_PV_RATED])
        s[S_PL] = p[P_LOAD_NOM] * _hold(self.loadp, p[P_LOADP_STEP], 0.0) + _acm_power_mw(
            0.0, s[S_ACM_T], p[P_ACM_WIN], p[P_ACM_INRUSH], p[P_ACM_RATED])
        net = s[S_PL] - s[S_PPV] - s[S_PW]
        s[S_PEV] = fl.p_resp_mw if len(fl) else 0.0
        s[S_PSET] = s[S_PEV]
        s[S_PREF] = min(max(net, 0.0), c.diesel.p_rated_mw)
        s[S_PD] = min(max(net + s[S_PEV], 0.0), c.diesel.p_rated_mw)
        if c.diesel.p_mech_mw or c.diesel.p_ref_mw:
            s[S_PREF], s[S_PD] = c.diesel.p_ref_mw, c.diesel.p_mech_mw
        return s

    # -- public API ---------------------------------------------------------

    @property
    def state(self) -> MicrogridState:
        s = self.s
        return MicrogridState(self.k * self.cfg.dt_s, s[S_DF], s[S_PD], s[S_PPV], s[S_PW], s[S_PL], s[S_PEV])

    @property
    def soc(self) -> np.ndarray:
        return self.fleet.soc

    @property
    def diagnostics(self) -> RunDiagnostics:
        return RunDiagnostics(float(self.s[S_RESID]), int(self.s[S_MISMATCH]),
                              float(self.s[S_SOCMIN]), float(self.s[S_SOCMAX]))

    @property
    def done(self) -> bool:
        return self.k >= self.cfg.n_steps

    def advance(self, n: int) -> None:
        if self.fault is not None:
            raise self.fault
        n = min(int(n), self.cfg.n_steps - self.k)
        if n <= 0:
            return
        fl = self.fleet
        code, k, self.n_rec, self.ev_ptr = _advance(
            self.k, n, self.s, self.p, self.irr, self.wind_v, self.loadp,
            self.ev_step, self.ev_kind, self.ev_val, self.ev_ptr,
            fl.soc, fl.capacity_kwh, fl.charger_kw, fl.plug_start, fl.plug_end,
            self.plugged, self.caps, self.alloc, self.active,
            self.hbuf, self.w_int, self.w_der, self.cfg.sample_stride, self.trace, self.n_rec)
        self.k = k
        if code != FAULT_NONE:
            detail = {FAULT_NONFINITE: "non-finite frequency or power",
                      FAULT_PV_SOLVER: "single-diode Newton did not converge",
                      FAULT_ALLOCATION: f"allocation residual above {ALLOC_TOL_MW} MW"}[code]
            self.fault = SimulationFault(FAULT_COMPONENT[code], k * self.cfg.dt_s, detail)
            raise self.fault

    def step(self) -> MicrogridState:
        if self.done:
            raise ValueError("horizon reached")
        self.advance(1)
        return self.state

    def current_trace(self) -> SimTrace:
        return SimTrace.from_matrix(self.trace[: self.n_rec], self.cfg.f_nom_hz)

    def run(self) -> SimTrace:
        """Run to the horizon; on a fault return the partial trace (see :attr:`fault`)."""
        try:
            self.advance(self.cfg.n_steps - self.k)
        except SimulationFault:
            pass
        return self.current_trace()


@dataclass
class RunResult:
    trace: SimTrace
    diagnostics: RunDiagnostics
    error: SimulationFault | None = None


def simulate(cfg: SimConfig, comp: Components) -> RunResult:
    sim = Simulator(cfg, comp)
    trace = sim.run()
    return RunResult(trace, sim.diagnostics, sim.fault)


def run(cfg: SimConfig, scenario) -> RunResult:
    """Build the microgrid described by ``scenario`` and run it over the horizon."""
    from .scenarios import build_microgrid
    return simulate(cfg, build_microgrid(scenario))
