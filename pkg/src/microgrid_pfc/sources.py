"""
Generation models: diesel generator with droop governor, PV farm
(single-diode cell, incremental-conductance MPPT) and wind farm with
high-wind trip hysteresis.

The scalar kernels (``_governor_*``, ``_cell_current``, ``_inc_step``,
``_wind_*``) are numba-compiled so the integrator can call them directly;
the public functions wrap them with the dataclass types below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .profiles import Profile, hold_value

# Newton status codes returned by _cell_current
NEWTON_OK = 0
NEWTON_FAILED = 1

_NEWTON_MAXITER = 100
# exponent cap keeps exp() finite while damping overshoots
_EXP_CAP = 600.0


class SolverFault(RuntimeError):
    """Raised when the single-diode Newton iteration does not converge."""


# ---------------------------------------------------------------------------
# diesel generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DieselGen:
    p_rated_mw: float = 15.0
    droop_r_pu: float = 0.05
    t_gov_s: float = 0.5
    p_ref_mw: float = 0.0
    p_mech_mw: float = 0.0
    # time constant of the load-following dispatch of p_ref; 0 = per-step
    t_dispatch_s: float = 60.0

    def __post_init__(self):
        if not self.droop_r_pu > 0:
            raise ValueError("droop_r_pu must be > 0")
        if not 0.0 <= self.p_mech_mw <= self.p_rated_mw:
            raise ValueError("p_mech_mw must lie in [0, p_rated_mw]")


@njit(cache=True)
def _governor_target(p_ref, delta_f_hz, f_nom_hz, droop_r_pu, p_rated):
    target = p_ref - (delta_f_hz / f_nom_hz) / droop_r_pu * p_rated
    return min(max(target, 0.0), p_rated)


@njit(cache=True)
def _governor_update(p_mech, target, t_gov_s, dt_s):
    return p_mech + dt_s * (target - p_mech) / t_gov_s


@njit(cache=True)
def _dispatch_update(p_ref, net_demand, p_rated, t_dispatch_s, dt_s):
    demand = min(max(net_demand, 0.0), p_rated)
    if t_dispatch_s <= 0.0:
        return demand
    return p_ref + dt_s * (demand - p_ref) / t_dispatch_s


def droop_target(gen: DieselGen, delta_f_hz: float, f_nom_hz: float = 50.0) -> float:
    """Clamped droop set point ``p_ref - (df/f_nom)/R * P_rated``."""
    return _governor_target(gen.p_ref_mw, delta_f_hz, f_nom_hz,
                            gen.droop_r_pu, gen.p_rated_mw)


def governor_step(gen: DieselGen, delta_f_hz: float, dt_s: float,
                  f_nom_hz: float = 50.0) -> DieselGen:
    """Advance the mechanical power one step toward the droop target."""
    if not dt_s > 0:
        raise ValueError("dt_s must be > 0")
    if not (math.isfinite(delta_f_hz) and math.isfinite(gen.p_mech_mw)):
        raise FloatingPointError(f"non-finite governor input (df={delta_f_hz})")
    target = droop_target(gen, delta_f_hz, f_nom_hz)
    p_mech = _governor_update(gen.p_mech_mw, target, gen.t_gov_s, dt_s)
    return replace(gen, p_mech_mw=p_mech)


# ---------------------------------------------------------------------------
# photovoltaic cell and farm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolarCellParams:
    """Single-diode cell parameters at the reference irradiance.

    ``i_l_a`` is the photocurrent at ``g_ref_w_m2``; it scales linearly with
    irradiance through :meth:`at_irradiance`.
    """
    i_l_a: float = 8.0
    i_o_a: float = 1e-10
    xi: float = 1.3
    v_t_v: float = 0.02585
    r_s_ohm: float = 0.005
    r_sh_ohm: float = 1000.0
    n_series: int = 1200
    n_parallel: int = 1
    g_ref_w_m2: float = 1000.0

    def __post_init__(self):
        if not self.i_o_a > 0:
            raise ValueError("i_o_a must be > 0")
        if not 1.0 <= self.xi <= 2.0:
            raise ValueError("xi must lie in [1, 2]")
        if self.r_s_ohm < 0 or not self.r_sh_ohm > 0:
            raise ValueError("need r_s_ohm >= 0 and r_sh_ohm > 0")
        if self.n_series < 1 or self.n_parallel < 1:
            raise ValueError("array counts must be >= 1")

    def at_irradiance(self, g_w_m2: float) -> "SolarCellParams":
        """Copy with the photocurrent scaled to irradiance ``g_w_m2``."""
        return replace(self, i_l_a=self.i_l_a * g_w_m2 / self.g_ref_w_m2)


@njit(cache=True)
def _cell_residual(i, v, i_l, i_o, xi, v_t, r_s, r_sh):
    vd = v + i * r_s
    return i_l - i_o * (math.exp(min(vd / (xi * v_t), _EXP_CAP)) - 1.0) - vd / r_sh - i


@njit(cache=True)
def _cell_current(v, i_l, i_o, xi, v_t, r_s, r_sh, i_guess):
    """Damped Newton on the implicit single-diode relation.

    Returns ``(current, status)``. The residual is concave and strictly
    decreasing in the current, so an undamped step from the right of the
    root converges monotonically; damping only guards overshoot from the left.
    """
    nvt = xi * v_t
    tol = 1e-13 * max(1.0, abs(i_l))
    i = i_guess
    f = _cell_residual(i, v, i_l, i_o, xi, v_t, r_s, r_sh)
    for _ in range(_NEWTON_MAXITER):
        if abs(f) <= tol:
            return i, NEWTON_OK
        e = math.exp(min((v + i * r_s) / nvt, _EXP_CAP))
        fp = -i_o * r_s / nvt * e - r_s / r_sh - 1.0
        step = -f / fp
        lam = 1.0
        while True:
            i_new = i + lam * step
            f_new = _cell_residual(i_new, v, i_l, i_o, xi, v_t, r_s, r_sh)
            if abs(f_new) < abs(f) or lam < 1e-12:
                break
            lam *= 0.5
        if i_new == i:
            break
        i, f = i_new, f_new
    if abs(f) <= 1e-10 * max(1.0, abs(i_l)):
        return i, NEWTON_OK
    return i, NEWTON_FAILED


def solar_cell_current(v_pv: float, p: SolarCellParams) -> float:
    """
    Cell output current at terminal voltage ``v_pv``.

    Solves ``I = I_L - I_o (exp((V + I R_s)/(xi V_T)) - 1) - (V + I R_s)/R_sh``
    for ``I``.

    Parameters
    ----------
    v_pv : float
        Cell terminal voltage [V].
    p : SolarCellParams
        Cell parameters; ``p.i_l_a`` is used as the photocurrent as given.

    Returns
    -------
    float
        Output current [A].

    Raises
    ------
    SolverFault
        If Newton fails to reach a residual below ``1e-10 * max(1, I_L)``.
    """
    if not math.isfinite(v_pv):
        raise ValueError(f"non-finite cell voltage {v_pv!r}")
    i, status = _cell_current(float(v_pv), p.i_l_a, p.i_o_a, p.xi, p.v_t_v,
                              p.r_s_ohm, p.r_sh_ohm, p.i_l_a)
    if status != NEWTON_OK:
        raise SolverFault(f"single-diode Newton did not converge at v={v_pv!r}, params={p}")
    return i


def open_circuit_voltage(p: SolarCellParams) -> float:
    """Ideal-diode estimate of the open-circuit voltage [V]."""
    if p.i_l_a <= 0:
        return 0.0
    return p.xi * p.v_t_v * math.log(p.i_l_a / p.i_o_a + 1.0)


@njit(cache=True)
def _inc_step(v_op, v_prev, i_prev, i_now, dv_step, tol, v_max):
    """Incremental-conductance decision; returns the next operating voltage."""
    dv = v_op - v_prev
    di = i_now - i_prev
    if dv == 0.0:
        if di == 0.0:
            v_new = v_op
        elif di > 0.0:
            v_new = v_op + dv_step
        else:
            v_new = v_op - dv_step
    else:
        # dP/dV = I + V dI/dV, i.e. V * (dI/dV + I/V)
        g = di / dv + i_now / v_op
        if abs(g) <= tol:
            v_new = v_op
        elif g > 0.0:
            v_new = v_op + dv_step
        else:
            v_new = v_op - dv_step
    return min(max(v_new, dv_step), v_max)


@dataclass(frozen=True)
class MpptState:
    v_op: float = 0.6      # cell operating voltage [V]
    v_last: float = 0.0
    i_last: float = 0.0
    i_now: float = 0.0


@dataclass(frozen=True)
class PvFarm:
    p_rated_mw: float = 8.0
    cell: SolarCellParams = field(default_factory=SolarCellParams)
    irradiance_profile: Profile | None = None
    mppt: MpptState = field(default_factory=MpptState)
    derate_factor: float = 1.0
    mppt_step_v: float = 0.001
    mppt_tol: float = 0.05
    v_max: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.derate_factor <= 1.0:
            raise ValueError("derate_factor must lie in [0, 1]")

    @property
    def n_cells(self) -> int:
        return self.cell.n_series * self.cell.n_parallel


def inc_mppt_step(farm: PvFarm, irradiance_w_m2: float, dt_s: float = 0.01) -> PvFarm:
    """Measure the cell at its operating voltage, then move by one INC increment.

    ``dt_s`` is accepted for interface symmetry; the tracker advances one
    voltage increment per call regardless of step length.
    """
    if irradiance_w_m2 < 0:
        raise ValueError("irradiance must be >= 0")
    st = farm.mppt
    if irradiance_w_m2 == 0:
        return replace(farm, mppt=replace(st, i_now=0.0))
    cell = farm.cell.at_irradiance(irradiance_w_m2)
    i_now = solar_cell_current(st.v_op, cell)
    v_new = _inc_step(st.v_op, st.v_last, st.i_last, i_now,
                      farm.mppt_step_v, farm.mppt_tol, farm.v_max)
    return replace(farm, mppt=MpptState(v_op=v_new, v_last=st.v_op,
                                        i_last=i_now, i_now=i_now))


@njit(cache=True)
def _pv_power_mw(v_cell, i_cell, n_cells, derate, p_rated):
    p = v_cell * i_cell * n_cells * 1e-6 * derate
    return min(max(p, 0.0), p_rated)


def pv_farm_power(farm: PvFarm, t_s: float) -> float:
    """Farm AC output [MW] at the tracker's last measured operating point.

    The measured point is the one recorded by the most recent
    :func:`inc_mppt_step` (voltage ``mppt.v_last``, current ``mppt.i_now``).
    """
    g = hold_value(farm.irradiance_profile, t_s) if farm.irradiance_profile else 0.0
    if g <= 0:
        return 0.0
    st = farm.mppt
    return _pv_power_mw(st.v_last, st.i_now, farm.n_cells, farm.derate_factor, farm.p_rated_mw)


def cell_mpp(cell: SolarCellParams, v_step: float = 1e-3) -> tuple[float, float]:
    """Brute-force maximum power point of one cell by a voltage sweep.

    Returns ``(v_mp, p_mp)``. Used for array sizing only; the tracker never
    calls it.
    """
    v_oc = open_circuit_voltage(cell)
    vs = np.arange(0.0, v_oc + v_step, v_step)
    ps = np.array([v * solar_cell_current(v, cell) for v in vs])
    k = int(np.argmax(ps))
    return float(vs[k]), float(ps[k])


def size_array(cell: SolarCellParams, p_rated_mw: float) -> SolarCellParams:
    """Choose ``n_parallel`` so the clear-sky MPP does not exceed the rating."""
    _, p_mp = cell_mpp(cell)
    n_par = max(1, int(p_rated_mw * 1e6 // (p_mp * cell.n_series)))
    return replace(cell, n_parallel=n_par)


# ---------------------------------------------------------------------------
# wind farm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WindFarm:
    p_rated_mw: float = 4.5
    rho_kg_m3: float = 1.225
    area_m2: float = 0.0      # 0 = size so that rated power is reached at v_rated
    cp: float = 0.45
    v_rated_m_s: float = 13.5
    v_trip_m_s: float = 15.0
    v_reconnect_m_s: float = 13.5
    online: bool = True
    wind_profile: Profile | None = None

    def __post_init__(self):
        if self.area_m2 == 0.0:
            area = 2.0 * self.p_rated_mw * 1e6 / (self.rho_kg_m3 * self.cp * self.v_rated_m_s ** 3)
            object.__setattr__(self, "area_m2", area)
        if self.v_reconnect_m_s > self.v_trip_m_s:
            raise ValueError("reconnect speed must not exceed trip speed")


@njit(cache=True)
def _wind_power_mw(v, online, rho, area, cp, p_rated):
    if not online:
        return 0.0
    return min(0.5 * rho * area * cp * v * v * v * 1e-6, p_rated)


@njit(cache=True)
def _wind_online(online, v, v_trip, v_reconnect):
    if online and v > v_trip:
        return False
    if not online and v <= v_reconnect:
        return True
    return online


def wind_power(v_m_s: float, farm: WindFarm) -> float:
    """``min(0.5 rho A cp v^3, P_rated)`` in MW while online, else 0."""
    if v_m_s < 0:
        raise ValueError("wind speed must be >= 0")
    return _wind_power_mw(v_m_s, farm.online, farm.rho_kg_m3, farm.area_m2,
                          farm.cp, farm.p_rated_mw)


def wind_trip_update(farm: WindFarm, v_m_s: float) -> WindFarm:
    online = _wind_online(farm.online, v_m_s, farm.v_trip_m_s, farm.v_reconnect_m_s)
    return farm if online == farm.online else replace(farm, online=online)
